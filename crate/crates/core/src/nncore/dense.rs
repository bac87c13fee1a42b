//! Fully connected layers and plain feed-forward networks.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::Parameterized;
use crate::error::{shape_err, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            w: Matrix::zeros(output, input),
            b: vec![0.0; output],
            activation,
        }
    }

    pub fn init(input: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let mut d = Self::zeros(input, output, activation);
        let lim = (6.0 / (input + output) as f64).sqrt();
        d.w.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-lim..=lim));
        d
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn output_size(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.w.matvec_acc(x, &mut y);
        y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        y
    }

    /// Accumulates parameter gradients into `grads` and, if requested,
    /// the input gradient into `dx`. `y` is this layer's forward output.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grads: &mut Dense, dx: Option<&mut [f64]>) {
        let dpre: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(d, &yv)| d * self.activation.derivative_from_output(yv))
            .collect();
        grads.w.outer_acc(&dpre, x);
        for (gb, d) in grads.b.iter_mut().zip(&dpre) {
            *gb += d;
        }
        if let Some(dx) = dx {
            self.w.tmatvec_acc(&dpre, dx);
        }
    }
}

impl Parameterized for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.data(), &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.data_mut(), &mut self.b]
    }
}

/// A chain of dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    pub layers: Vec<Dense>,
}

impl FeedForward {
    /// Hidden layers use `hidden_activation`; the output layer is linear.
    pub fn init(input: usize, hidden: &[usize], output: usize, hidden_activation: Activation, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            layers.push(Dense::init(prev, h, hidden_activation, rng));
            prev = h;
        }
        layers.push(Dense::init(prev, output, Activation::Identity, rng));
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Dense::output_size)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(shape_err(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(self.layers.iter().fold(x.to_vec(), |a, l| l.forward(&a)))
    }

    /// Forward pass keeping every activation; element 0 is the input.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    pub fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], grads: &mut FeedForward) {
        let mut dy = d_out.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if i == 0 {
                l.backward(&acts[0], &acts[1], &dy, &mut grads.layers[0], None);
            } else {
                let mut dx = vec![0.0; l.input_size()];
                l.backward(&acts[i], &acts[i + 1], &dy, &mut grads.layers[i], Some(&mut dx));
                dy = dx;
            }
        }
    }
}

impl Parameterized for FeedForward {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::gradcheck::max_relative_error;
    use crate::rng::{stream, Stream};

    #[test]
    fn feedforward_gradients_match_finite_differences() {
        let mut rng = stream(3, Stream::Init);
        for act in [Activation::Tanh, Activation::Relu] {
            let net = FeedForward::init(3, &[5, 4], 2, act, &mut rng);
            let x = [0.3, -0.8, 1.1];
            let t = [0.5, -0.25];
            let loss = |n: &FeedForward| {
                let y = n.predict(&x).unwrap();
                0.5 * ((y[0] - t[0]).powi(2) + (y[1] - t[1]).powi(2))
            };
            let acts = net.forward_trace(&x);
            let y = acts.last().unwrap();
            let mut g = net.zeros_like();
            net.backward(&acts, &[y[0] - t[0], y[1] - t[1]], &mut g);
            let err = max_relative_error(&net, &g, loss, 1e-6);
            assert!(err < 1e-5, "{act:?}: {err}");
        }
    }

    #[test]
    fn shape_checked() {
        let mut rng = stream(3, Stream::Init);
        let net = FeedForward::init(3, &[4], 2, Activation::Relu, &mut rng);
        assert!(net.predict(&[1.0]).is_err());
    }
}
