//! Adam, SGD and RMSProp over flattened parameter containers.

use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Adam,
    Sgd,
    Rmsprop,
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::Sgd),
            "rmsprop" => Ok(Self::Rmsprop),
            other => Err(config_err(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// Global gradient-norm limit; zero disables clipping.
    pub clip_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            learning_rate: 0.001,
            clip_norm: 5.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err("learning rate must be positive"));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(config_err("clip norm must be non-negative"));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
const RMS_DECAY: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub step: u64,
    /// First moments (Adam); empty otherwise.
    pub m: Vec<f64>,
    /// Second moments (Adam, RMSProp); empty for SGD.
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: &OptimizerConfig, param_count: usize) -> Self {
        let (m, v) = match config.algorithm {
            Algorithm::Adam => (vec![0.0; param_count], vec![0.0; param_count]),
            Algorithm::Rmsprop => (Vec::new(), vec![0.0; param_count]),
            Algorithm::Sgd => (Vec::new(), Vec::new()),
        };
        Self {
            algorithm: config.algorithm,
            learning_rate: config.learning_rate,
            step: 0,
            m,
            v,
        }
    }

    /// Applies one update in place.
    pub fn update<P: Parameterized>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let lr = self.learning_rate;
        let (bc1, bc2) = (
            1.0 - BETA1.powi(self.step.min(i32::MAX as u64) as i32),
            1.0 - BETA2.powi(self.step.min(i32::MAX as u64) as i32),
        );
        let mut off = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            match self.algorithm {
                Algorithm::Sgd => {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * gi;
                    }
                }
                Algorithm::Rmsprop => {
                    let v = &mut self.v[off..off + p.len()];
                    for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v) {
                        *vi = RMS_DECAY * *vi + (1.0 - RMS_DECAY) * gi * gi;
                        *pi -= lr * gi / (vi.sqrt() + EPS);
                    }
                }
                Algorithm::Adam => {
                    let m = &mut self.m[off..off + p.len()];
                    let v = &mut self.v[off..off + p.len()];
                    for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m).zip(v) {
                        *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                        *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                        let mh = *mi / bc1;
                        let vh = *vi / bc2;
                        *pi -= lr * mh / (vh.sqrt() + EPS);
                    }
                }
            }
            off += p.len();
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: Parameterized>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.sq_norm().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Scalar(Vec<f64>);

    impl Parameterized for Scalar {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    fn cfg(algorithm: Algorithm, learning_rate: f64) -> OptimizerConfig {
        OptimizerConfig {
            algorithm,
            learning_rate,
            clip_norm: 0.0,
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = Scalar(vec![1.0]);
        let mut st = OptimizerState::new(&cfg(Algorithm::Adam, 0.001), 1);
        st.update(&mut p, &Scalar(vec![1.0]));
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-15);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn sgd_step() {
        let mut p = Scalar(vec![1.0]);
        let mut st = OptimizerState::new(&cfg(Algorithm::Sgd, 0.01), 1);
        st.update(&mut p, &Scalar(vec![2.0]));
        assert!((p.0[0] - 0.98).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = Scalar(vec![0.0]);
        let mut st = OptimizerState::new(&cfg(Algorithm::Rmsprop, 0.01), 1);
        st.update(&mut p, &Scalar(vec![2.0]));
        let v: f64 = 0.1 * 4.0;
        assert!((p.0[0] + 0.01 * 2.0 / (v.sqrt() + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for alg in [Algorithm::Adam, Algorithm::Sgd, Algorithm::Rmsprop] {
            let mut p = Scalar(vec![0.3, -1.2]);
            let mut st = OptimizerState::new(&cfg(alg, 0.1), 2);
            for _ in 0..3 {
                st.update(&mut p, &Scalar(vec![0.0, 0.0]));
            }
            assert_eq!(p.0, vec![0.3, -1.2]);
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = Scalar(vec![3.0, 4.0]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g.0[0] - 0.6).abs() < 1e-15);
        let mut small = Scalar(vec![0.3, 0.4]);
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.0, vec![0.3, 0.4]);
    }
}
