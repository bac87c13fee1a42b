//! Vanilla, LSTM and GRU cells with hand-derived backward passes.
//!
//! Gate layout along the `G * H` rows of `w`, `u` and `b`:
//! LSTM `[input, forget, output, candidate]`, GRU `[update, reset, candidate]`,
//! vanilla a single block.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Matrix};
use super::Parameterized;
use crate::error::{shape_err, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Vanilla,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Vanilla => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub kind: CellKind,
    /// Input-to-hidden weights, `G*H x D`.
    pub w: Matrix,
    /// Hidden-to-hidden weights, `G*H x H`.
    pub u: Matrix,
    pub b: Vec<f64>,
}

/// Recurrent state carried between steps. `c` is present only for LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl CellState {
    pub fn zeros(kind: CellKind, hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: (kind == CellKind::Lstm).then(|| vec![0.0; hidden]),
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug, Default)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-nonlinearity gate values, same layout as the pre-activations.
    pub act: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    /// GRU only: `r * h_prev`.
    pub rh: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellParams {
    pub fn zeros(kind: CellKind, input: usize, hidden: usize) -> Self {
        let g = kind.gates();
        Self {
            kind,
            w: Matrix::zeros(g * hidden, input),
            u: Matrix::zeros(g * hidden, hidden),
            b: vec![0.0; g * hidden],
        }
    }

    /// Uniform init in `+-sqrt(6 / (fan_in + fan_out))` per gate block, zero biases.
    pub fn init(kind: CellKind, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(kind, input, hidden);
        let lw = (6.0 / (input + hidden) as f64).sqrt();
        let lu = (6.0 / (2 * hidden) as f64).sqrt();
        p.w.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-lw..=lw));
        p.u.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-lu..=lu));
        p
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    /// One step of the recurrence.
    pub fn step(&self, x: &[f64], prev: &CellState) -> Result<CellState> {
        let h = self.hidden_size();
        if x.len() != self.input_size() || prev.h.len() != h {
            return Err(shape_err(format!(
                "cell expects input {} / hidden {}, got {} / {}",
                self.input_size(),
                h,
                x.len(),
                prev.h.len()
            )));
        }
        let zeros;
        let c_prev = match (self.kind, &prev.c) {
            (CellKind::Lstm, Some(c)) if c.len() == h => c.as_slice(),
            (CellKind::Lstm, _) => return Err(shape_err("LSTM step needs a cell state of hidden size")),
            _ => {
                zeros = vec![0.0; 0];
                &zeros
            }
        };
        let cache = self.forward(x, &prev.h, c_prev);
        Ok(CellState {
            c: (self.kind == CellKind::Lstm).then(|| cache.c.clone()),
            h: cache.h,
        })
    }

    /// Forward step recording the cache. `c_prev` is ignored unless LSTM.
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let hs = self.hidden_size();
        let mut pre = self.b.clone();
        self.w.matvec_acc(x, &mut pre);
        let mut cache = StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            ..Default::default()
        };
        match self.kind {
            CellKind::Vanilla => {
                self.u.matvec_acc(h_prev, &mut pre);
                pre.iter_mut().for_each(|v| *v = v.tanh());
                cache.h = pre.clone();
                cache.act = pre;
            }
            CellKind::Lstm => {
                self.u.matvec_acc(h_prev, &mut pre);
                let mut c = vec![0.0; hs];
                let mut tc = vec![0.0; hs];
                let mut h = vec![0.0; hs];
                for k in 0..hs {
                    let i = sigmoid(pre[k]);
                    let f = sigmoid(pre[hs + k]);
                    let o = sigmoid(pre[2 * hs + k]);
                    let g = pre[3 * hs + k].tanh();
                    pre[k] = i;
                    pre[hs + k] = f;
                    pre[2 * hs + k] = o;
                    pre[3 * hs + k] = g;
                    c[k] = f * c_prev[k] + i * g;
                    tc[k] = c[k].tanh();
                    h[k] = o * tc[k];
                }
                cache.c_prev = c_prev.to_vec();
                cache.act = pre;
                cache.c = c;
                cache.tanh_c = tc;
                cache.h = h;
            }
            CellKind::Gru => {
                self.u.matvec_rows_acc(0, h_prev, &mut pre[..2 * hs]);
                for v in &mut pre[..2 * hs] {
                    *v = sigmoid(*v);
                }
                let rh: Vec<f64> = (0..hs).map(|k| pre[hs + k] * h_prev[k]).collect();
                self.u.matvec_rows_acc(2 * hs, &rh, &mut pre[2 * hs..]);
                let mut h = vec![0.0; hs];
                for k in 0..hs {
                    let n = pre[2 * hs + k].tanh();
                    pre[2 * hs + k] = n;
                    let z = pre[k];
                    h[k] = (1.0 - z) * n + z * h_prev[k];
                }
                cache.act = pre;
                cache.rh = rh;
                cache.h = h;
            }
        }
        cache
    }

    /// Backward through one step.
    ///
    /// `dh` and `dc` are the total gradients reaching this step's outputs.
    /// Parameter gradients accumulate into `grads`; the input gradient
    /// accumulates into `dx` when given; `dh_prev` / `dc_prev` are overwritten.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut CellParams,
        dx: Option<&mut [f64]>,
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    ) {
        let hs = self.hidden_size();
        let a = &cache.act;
        let mut dpre = vec![0.0; self.kind.gates() * hs];
        dh_prev.fill(0.0);
        match self.kind {
            CellKind::Vanilla => {
                for k in 0..hs {
                    dpre[k] = dh[k] * (1.0 - a[k] * a[k]);
                }
                grads.u.outer_acc(&dpre, &cache.h_prev);
                self.u.tmatvec_acc(&dpre, dh_prev);
            }
            CellKind::Lstm => {
                for k in 0..hs {
                    let (i, f, o, g) = (a[k], a[hs + k], a[2 * hs + k], a[3 * hs + k]);
                    let tc = cache.tanh_c[k];
                    let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                    dpre[k] = dck * g * i * (1.0 - i);
                    dpre[hs + k] = dck * cache.c_prev[k] * f * (1.0 - f);
                    dpre[2 * hs + k] = dh[k] * tc * o * (1.0 - o);
                    dpre[3 * hs + k] = dck * i * (1.0 - g * g);
                    dc_prev[k] = dck * f;
                }
                grads.u.outer_acc(&dpre, &cache.h_prev);
                self.u.tmatvec_acc(&dpre, dh_prev);
            }
            CellKind::Gru => {
                let hp = &cache.h_prev;
                for k in 0..hs {
                    let (z, n) = (a[k], a[2 * hs + k]);
                    dpre[2 * hs + k] = dh[k] * (1.0 - z) * (1.0 - n * n);
                    dpre[k] = dh[k] * (hp[k] - n) * z * (1.0 - z);
                    dh_prev[k] = dh[k] * z;
                }
                let (dzr, dn) = dpre.split_at_mut(2 * hs);
                grads.u.outer_rows_acc(2 * hs, dn, &cache.rh);
                let mut drh = vec![0.0; hs];
                self.u.tmatvec_rows_acc(2 * hs, dn, &mut drh);
                for k in 0..hs {
                    let r = a[hs + k];
                    dzr[hs + k] = drh[k] * hp[k] * r * (1.0 - r);
                    dh_prev[k] += drh[k] * r;
                }
                grads.u.outer_rows_acc(0, dzr, hp);
                self.u.tmatvec_rows_acc(0, dzr, dh_prev);
            }
        }
        grads.w.outer_acc(&dpre, &cache.x);
        for (gb, d) in grads.b.iter_mut().zip(&dpre) {
            *gb += d;
        }
        if let Some(dx) = dx {
            self.w.tmatvec_acc(&dpre, dx);
        }
    }
}

impl Parameterized for CellParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.data(), self.u.data(), &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.data_mut(), self.u.data_mut(), &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_vanilla_is_zero() {
        let p = CellParams::zeros(CellKind::Vanilla, 3, 4);
        let s = p.step(&[1.0, -2.0, 0.5], &CellState::zeros(CellKind::Vanilla, 4)).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
        assert!(s.c.is_none());
    }

    #[test]
    fn saturated_lstm_carries_cell_state() {
        let mut rng = stream(5, Stream::Init);
        let mut p = CellParams::init(CellKind::Lstm, 3, 4, &mut rng);
        p.w.data_mut().fill(0.0);
        p.u.data_mut().fill(0.0);
        for k in 0..4 {
            p.b[k] = -60.0; // input gate closed
            p.b[4 + k] = 60.0; // forget gate open
        }
        let c0 = vec![0.3, -0.7, 1.2, 0.05];
        let mut s = CellState {
            h: vec![0.0; 4],
            c: Some(c0.clone()),
        };
        for t in 0..5 {
            s = p.step(&[t as f64, 1.0, -1.0], &s).unwrap();
            for (a, b) in s.c.as_ref().unwrap().iter().zip(&c0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gru_closed_update_gate_yields_candidate() {
        let mut rng = stream(6, Stream::Init);
        let mut p = CellParams::init(CellKind::Gru, 2, 3, &mut rng);
        for k in 0..3 {
            p.b[k] = -60.0;
        }
        let x = [0.4, -0.2];
        let prev = CellState {
            h: vec![0.5, -0.1, 0.3],
            c: None,
        };
        let cache = p.forward(&x, &prev.h, &[]);
        // Candidate computed by hand: tanh(W_n x + U_n (r * h) + b_n).
        for k in 0..3 {
            let r: Vec<f64> = (0..3)
                .map(|j| sigmoid(p.b[3 + j] + (0..2).map(|i| p.w.get(3 + j, i) * x[i]).sum::<f64>()
                    + (0..3).map(|i| p.u.get(3 + j, i) * prev.h[i]).sum::<f64>()))
                .collect();
            let n = (p.b[6 + k]
                + (0..2).map(|i| p.w.get(6 + k, i) * x[i]).sum::<f64>()
                + (0..3).map(|i| p.u.get(6 + k, i) * r[i] * prev.h[i]).sum::<f64>())
            .tanh();
            assert!((cache.h[k] - n).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = CellParams::zeros(CellKind::Lstm, 3, 2);
        assert!(p.step(&[0.0; 2], &CellState::zeros(CellKind::Lstm, 2)).is_err());
        let no_c = CellState {
            h: vec![0.0; 2],
            c: None,
        };
        assert!(p.step(&[0.0; 3], &no_c).is_err());
    }
}
