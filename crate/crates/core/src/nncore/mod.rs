//! Hand-written neural network building blocks: dense layers, recurrent
//! cells with backpropagation through time, losses, dropout and optimizers.

pub mod cell;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod matrix;
pub mod optim;
pub mod stack;

pub use cell::{CellKind, CellParams, CellState, StepCache};
pub use dense::{Activation, Dense, FeedForward};
pub use dropout::apply_dropout;
pub use loss::{loss_sequence, loss_single};
pub use matrix::Matrix;
pub use optim::{clip_global_norm, Algorithm, OptimizerConfig, OptimizerState};
pub use stack::{bidirectional_sequence, LayerStack, RecurrentLayer, StackSpec, StackState, Trace};

/// A container of trainable tensors, visited in a fixed order.
pub trait Parameterized: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[off..off + t.len()]);
            off += t.len();
        }
    }

    fn scale(&mut self, a: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= a);
        }
    }

    /// `self += a * other`; shapes must match.
    fn add_scaled(&mut self, other: &Self, a: f64) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            matrix::axpy(a, o, t);
        }
    }

    fn sq_norm(&self) -> f64 {
        self.tensors().iter().map(|t| matrix::dot(t, t)).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
