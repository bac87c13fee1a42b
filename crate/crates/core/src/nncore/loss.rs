//! Euclidean location losses and their gradients.

use crate::error::{shape_err, Result};

/// `||pred - target||`.
pub fn loss_single(pred: [f64; 2], target: [f64; 2]) -> f64 {
    (pred[0] - target[0]).hypot(pred[1] - target[1])
}

/// Mean over steps of per-step Euclidean distances.
pub fn loss_sequence(preds: &[[f64; 2]], targets: &[[f64; 2]]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(shape_err(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| loss_single(*p, *t)).sum();
    Ok(sum / preds.len() as f64)
}

/// Gradient of `||pred - target||` with respect to `pred`; zero at the kink.
pub fn grad_single(pred: [f64; 2], target: [f64; 2]) -> [f64; 2] {
    let e = [pred[0] - target[0], pred[1] - target[1]];
    let n = e[0].hypot(e[1]);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [e[0] / n, e[1] / n]
    }
}
