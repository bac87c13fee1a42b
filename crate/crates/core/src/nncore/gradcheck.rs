//! Central finite-difference gradient checking.

use super::Parameterized;

/// Per-entry relative error `|a - n| / max(|a| + |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(FLOOR)
}

/// Central differences of `loss` around `params`, one entry at a time.
pub fn numeric_gradient<P, F>(params: &P, loss: F, h: f64) -> Vec<f64>
where
    P: Parameterized,
    F: Fn(&P) -> f64,
{
    let base = params.flatten();
    let mut probe = params.clone();
    let mut work = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        work[i] = base[i] + h;
        probe.set_flat(&work);
        let up = loss(&probe);
        work[i] = base[i] - h;
        probe.set_flat(&work);
        let down = loss(&probe);
        work[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest per-entry relative error between `analytic` and central differences.
pub fn max_relative_error<P, F>(params: &P, analytic: &P, loss: F, h: f64) -> f64
where
    P: Parameterized,
    F: Fn(&P) -> f64,
{
    numeric_gradient(params, loss, h)
        .iter()
        .zip(analytic.flatten())
        .map(|(&n, a)| relative_error(a, n))
        .fold(0.0, f64::max)
}
