//! Error statistics, correlation-based ambiguity analysis and robustness
//! sweeps.

mod ambiguity;
mod report;
mod sweeps;

pub use ambiguity::{
    count_ambiguous_points, count_ambiguous_trajectories, neighbour_threshold, AmbiguityConfig,
};
pub use report::{error_report, write_comparison_csv, write_points_csv, ErrorReport, ReportSummary};
pub use sweeps::{
    history_noise_sweep, noisy_history, speed_sweep, speed_track, time_slot_correlation, HistoryNoise,
    SpeedSweepRow,
};

use crate::error::{shape_err, Error, Result};

/// Pearson correlation with sample statistics:
/// `1/(N-1) * sum(((a_n - mean_a) / sd_a) * ((b_n - mean_b) / sd_b))`.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err(format!("vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation("need at least two entries".into()));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::UndefinedCorrelation("a vector is constant".into()));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| ((x - ma) / sa) * ((y - mb) / sb)).sum();
    Ok((s / (n - 1) as f64).clamp(-1.0, 1.0))
}

/// Mean and sample standard deviation.
pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x - 7.0).collect();
        assert!((pearson(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        // By hand: deviations (-1, 0, 1) and (-4/3, -1/3, 5/3), sd 1 and sqrt(7/3).
        let expected = 3.0 / (2.0 * (7.0f64 / 3.0).sqrt());
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 0.982).abs() < 5e-4);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_bounded(v in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..20)) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1).collect();
            if let (Ok(r), Ok(s)) = (pearson(&a, &b), pearson(&b, &a)) {
                prop_assert!((r - s).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
