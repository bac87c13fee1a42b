use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::location::Location;

/// Resolution of the stored empirical CDF (m).
pub const CDF_STEP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Per-point Euclidean errors (m), in track order.
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: f64,
    /// `(error, fraction of points with error <= it)` on a 0.05 m grid
    /// reaching at least `max`.
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub method: String,
    pub points: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
    pub p95: f64,
}

pub fn error_report(truth: &[Location], estimates: &[Location]) -> Result<ErrorReport> {
    if truth.len() != estimates.len() {
        return Err(shape_err(format!(
            "{} true locations for {} estimates",
            truth.len(),
            estimates.len()
        )));
    }
    Ok(ErrorReport::from_errors(
        truth.iter().zip(estimates).map(|(t, e)| t.distance(e)).collect(),
    ))
}

impl ErrorReport {
    pub fn from_errors(errors: Vec<f64>) -> Self {
        let n = errors.len();
        if n == 0 {
            return Self {
                errors,
                mean: 0.0,
                std: 0.0,
                max: 0.0,
                cdf: vec![(0.0, 1.0)],
            };
        }
        let mean = errors.iter().sum::<f64>() / n as f64;
        let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let max = errors.iter().cloned().fold(0.0, f64::max);
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let steps = (max / CDF_STEP).ceil() as usize;
        let mut cdf = Vec::with_capacity(steps + 1);
        let mut idx = 0;
        for s in 0..=steps {
            let x = s as f64 * CDF_STEP;
            while idx < n && sorted[idx] <= x {
                idx += 1;
            }
            cdf.push((x, idx as f64 / n as f64));
        }
        if let Some(last) = cdf.last_mut() {
            // Guards against `steps * CDF_STEP` rounding just below `max`.
            last.1 = 1.0;
        }
        Self { errors, mean, std, max, cdf }
    }

    /// Exact empirical CDF at `x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if self.errors.is_empty() {
            return 1.0;
        }
        self.errors.iter().filter(|&&e| e <= x).count() as f64 / self.errors.len() as f64
    }

    /// Linearly interpolated percentile, `q` in `[0, 100]`.
    pub fn percentile(&self, q: f64) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        let mut s = self.errors.clone();
        s.sort_by(f64::total_cmp);
        let pos = (q / 100.0).clamp(0.0, 1.0) * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    }

    pub fn summary(&self, method: &str) -> ReportSummary {
        ReportSummary {
            method: method.to_string(),
            points: self.errors.len(),
            mean: self.mean,
            std: self.std,
            max: self.max,
            p50: self.percentile(50.0),
            p80: self.percentile(80.0),
            p90: self.percentile(90.0),
            p95: self.percentile(95.0),
        }
    }

    /// `error_m,cdf`.
    pub fn write_cdf_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["error_m", "cdf"])?;
        for (x, c) in &self.cdf {
            w.write_record([format!("{x:.2}"), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `point_id,true_x,true_y,est_x,est_y,error_m`.
pub fn write_points_csv(path: impl AsRef<Path>, truth: &[Location], estimates: &[Location]) -> Result<()> {
    if truth.len() != estimates.len() {
        return Err(shape_err("truth and estimates differ in length"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_id", "true_x", "true_y", "est_x", "est_y", "error_m"])?;
    for (i, (t, e)) in truth.iter().zip(estimates).enumerate() {
        w.write_record([
            i.to_string(),
            t.x.to_string(),
            t.y.to_string(),
            e.x.to_string(),
            e.y.to_string(),
            t.distance(e).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One column per method, one row per statistic.
pub fn write_comparison_csv(path: impl AsRef<Path>, summaries: &[ReportSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["metric".to_string()];
    header.extend(summaries.iter().map(|s| s.method.clone()));
    w.write_record(&header)?;
    type Column = fn(&ReportSummary) -> f64;
    let rows: [(&str, Column); 6] = [
        ("mean_m", |s| s.mean),
        ("std_m", |s| s.std),
        ("p50_m", |s| s.p50),
        ("p80_m", |s| s.p80),
        ("max_m", |s| s.max),
        ("points", |s| s.points as f64),
    ];
    for (name, f) in rows {
        let mut r = vec![name.to_string()];
        r.extend(summaries.iter().map(|s| format!("{:.4}", f(s))));
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimates() {
        let t = vec![Location::new(1.0, 2.0), Location::new(3.0, 4.0)];
        let r = error_report(&t, &t).unwrap();
        assert_eq!((r.mean, r.std, r.max), (0.0, 0.0, 0.0));
        assert_eq!(r.errors, vec![0.0, 0.0]);
        assert_eq!(r.cdf, vec![(0.0, 1.0)]);
    }

    #[test]
    fn single_offset_point() {
        let r = error_report(&[Location::new(0.0, 0.0)], &[Location::new(3.0, 4.0)]).unwrap();
        assert_eq!(r.mean, 5.0);
        assert_eq!(r.cdf_at(4.999), 0.0);
        assert_eq!(r.cdf_at(5.0), 1.0);
        let before: Vec<_> = r.cdf.iter().filter(|(x, _)| *x < 4.99).collect();
        assert!(before.iter().all(|(_, c)| *c == 0.0));
        assert_eq!(r.cdf.last().unwrap().1, 1.0);
        assert!(error_report(&[], &[Location::default()]).is_err());
    }

    #[test]
    fn mean_and_monotone_cdf() {
        let errs: Vec<f64> = (0..97).map(|i| ((i * 37) % 101) as f64 * 0.031).collect();
        let r = ErrorReport::from_errors(errs.clone());
        assert!((r.mean - errs.iter().sum::<f64>() / 97.0).abs() < 1e-12);
        assert!(r.cdf.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 < w[1].0));
        assert_eq!(r.cdf_at(r.max), 1.0);
        assert_eq!(r.cdf.first().unwrap().0, 0.0);
        assert!((r.percentile(100.0) - r.max).abs() < 1e-15);
    }
}
