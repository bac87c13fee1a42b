//! Recursive weighted-average RSSI filter.
//!
//! Two cascaded unit-gain recursions over time, one feature at a time:
//!
//! ```text
//! y1[n] = b1 x[n]  + b2 y1[n-1]
//! y[n]  = b3 y1[n] + b4 y[n-1] + b5 y[n-2]
//! ```
//!
//! With `b1 + b2 = 1` and `b3 + b4 + b5 = 1` the DC gain is exactly one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const DEFAULT_BETAS: [f64; 5] = [0.8, 0.2, 0.8, 0.15, 0.05];
pub const TAPS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub betas: [f64; 5],
    pub enabled: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            betas: DEFAULT_BETAS,
            enabled: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let [b1, b2, b3, b4, b5] = self.betas;
        if ((b1 + b2) - 1.0).abs() > 1e-9 || ((b3 + b4 + b5) - 1.0).abs() > 1e-9 {
            return Err(config_err(format!(
                "filter weights {:?} must satisfy b1+b2 = 1 and b3+b4+b5 = 1",
                self.betas
            )));
        }
        Ok(())
    }
}

/// Streaming filter state for one feature.
#[derive(Clone, Debug)]
pub struct WeightedAverageFilter {
    betas: [f64; 5],
    state: Option<[f64; 3]>,
}

impl WeightedAverageFilter {
    /// States are seeded with the first input sample.
    pub fn new(config: &FilterConfig) -> Self {
        Self {
            betas: config.betas,
            state: None,
        }
    }

    /// States start at `history` instead of the first sample.
    pub fn with_history(config: &FilterConfig, history: f64) -> Self {
        Self {
            betas: config.betas,
            state: Some([history; 3]),
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let [b1, b2, b3, b4, b5] = self.betas;
        let [y1_prev, y_prev, y_prev2] = *self.state.get_or_insert([x; 3]);
        let y1 = b1 * x + b2 * y1_prev;
        let y = b3 * y1 + b4 * y_prev + b5 * y_prev2;
        self.state = Some([y1, y, y_prev]);
        y
    }
}

/// Filters one feature's time series.
pub fn filter_sequence(config: &FilterConfig, series: &[f64]) -> Vec<f64> {
    let mut f = WeightedAverageFilter::new(config);
    series.iter().map(|&x| f.step(x)).collect()
}

/// Filters a time-ordered sequence of feature vectors, feature by feature.
/// A disabled config returns the input unchanged.
pub fn filter_features(config: &FilterConfig, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if !config.enabled || seq.is_empty() {
        return seq.to_vec();
    }
    let n = seq[0].len();
    let mut filters = vec![WeightedAverageFilter::new(config); n];
    seq.iter()
        .map(|v| v.iter().zip(filters.iter_mut()).map(|(&x, f)| f.step(x)).collect())
        .collect()
}

/// `H(e^{jw}) = b1 / (1 - b2 z^-1) * b3 / (1 - b4 z^-1 - b5 z^-2)` at `z = e^{jw}`.
pub fn frequency_response(config: &FilterConfig, omega: f64) -> Complex64 {
    let [b1, b2, b3, b4, b5] = config.betas;
    let z1 = Complex64::from_polar(1.0, -omega);
    let z2 = z1 * z1;
    let stage1 = Complex64::new(b1, 0.0) / (1.0 - b2 * z1);
    let stage2 = Complex64::new(b3, 0.0) / (1.0 - b4 * z1 - b5 * z2);
    stage1 * stage2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_input_constant_output() {
        let cfg = FilterConfig::default();
        let out = filter_sequence(&cfg, &[-63.5; 50]);
        assert!(out.iter().all(|&y| (y + 63.5).abs() <= 1e-12));
    }

    #[test]
    fn step_from_zero_history() {
        let cfg = FilterConfig::default();
        let mut f = WeightedAverageFilter::with_history(&cfg, 0.0);
        // y1 = 0.8 * 1, y = 0.8 * 0.8
        assert!((f.step(1.0) - 0.64).abs() < 1e-15);
    }

    #[test]
    fn outlier_spike_is_attenuated() {
        let cfg = FilterConfig::default();
        let mut x = vec![-60.0; 40];
        x[20] += 20.0;
        let peak = filter_sequence(&cfg, &x)
            .iter()
            .map(|y| y + 60.0)
            .fold(f64::NEG_INFINITY, f64::max);
        // The impulse response peaks at its first tap, b1*b3.
        assert!(peak <= 20.0 * 0.8 * 0.8 + 1e-9, "{peak}");
        assert!(peak < 20.0);
    }

    #[test]
    fn dc_gain_and_low_pass_shape() {
        let cfg = FilterConfig::default();
        assert!((frequency_response(&cfg, 0.0).norm() - 1.0).abs() < 1e-12);
        let gains: Vec<f64> = (0..=8)
            .map(|k| frequency_response(&cfg, k as f64 * PI / 8.0).norm())
            .collect();
        assert!(gains.windows(2).all(|w| w[1] <= w[0]), "{gains:?}");
    }

    #[test]
    fn pass_through_configuration() {
        let cfg = FilterConfig {
            betas: [1.0, 0.0, 1.0, 0.0, 0.0],
            enabled: true,
        };
        for k in 0..=16 {
            let g = frequency_response(&cfg, k as f64 * PI / 16.0);
            assert!((g.norm() - 1.0).abs() < 1e-12);
        }
        let x = [1.0, -3.0, 7.5, 0.25];
        assert_eq!(filter_sequence(&cfg, &x), x.to_vec());
    }

    #[test]
    fn invalid_weights_rejected() {
        let cfg = FilterConfig {
            betas: [0.5, 0.2, 0.8, 0.15, 0.05],
            enabled: true,
        };
        assert!(cfg.validate().is_err());
        assert!(FilterConfig::default().validate().is_ok());
    }

    #[test]
    fn disabled_is_identity() {
        let cfg = FilterConfig {
            enabled: false,
            ..Default::default()
        };
        let seq = vec![vec![0.1, 0.9], vec![0.7, 0.3]];
        assert_eq!(filter_features(&cfg, &seq), seq);
    }

    proptest! {
        #[test]
        fn appending_never_changes_earlier_outputs(
            x in prop::collection::vec(-110.0f64..0.0, 1..40),
            tail in prop::collection::vec(-110.0f64..0.0, 1..10),
        ) {
            let cfg = FilterConfig::default();
            let a = filter_sequence(&cfg, &x);
            let mut longer = x.clone();
            longer.extend(tail);
            let b = filter_sequence(&cfg, &longer);
            prop_assert_eq!(&a[..], &b[..x.len()]);
        }
    }
}
