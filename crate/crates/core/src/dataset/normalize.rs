use serde::{Deserialize, Serialize};

use super::{Fingerprint, FingerprintDatabase, MAX_DBM, NOT_DETECTED_DBM};

/// Database-wide affine map from imputed dBm to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: f64,
    pub max: f64,
}

impl Default for FeatureScaler {
    fn default() -> Self {
        Self {
            min: NOT_DETECTED_DBM,
            max: MAX_DBM,
        }
    }
}

impl FeatureScaler {
    /// Min/max over every imputed reading in the database.
    pub fn fit(db: &FingerprintDatabase) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for rp in db.rps() {
            for s in &rp.scans {
                for v in s.imputed() {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
        }
        if min == max {
            log::warn!("all features are constant at {min} dBm; normalizing to 0.5");
        }
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }

    pub fn scale(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            0.5
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.scale(v)).collect()
    }

    pub fn apply_fingerprint(&self, f: &Fingerprint) -> Vec<f64> {
        self.apply(&f.imputed())
    }
}

/// Normalized per-RP means together with the scaler that produced them.
#[derive(Clone, Debug)]
pub struct NormalizedView {
    pub scaler: FeatureScaler,
    pub rp_means: Vec<Vec<f64>>,
}

impl NormalizedView {
    pub fn scan(&self, db: &FingerprintDatabase, rp: usize, scan: usize) -> Vec<f64> {
        self.scaler.apply_fingerprint(&db.rp(rp).scans[scan])
    }
}

pub fn impute_and_normalize(db: &FingerprintDatabase) -> NormalizedView {
    let scaler = FeatureScaler::fit(db);
    let rp_means = db
        .mean_fingerprints()
        .iter()
        .map(|m| scaler.apply(m))
        .collect();
    NormalizedView { scaler, rp_means }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ReferencePoint;
    use crate::Location;
    use proptest::prelude::*;

    fn db_of(values: &[Option<f64>]) -> FingerprintDatabase {
        let rps = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ReferencePoint {
                location: Location::new(i as f64, 0.0),
                scans: vec![Fingerprint::new(vec![v]).unwrap()],
            })
            .collect();
        FingerprintDatabase::new(rps, 1, 1.0).unwrap()
    }

    #[test]
    fn default_range_endpoints() {
        let s = FeatureScaler::default();
        assert_eq!(s.scale(-110.0), 0.0);
        assert_eq!(s.scale(0.0), 1.0);
        let missing = Fingerprint::new(vec![None, Some(-110.0)]).unwrap();
        let v = s.apply_fingerprint(&missing);
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn fitted_from_data() {
        let view = impute_and_normalize(&db_of(&[Some(-80.0), Some(-40.0)]));
        assert_eq!(view.rp_means, vec![vec![0.0], vec![1.0]]);
        let view = impute_and_normalize(&db_of(&[None, Some(-55.0)]));
        assert_eq!(view.rp_means, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn constant_feature_maps_to_half() {
        let view = impute_and_normalize(&db_of(&[Some(-60.0), Some(-60.0)]));
        assert!(view.scaler.is_degenerate());
        assert_eq!(view.rp_means, vec![vec![0.5], vec![0.5]]);
    }

    proptest! {
        #[test]
        fn normalization_is_monotone(a in -110.0f64..0.0, b in -110.0f64..0.0, lo in -110.0f64..-60.0) {
            let s = FeatureScaler { min: lo, max: lo + 30.0 };
            if a >= b {
                prop_assert!(s.scale(a) >= s.scale(b));
            }
        }
    }
}
