use serde::{Deserialize, Serialize};

use super::knn::radar_knn;
use crate::dataset::FingerprintDatabase;
use crate::error::{config_err, shape_err, Result};
use crate::location::Location;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Gaussian kernel width in dB.
    pub bandwidth: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { bandwidth: 4.0 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth.is_nan() || self.bandwidth <= 0.0 {
            return Err(config_err("kernel bandwidth must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEstimate {
    pub location: Location,
    /// Set when every posterior weight vanished and the 1-NN fix was used.
    pub fallback: bool,
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior-weighted centroid of the RPs. The likelihood of an RP is the
/// product over features of a Gaussian kernel density built from its scans.
pub fn kernel_localize(db: &FingerprintDatabase, query: &[f64], bandwidth: f64) -> Result<KernelEstimate> {
    if query.len() != db.feature_count() {
        return Err(shape_err(format!(
            "query has {} features, database {}",
            query.len(),
            db.feature_count()
        )));
    }
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(config_err("kernel bandwidth must be positive"));
    }
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let log_w: Vec<f64> = db
        .rps()
        .iter()
        .map(|rp| {
            let scans: Vec<Vec<f64>> = rp.scans.iter().map(|s| s.imputed()).collect();
            let ln_s = (scans.len() as f64).ln();
            (0..query.len())
                .map(|f| log_sum_exp(scans.iter().map(|s| -(query[f] - s[f]).powi(2) * inv)) - ln_s)
                .sum::<f64>()
        })
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(KernelEstimate {
            location: radar_knn(db, query, 1)?,
            fallback: true,
        });
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let (mut x, mut y) = (0.0, 0.0);
    for (wi, l) in w.iter().zip(db.locations()) {
        x += wi * l.x;
        y += wi * l.y;
    }
    Ok(KernelEstimate {
        location: Location::new(x / total, y / total),
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, Fingerprint, ReferencePoint, SyntheticEnvironment};

    #[test]
    fn narrow_kernel_picks_matching_rp() {
        let env = SyntheticEnvironment {
            shadowing_std_db: 0.0,
            ..SyntheticEnvironment::default()
        };
        let (db, _) = generate_synthetic(&env, 1).unwrap();
        for i in [0, 57, 200, 335] {
            let q = db.rp(i).scans[0].imputed();
            let e = kernel_localize(&db, &q, 0.05).unwrap();
            assert!(!e.fallback);
            assert!(e.location.distance(&db.location(i)) < 1e-9);
        }
    }

    #[test]
    fn identical_fingerprints_give_centroid() {
        let fp = Fingerprint::new(vec![Some(-50.0), Some(-70.0)]).unwrap();
        let locs = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0), (5.0, 5.0)];
        let rps = locs
            .iter()
            .map(|&(x, y)| ReferencePoint {
                location: Location::new(x, y),
                scans: vec![fp.clone()],
            })
            .collect();
        let db = FingerprintDatabase::new(rps, 2, 1.0).unwrap();
        let e = kernel_localize(&db, &[-60.0, -40.0], 4.0).unwrap();
        assert!((e.location.x - 2.25).abs() < 1e-12 && (e.location.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_inside_site_bounds() {
        let (db, track) = generate_synthetic(&SyntheticEnvironment::default(), 4).unwrap();
        let (lo, hi) = db.bounds();
        for p in &track.points {
            let e = kernel_localize(&db, &p.query(), 4.0).unwrap();
            let l = e.location;
            assert!(l.x >= lo.x - 1e-9 && l.x <= hi.x + 1e-9 && l.y >= lo.y - 1e-9 && l.y <= hi.y + 1e-9);
        }
        assert!(kernel_localize(&db, &track.points[0].query(), 0.0).is_err());
    }
}
