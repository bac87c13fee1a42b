//! Fingerprint databases and test tracks.
//!
//! RSSI values are kept in dBm with an explicit "not detected" marker per
//! feature. Consumers that need dense vectors go through
//! [`Fingerprint::imputed`], which ranks a missing reading at
//! [`NOT_DETECTED_DBM`], below any detected value.

mod holdout;
mod native;
mod normalize;
mod synthetic;
mod uji;

pub use holdout::split_holdout;
pub use native::{read_database, read_track, write_database, write_track};
pub use normalize::{impute_and_normalize, FeatureScaler, NormalizedView};
pub use synthetic::{generate_synthetic, AccessPoint, Polyline, SyntheticEnvironment, TrackSpec};
pub use uji::{load_ujiindoorloc, UjiFilter, UjiLoad, UJI_NOT_DETECTED, UJI_WAP_COLUMNS};

use std::collections::HashSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::location::Location;
use crate::rng::Rng;

/// Imputed value for a feature that was not detected.
pub const NOT_DETECTED_DBM: f64 = -110.0;
/// Strongest representable reading.
pub const MAX_DBM: f64 = 0.0;

/// One RSSI scan: `N` readings in dBm, `None` when the AP was not heard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    values: Vec<Option<f64>>,
}

impl Fingerprint {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        for (j, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !(NOT_DETECTED_DBM..=MAX_DBM).contains(v) {
                    return Err(config_err(format!(
                        "feature {j}: {v} dBm outside [{NOT_DETECTED_DBM}, {MAX_DBM}]"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// Builds a fingerprint from dense readings, clamping into the valid range.
    pub fn from_dbm_clamped(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            values: values
                .into_iter()
                .map(|v| Some(v.clamp(NOT_DETECTED_DBM, MAX_DBM)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        self.values[j]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn is_detected(&self, j: usize) -> bool {
        self.values[j].is_some()
    }

    /// Dense dBm vector with missing readings at [`NOT_DETECTED_DBM`].
    pub fn imputed(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.unwrap_or(NOT_DETECTED_DBM))
            .collect()
    }
}

/// Element-wise mean of imputed fingerprints.
pub fn mean_imputed<'a>(scans: impl IntoIterator<Item = &'a Fingerprint>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for s in scans {
        if acc.is_empty() {
            acc = vec![0.0; s.len()];
        }
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v.unwrap_or(NOT_DETECTED_DBM);
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub location: Location,
    pub scans: Vec<Fingerprint>,
}

/// Uniform choice of one stored scan.
pub fn pick_random_scan<'a>(rp: &'a ReferencePoint, rng: &mut Rng) -> &'a Fingerprint {
    &rp.scans[pick_scan_index(rp, rng)]
}

pub(crate) fn pick_scan_index(rp: &ReferencePoint, rng: &mut Rng) -> usize {
    if rp.scans.len() == 1 {
        0
    } else {
        rng.random_range(0..rp.scans.len())
    }
}

/// The offline radio map. Immutable once built.
#[derive(Clone, Debug)]
pub struct FingerprintDatabase {
    rps: Vec<ReferencePoint>,
    ap_count: usize,
    feature_count: usize,
    grid_size: f64,
    means: Vec<Vec<f64>>,
}

impl PartialEq for FingerprintDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.rps == other.rps
            && self.ap_count == other.ap_count
            && self.feature_count == other.feature_count
            && self.grid_size.to_bits() == other.grid_size.to_bits()
    }
}

impl FingerprintDatabase {
    pub fn new(rps: Vec<ReferencePoint>, ap_count: usize, grid_size: f64) -> Result<Self> {
        let first = rps
            .first()
            .ok_or_else(|| crate::Error::EmptySelection("database has no reference points".into()))?;
        let feature_count = first
            .scans
            .first()
            .ok_or_else(|| config_err("reference point 0 has no scans"))?
            .len();
        if feature_count < ap_count {
            return Err(config_err(format!(
                "{feature_count} features cannot cover {ap_count} access points"
            )));
        }
        if !(grid_size > 0.0) {
            return Err(config_err(format!("grid size must be positive, got {grid_size}")));
        }
        let mut seen = HashSet::with_capacity(rps.len());
        for (i, rp) in rps.iter().enumerate() {
            if rp.scans.is_empty() {
                return Err(config_err(format!("reference point {i} has no scans")));
            }
            if let Some(s) = rp.scans.iter().find(|s| s.len() != feature_count) {
                return Err(shape_err(format!(
                    "reference point {i}: scan has {} features, expected {feature_count}",
                    s.len()
                )));
            }
            if !seen.insert((rp.location.x.to_bits(), rp.location.y.to_bits())) {
                return Err(config_err(format!(
                    "duplicate reference point location ({}, {})",
                    rp.location.x, rp.location.y
                )));
            }
        }
        let means = rps.iter().map(|rp| mean_imputed(&rp.scans)).collect();
        Ok(Self {
            rps,
            ap_count,
            feature_count,
            grid_size,
            means,
        })
    }

    pub fn rps(&self) -> &[ReferencePoint] {
        &self.rps
    }

    pub fn rp(&self, i: usize) -> &ReferencePoint {
        &self.rps[i]
    }

    pub fn len(&self) -> usize {
        self.rps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rps.is_empty()
    }

    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn grid_size(&self) -> f64 {
        self.grid_size
    }

    pub fn location(&self, i: usize) -> Location {
        self.rps[i].location
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> + '_ {
        self.rps.iter().map(|rp| rp.location)
    }

    /// Per-RP mean fingerprint over all stored scans (imputed dBm).
    pub fn mean_fingerprint(&self, i: usize) -> &[f64] {
        &self.means[i]
    }

    pub fn mean_fingerprints(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Axis-aligned bounds of the RP locations: (min, max).
    pub fn bounds(&self) -> (Location, Location) {
        let mut lo = Location::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Location::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for l in self.locations() {
            lo.x = lo.x.min(l.x);
            lo.y = lo.y.min(l.y);
            hi.x = hi.x.max(l.x);
            hi.y = hi.y.max(l.y);
        }
        (lo, hi)
    }

    /// Copies every fingerprint from the RPs inside `src` onto the RPs found
    /// at the same relative offset inside the region shifted by `offset`.
    ///
    /// The result has two regions that are indistinguishable by RSSI alone.
    /// Returns the number of RPs overwritten.
    pub fn alias_region(&mut self, src_min: Location, src_max: Location, offset: Location) -> usize {
        let key = |l: Location| ((l.x * 1e6).round() as i64, (l.y * 1e6).round() as i64);
        let index: std::collections::HashMap<_, usize> = self
            .rps
            .iter()
            .enumerate()
            .map(|(i, rp)| (key(rp.location), i))
            .collect();
        let mut copied = 0;
        for i in 0..self.rps.len() {
            let l = self.rps[i].location;
            if l.x < src_min.x || l.x > src_max.x || l.y < src_min.y || l.y > src_max.y {
                continue;
            }
            let target = key(Location::new(l.x + offset.x, l.y + offset.y));
            if let Some(&j) = index.get(&target) {
                self.rps[j].scans = self.rps[i].scans.clone();
                self.means[j] = self.means[i].clone();
                copied += 1;
            }
        }
        copied
    }
}

/// One online observation: where the user really was and what was scanned.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackPoint {
    pub location: Location,
    pub scans: Vec<Fingerprint>,
}

impl TrackPoint {
    /// Mean of the point's scans (imputed dBm).
    pub fn query(&self) -> Vec<f64> {
        mean_imputed(&self.scans)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestTrack {
    pub points: Vec<TrackPoint>,
    pub initial_known: bool,
}

impl TestTrack {
    pub fn new(points: Vec<TrackPoint>, initial_known: bool) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(1..=2).contains(&p.scans.len()) {
                return Err(config_err(format!(
                    "track point {i} has {} scans; 1 or 2 expected",
                    p.scans.len()
                )));
            }
        }
        Ok(Self {
            points,
            initial_known,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locations(&self) -> Vec<Location> {
        self.points.iter().map(|p| p.location).collect()
    }

    pub fn initial_location(&self) -> Option<Location> {
        self.points.first().map(|p| p.location)
    }

    /// Largest distance between consecutive true locations.
    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].location.distance(&w[1].location))
            .fold(0.0, f64::max)
    }

    /// First `n` points.
    pub fn truncated(&self, n: usize) -> TestTrack {
        TestTrack {
            points: self.points[..n.min(self.points.len())].to_vec(),
            initial_known: self.initial_known,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn fp(v: &[f64]) -> Fingerprint {
        Fingerprint::new(v.iter().map(|&x| Some(x)).collect()).unwrap()
    }

    #[test]
    fn fingerprint_range_enforced() {
        assert!(Fingerprint::new(vec![Some(-111.0)]).is_err());
        assert!(Fingerprint::new(vec![Some(1.0)]).is_err());
        let f = Fingerprint::new(vec![None, Some(-110.0)]).unwrap();
        assert!(!f.is_detected(0));
        assert_eq!(f.imputed(), vec![-110.0, -110.0]);
        assert_ne!(f.get(0), f.get(1));
    }

    #[test]
    fn database_validation() {
        let rp = |x: f64, v: f64| ReferencePoint {
            location: Location::new(x, 0.0),
            scans: vec![fp(&[v, v])],
        };
        assert!(FingerprintDatabase::new(vec![rp(0.0, -50.0), rp(0.0, -60.0)], 2, 1.0).is_err());
        assert!(FingerprintDatabase::new(vec![rp(0.0, -50.0)], 3, 1.0).is_err());
        assert!(FingerprintDatabase::new(vec![], 1, 1.0).is_err());
        let db = FingerprintDatabase::new(vec![rp(0.0, -50.0), rp(1.0, -60.0)], 2, 1.0).unwrap();
        assert_eq!(db.mean_fingerprint(1), &[-60.0, -60.0]);
    }

    #[test]
    fn single_scan_always_chosen() {
        let rp = ReferencePoint {
            location: Location::new(0.0, 0.0),
            scans: vec![fp(&[-40.0])],
        };
        let mut rng = stream(3, Stream::Dataset);
        for _ in 0..10 {
            assert_eq!(pick_random_scan(&rp, &mut rng), &rp.scans[0]);
        }
    }

    #[test]
    fn scan_choice_reproducible_and_uniform() {
        let rp = ReferencePoint {
            location: Location::new(0.0, 0.0),
            scans: (0..100).map(|i| fp(&[-(i as f64)])).collect(),
        };
        let seq = |seed| {
            let mut rng = stream(seed, Stream::Dataset);
            (0..50).map(|_| pick_scan_index(&rp, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(seq(11), seq(11));

        // Chi-square over 100 cells from 10^5 draws, bounded at mean + 3 sd.
        let n = 100_000usize;
        let k = 100usize;
        let mut counts = vec![0usize; k];
        let mut rng = stream(12, Stream::Dataset);
        for _ in 0..n {
            counts[pick_scan_index(&rp, &mut rng)] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let dof = (k - 1) as f64;
        assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn alias_region_copies_fingerprints() {
        let rps = (0..4)
            .map(|i| ReferencePoint {
                location: Location::new(i as f64, 0.0),
                scans: vec![fp(&[-40.0 - i as f64])],
            })
            .collect();
        let mut db = FingerprintDatabase::new(rps, 1, 1.0).unwrap();
        let n = db.alias_region(Location::new(0.0, 0.0), Location::new(0.0, 0.0), Location::new(3.0, 0.0));
        assert_eq!(n, 1);
        assert_eq!(db.rp(3).scans, db.rp(0).scans);
        assert_eq!(db.mean_fingerprint(3), db.mean_fingerprint(0));
    }
}
