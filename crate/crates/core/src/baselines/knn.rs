use serde::{Deserialize, Serialize};

use crate::dataset::{FingerprintDatabase, TestTrack};
use crate::error::{config_err, shape_err, Result};
use crate::location::Location;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
    /// Soft range scale (m) for SRL-KNN.
    pub srl_sigma: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3, srl_sigma: 2.0 }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config_err("k must be at least 1"));
        }
        if self.srl_sigma.is_nan() || self.srl_sigma <= 0.0 {
            return Err(config_err("SRL sigma must be positive"));
        }
        Ok(())
    }
}

fn check(db: &FingerprintDatabase, query: &[f64], k: usize) -> Result<()> {
    if query.len() != db.feature_count() {
        return Err(shape_err(format!(
            "query has {} features, database {}",
            query.len(),
            db.feature_count()
        )));
    }
    if k == 0 || k > db.len() {
        return Err(config_err(format!("k = {k} outside 1..={}", db.len())));
    }
    Ok(())
}

fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean location of the `k` lowest-scoring RPs; ties go to the lower index.
fn top_k(db: &FingerprintDatabase, scores: &[f64], k: usize) -> Location {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let locs: Vec<Location> = idx[..k].iter().map(|&i| db.location(i)).collect();
    Location::centroid(&locs).expect("k >= 1")
}

/// Mean location of the `k` RPs whose mean fingerprint is closest to `query`
/// (imputed dBm).
pub fn radar_knn(db: &FingerprintDatabase, query: &[f64], k: usize) -> Result<Location> {
    check(db, query, k)?;
    let scores: Vec<f64> = db.mean_fingerprints().iter().map(|m| feature_distance(query, m)).collect();
    Ok(top_k(db, &scores, k))
}

/// KNN with each squared feature distance inflated by
/// `exp(|l_i - prev|^2 / (2 sigma^2))`, favouring RPs near the last estimate.
///
/// With the unsquared distance the penalty outweighs the fingerprint term
/// so strongly that the estimate stalls a few meters behind even a slow
/// walker and never recovers.
pub fn srl_knn(db: &FingerprintDatabase, query: &[f64], prev: Location, k: usize, sigma: f64) -> Result<Location> {
    check(db, query, k)?;
    // Ranked in log space so far-away RPs cannot overflow the penalty.
    let scores: Vec<f64> = db
        .mean_fingerprints()
        .iter()
        .zip(db.locations())
        .map(|(m, l)| 2.0 * feature_distance(query, m).ln() + l.distance_sq(&prev) / (2.0 * sigma * sigma))
        .collect();
    Ok(top_k(db, &scores, k))
}

/// SRL-KNN along a track, each estimate becoming the next `prev`. The first
/// `prev` is the known initial location (or the RADAR fix when unknown).
pub fn srl_knn_track(db: &FingerprintDatabase, track: &TestTrack, config: &KnnConfig) -> Result<Vec<Location>> {
    config.validate()?;
    let mut out = Vec::with_capacity(track.len());
    let mut prev = match track.points.first() {
        None => return Ok(out),
        Some(p) if track.initial_known => p.location,
        Some(p) => radar_knn(db, &p.query(), config.k)?,
    };
    for p in &track.points {
        let est = srl_knn(db, &p.query(), prev, config.k, config.srl_sigma)?;
        out.push(est);
        prev = est;
    }
    Ok(out)
}
