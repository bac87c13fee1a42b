use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_sd, pearson};
use crate::dataset::FingerprintDatabase;
use crate::error::{config_err, Result};
use crate::nncore::matrix::dot;
use crate::rng::Stream;
use crate::trajgen::{generate_trajectories, TransitionTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbiguityConfig {
    /// Correlation above which two fingerprints are confusable.
    pub threshold: f64,
    /// Derive the threshold from the database instead, see
    /// [`neighbour_threshold`].
    pub auto_threshold: bool,
    /// Locations closer than this are neighbours, not ambiguities.
    /// `None` uses the database grid size.
    pub grid_size: Option<f64>,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            auto_threshold: false,
            grid_size: None,
        }
    }
}

impl AmbiguityConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.auto_threshold && !(self.threshold > -1.0 && self.threshold < 1.0) {
            return Err(config_err("correlation threshold must lie in (-1, 1)"));
        }
        if matches!(self.grid_size, Some(g) if g.is_nan() || g <= 0.0) {
            return Err(config_err("ambiguity grid size must be positive"));
        }
        Ok(())
    }

    fn resolve(&self, db: &FingerprintDatabase) -> Result<(f64, f64)> {
        self.validate()?;
        let th = if self.auto_threshold {
            neighbour_threshold(db)?
        } else {
            self.threshold
        };
        Ok((th, self.grid_size.unwrap_or(db.grid_size())))
    }
}

/// Mean correlation between each RP's mean fingerprint and those of its
/// physically nearest RPs.
pub fn neighbour_threshold(db: &FingerprintDatabase) -> Result<f64> {
    let means = db.mean_fingerprints();
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..db.len() {
        let li = db.location(i);
        let nearest = (0..db.len())
            .filter(|&j| j != i)
            .map(|j| li.distance(&db.location(j)))
            .fold(f64::INFINITY, f64::min);
        for j in 0..db.len() {
            if j != i && li.distance(&db.location(j)) <= nearest * (1.0 + 1e-9) {
                if let Ok(r) = pearson(&means[i], &means[j]) {
                    sum += r;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        return Err(config_err("no neighbour correlations are defined"));
    }
    Ok(sum / n as f64)
}

/// For each RP, the number of RPs farther than the grid size whose mean
/// fingerprint correlates above the threshold.
pub fn count_ambiguous_points(db: &FingerprintDatabase, config: &AmbiguityConfig) -> Result<Vec<usize>> {
    let (th, grid) = config.resolve(db)?;
    let means = db.mean_fingerprints();
    Ok((0..db.len())
        .map(|i| {
            let li = db.location(i);
            (0..db.len())
                .filter(|&j| {
                    li.distance(&db.location(j)) > grid
                        && pearson(&means[i], &means[j]).is_ok_and(|r| r > th)
                })
                .count()
        })
        .collect())
}

/// Monte-Carlo estimate of the average number of ambiguous trajectories of
/// length `t`.
///
/// `samples` random walks are drawn and every pair is compared. A pair is
/// ambiguous when the walks never come within the grid size of each other
/// and the correlation of their concatenated mean fingerprints exceeds the
/// threshold. The ambiguous fraction of all pairs is scaled by the RP count,
/// so for `t = 1` the estimate targets the mean of
/// [`count_ambiguous_points`].
pub fn count_ambiguous_trajectories(
    db: &FingerprintDatabase,
    table: &TransitionTable,
    t: usize,
    samples: usize,
    config: &AmbiguityConfig,
    seed: u64,
) -> Result<f64> {
    let (th, grid) = config.resolve(db)?;
    if samples < 2 {
        return Err(config_err("at least two sample trajectories are needed"));
    }
    let trajs = generate_trajectories(db, table, t, samples, seed, Stream::Ambiguity)?;
    let means = db.mean_fingerprints();
    // Standardized concatenations; `None` marks a constant vector.
    let z: Vec<Option<Vec<f64>>> = trajs
        .iter()
        .map(|tr| {
            let cat: Vec<f64> = tr.rps().flat_map(|rp| means[rp].iter().copied()).collect();
            if cat.len() < 2 {
                return None;
            }
            let (m, sd) = mean_sd(&cat);
            (sd > 0.0).then(|| cat.iter().map(|v| (v - m) / sd).collect())
        })
        .collect();
    let locs: Vec<Vec<_>> = trajs.iter().map(|tr| tr.rps().map(|rp| db.location(rp)).collect()).collect();
    let len = z.iter().flatten().next().map_or(2, Vec::len);
    let denom = (len - 1) as f64;
    let grid_sq = grid * grid;
    let ambiguous: usize = (0..samples)
        .into_par_iter()
        .map(|i| {
            let Some(zi) = &z[i] else { return 0 };
            let mut count = 0;
            for j in i + 1..samples {
                let Some(zj) = &z[j] else { continue };
                if dot(zi, zj) / denom <= th {
                    continue;
                }
                let disjoint = locs[i]
                    .iter()
                    .all(|a| locs[j].iter().all(|b| a.distance_sq(b) > grid_sq));
                if disjoint {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let pairs = samples * (samples - 1) / 2;
    Ok(ambiguous as f64 / pairs as f64 * db.len() as f64)
}
