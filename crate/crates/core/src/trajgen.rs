//! Random-walk training trajectories over the reference-point grid.
//!
//! The next location is drawn from a Gaussian kernel centred on the current
//! one with spread `sigma = v_max * delta_t`, renormalized over the RP set,
//! by inverse-CDF lookup.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{pick_scan_index, FingerprintDatabase, TestTrack, TrackPoint};
use crate::error::{config_err, Result};
use crate::location::Location;
use crate::rng::{substream, Rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionModel {
    pub sigma: f64,
    pub delta_t: f64,
    pub v_max: f64,
    pub d_max: f64,
    /// Optional hard cutoff on step length; the Gaussian tail is kept when `None`.
    pub truncation_radius: Option<f64>,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self::new(2.0, 1.0, 2.0)
    }
}

impl MotionModel {
    /// `sigma` follows from the speed bound and sampling interval.
    pub fn new(v_max: f64, delta_t: f64, d_max: f64) -> Self {
        Self {
            sigma: v_max * delta_t,
            delta_t,
            v_max,
            d_max,
            truncation_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(config_err(format!("motion sigma must be positive, got {}", self.sigma)));
        }
        if ((self.v_max * self.delta_t) - self.sigma).abs() > 1e-9 * self.sigma.max(1.0) {
            return Err(config_err(format!(
                "sigma {} must equal v_max * delta_t = {}",
                self.sigma,
                self.v_max * self.delta_t
            )));
        }
        Ok(())
    }
}

/// Unnormalized weight of moving from `prev` to `next`.
pub fn transition_probability(next: Location, prev: Location, model: &MotionModel) -> Result<f64> {
    if !(model.sigma > 0.0) {
        return Err(config_err(format!("motion sigma must be positive, got {}", model.sigma)));
    }
    let d2 = next.distance_sq(&prev);
    if model.truncation_radius.is_some_and(|r| d2 > r * r) {
        return Ok(0.0);
    }
    Ok((-d2 / (2.0 * model.sigma * model.sigma)).exp())
}

/// Row-stochastic next-RP probabilities with per-row cumulative maps.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTable {
    m: usize,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl TransitionTable {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.m..(i + 1) * self.m]
    }

    pub fn cdf_row(&self, i: usize) -> &[f64] {
        &self.cdf[i * self.m..(i + 1) * self.m]
    }

    /// Inverse-CDF step: the first RP whose cumulative value reaches `r`.
    pub fn lookup(&self, current: usize, r: f64) -> usize {
        let row = self.cdf_row(current);
        row.partition_point(|&c| c < r).min(self.m - 1)
    }

    pub fn sample_next(&self, current: usize, rng: &mut Rng) -> usize {
        let r = loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                break r;
            }
        };
        self.lookup(current, r)
    }
}

pub fn build_transition_table(db: &FingerprintDatabase, model: &MotionModel) -> Result<TransitionTable> {
    model.validate()?;
    let m = db.len();
    let locs: Vec<Location> = db.locations().collect();
    let mut probs = vec![0.0; m * m];
    let mut cdf = vec![0.0; m * m];
    for i in 0..m {
        let row = &mut probs[i * m..(i + 1) * m];
        for (j, p) in row.iter_mut().enumerate() {
            *p = transition_probability(locs[j], locs[i], model)?;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
        let mut acc = 0.0;
        for (c, &p) in cdf[i * m..(i + 1) * m].iter_mut().zip(row.iter()) {
            acc += p;
            *c = acc.min(1.0);
        }
        cdf[(i + 1) * m - 1] = 1.0;
    }
    Ok(TransitionTable { m, probs, cdf })
}

/// `steps[t] = (rp index, scan index)`. `prior` is the RP visited just
/// before the first step, used as the known previous location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingTrajectory {
    pub prior: usize,
    pub steps: Vec<(usize, usize)>,
}

impl TrainingTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rps(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.0)
    }
}

const CHUNK: usize = 256;

fn walk(db: &FingerprintDatabase, table: &TransitionTable, t: usize, rng: &mut Rng) -> TrainingTrajectory {
    let start = rng.random_range(0..db.len());
    // The kernel is symmetric, so stepping once from the start gives a
    // plausible predecessor.
    let prior = table.sample_next(start, rng);
    let mut steps = Vec::with_capacity(t);
    let mut cur = start;
    for k in 0..t {
        if k > 0 {
            cur = table.sample_next(cur, rng);
        }
        steps.push((cur, pick_scan_index(db.rp(cur), rng)));
    }
    TrainingTrajectory { prior, steps }
}

/// `count` walks of length `t`. Walks are generated in fixed-size chunks,
/// each from its own sub-stream of `(seed, stream)`, so the output does not
/// depend on the number of worker threads.
pub fn generate_trajectories(
    db: &FingerprintDatabase,
    table: &TransitionTable,
    t: usize,
    count: usize,
    seed: u64,
    stream: Stream,
) -> Result<Vec<TrainingTrajectory>> {
    if t == 0 || count == 0 {
        return Err(config_err("trajectory length and count must be at least 1"));
    }
    if table.len() != db.len() {
        return Err(config_err("transition table does not match the database"));
    }
    let chunks = count.div_ceil(CHUNK);
    let out: Vec<Vec<TrainingTrajectory>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, stream, c as u64);
            let n = CHUNK.min(count - c * CHUNK);
            (0..n).map(|_| walk(db, table, t, &mut rng)).collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// A test track that walks the transition table from a uniform start, with
/// one stored scan of each visited RP per point.
pub fn walk_track(db: &FingerprintDatabase, table: &TransitionTable, points: usize, seed: u64) -> Result<TestTrack> {
    if table.len() != db.len() {
        return Err(config_err("transition table does not match the database"));
    }
    let mut rng = substream(seed, Stream::Track, 1);
    let mut cur = rng.random_range(0..db.len());
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        if k > 0 {
            cur = table.sample_next(cur, &mut rng);
        }
        let rp = db.rp(cur);
        out.push(TrackPoint {
            location: rp.location,
            scans: vec![rp.scans[pick_scan_index(rp, &mut rng)].clone()],
        });
    }
    TestTrack::new(out, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, Fingerprint, ReferencePoint, SyntheticEnvironment};
    use crate::rng::stream;

    fn line_db(xs: &[f64]) -> FingerprintDatabase {
        let rps = xs
            .iter()
            .map(|&x| ReferencePoint {
                location: Location::new(x, 0.0),
                scans: vec![Fingerprint::new(vec![Some(-50.0)]).unwrap()],
            })
            .collect();
        FingerprintDatabase::new(rps, 1, 1.0).unwrap()
    }

    #[test]
    fn weight_examples() {
        let m = MotionModel::new(2.0, 1.0, 2.0);
        let o = Location::new(1.0, 1.0);
        assert_eq!(transition_probability(o, o, &m).unwrap(), 1.0);
        let w = transition_probability(Location::new(3.0, 1.0), o, &m).unwrap();
        assert!((w - (-0.5f64).exp()).abs() < 1e-15);
        assert!((w - 0.6065).abs() < 1e-4);
        let a = transition_probability(Location::new(1.0, 3.0), o, &m).unwrap();
        assert_eq!(a, w);
        let bad = MotionModel { sigma: 0.0, ..m };
        assert!(transition_probability(o, o, &bad).is_err());
    }

    #[test]
    fn sigma_must_match_speed() {
        let mut m = MotionModel::new(1.5, 2.0, 2.0);
        assert_eq!(m.sigma, 3.0);
        m.sigma = 2.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn two_point_closed_form() {
        let d = 1.5;
        let db = line_db(&[0.0, d]);
        let m = MotionModel::new(2.0, 1.0, 2.0);
        let t = build_transition_table(&db, &m).unwrap();
        let w = (-d * d / 8.0f64).exp();
        let expect = [1.0 / (1.0 + w), w / (1.0 + w)];
        for (p, e) in t.row(0).iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(t.row(1)[0], t.row(0)[1]);
    }

    #[test]
    fn single_rp_walks_to_itself() {
        let db = line_db(&[0.0]);
        let t = build_transition_table(&db, &MotionModel::default()).unwrap();
        assert_eq!(t.row(0), &[1.0]);
        let mut rng = stream(1, Stream::Sweep);
        assert!((0..20).all(|_| t.sample_next(0, &mut rng) == 0));
    }

    #[test]
    fn low_r_picks_first_rp() {
        let db = line_db(&[0.0, 1.0, 2.0]);
        let t = build_transition_table(&db, &MotionModel::default()).unwrap();
        assert_eq!(t.lookup(1, 1e-12), 0);
        assert_eq!(t.lookup(1, t.cdf_row(1)[0]), 0);
        assert_eq!(t.lookup(1, 1.0), 2);
    }

    #[test]
    fn rows_stochastic_and_cdf_monotone() {
        let (db, _) = generate_synthetic(&SyntheticEnvironment::default(), 1).unwrap();
        let t = build_transition_table(&db, &MotionModel::default()).unwrap();
        for i in 0..t.len() {
            let s: f64 = t.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            let c = t.cdf_row(i);
            assert!(c.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*c.last().unwrap(), 1.0);
            // Self-transition is the row maximum.
            let max = t.row(i).iter().cloned().fold(0.0, f64::max);
            assert_eq!(t.row(i)[i], max);
        }
        assert_eq!(t, build_transition_table(&db, &MotionModel::default()).unwrap());
    }

    #[test]
    fn trajectories_deterministic_and_local() {
        let (db, _) = generate_synthetic(&SyntheticEnvironment::default(), 4).unwrap();
        let model = MotionModel::default();
        let t = build_transition_table(&db, &model).unwrap();
        let a = generate_trajectories(&db, &t, 10, 600, 9, Stream::TrainTrajectories).unwrap();
        let b = generate_trajectories(&db, &t, 10, 600, 9, Stream::TrainTrajectories).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 600);
        let mut total = 0.0;
        let mut n = 0usize;
        for tr in &a {
            assert_eq!(tr.len(), 10);
            for w in tr.steps.windows(2) {
                total += db.location(w[0].0).distance(&db.location(w[1].0));
                n += 1;
            }
        }
        let mean_step = total / n as f64;
        assert!(mean_step < 2.0 * model.sigma, "{mean_step}");

        let one = generate_trajectories(&db, &t, 1, 50, 2, Stream::TrainTrajectories).unwrap();
        assert!(one.iter().all(|tr| tr.len() == 1));
        assert!(generate_trajectories(&db, &t, 0, 5, 2, Stream::TrainTrajectories).is_err());
    }
}
