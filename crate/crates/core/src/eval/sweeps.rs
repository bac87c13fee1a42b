use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::report::{error_report, ErrorReport};
use super::pearson;
use crate::baselines::TrackLocalizer;
use crate::dataset::Polyline;
use crate::dataset::{FingerprintDatabase, SyntheticEnvironment, TestTrack};
use crate::error::{config_err, Result};
use crate::location::Location;
use crate::rng::{stream, substream, Rng, Stream};
use crate::seqmodels::SequenceModel;

/// Per-axis history perturbation; `gamma = sqrt(sigma_x^2 + sigma_y^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryNoise {
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl HistoryNoise {
    /// Splits `gamma` equally between the axes.
    pub fn from_gamma(gamma: f64) -> Self {
        let s = gamma / 2f64.sqrt();
        Self { sigma_x: s, sigma_y: s }
    }

    pub fn gamma(&self) -> f64 {
        self.sigma_x.hypot(self.sigma_y)
    }
}

/// Walks the environment's corridor back and forth; half of the steps
/// (chosen at random) move at `v_max`, the rest at a uniform lower speed.
pub fn speed_track(env: &SyntheticEnvironment, v_max: f64, points: usize, rng: &mut Rng) -> Result<TestTrack> {
    if v_max.is_nan() || v_max < 0.0 {
        return Err(config_err("maximum speed must be non-negative"));
    }
    let path = Polyline::new(env.track.waypoints.clone());
    let steps = points.saturating_sub(1);
    let mut fast = vec![false; steps];
    fast[..steps / 2].iter_mut().for_each(|f| *f = true);
    fast.shuffle(rng);
    let mut s = rng.random_range(0.0..2.0 * path.length().max(f64::MIN_POSITIVE));
    let mut locs = Vec::with_capacity(points);
    if points > 0 {
        locs.push(path.at(s));
    }
    for &f in &fast {
        let frac: f64 = if f { 1.0 } else { rng.random() };
        s += frac * v_max * env.track.delta_t;
        locs.push(path.at(s));
    }
    Ok(env.track_through(&locs, env.track.scans_per_point, rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedSweepRow {
    pub v_max: f64,
    /// Mean error per localizer, in the order given.
    pub mean_errors: Vec<f64>,
}

/// Mean error of each localizer on `repeats` speed tracks per `v_max`.
/// Repeat `r` reuses the same random numbers at every speed.
pub fn speed_sweep(
    env: &SyntheticEnvironment,
    localizers: &[&(dyn TrackLocalizer + Sync)],
    v_max_list: &[f64],
    points: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<SpeedSweepRow>> {
    let mut rows = Vec::with_capacity(v_max_list.len());
    for &v in v_max_list {
        let mut sums = vec![0.0; localizers.len()];
        for r in 0..repeats {
            let track = speed_track(env, v, points, &mut substream(seed, Stream::Sweep, r as u64))?;
            let truth = track.locations();
            for (sum, loc) in sums.iter_mut().zip(localizers) {
                *sum += error_report(&truth, &loc.localize_track(&track)?)?.mean;
            }
        }
        rows.push(SpeedSweepRow {
            v_max: v,
            mean_errors: sums.iter().map(|s| s / repeats.max(1) as f64).collect(),
        });
    }
    Ok(rows)
}

/// True previous locations (the first point uses itself) perturbed with
/// Gaussian noise of total magnitude `gamma`. The underlying normals depend
/// only on `seed`, so different `gamma` values share them.
pub fn noisy_history(track: &TestTrack, gamma: f64, seed: u64) -> Vec<Location> {
    let noise = HistoryNoise::from_gamma(gamma);
    let mut rng = stream(seed, Stream::History);
    let truth = track.locations();
    (0..truth.len())
        .map(|j| {
            let base = truth[j.saturating_sub(1)];
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            Location::new(base.x + noise.sigma_x * zx, base.y + noise.sigma_y * zy)
        })
        .collect()
}

/// Error reports of a location-channel model fed perturbed history.
pub fn history_noise_sweep(
    model: &SequenceModel,
    track: &TestTrack,
    gammas: &[f64],
    seed: u64,
) -> Result<Vec<(f64, ErrorReport)>> {
    if !model.wiring().has_location_channel() {
        return Err(config_err(format!("{} has no location channel", model.wiring())));
    }
    let truth = track.locations();
    gammas
        .iter()
        .map(|&g| {
            if g.is_nan() || g < 0.0 {
                return Err(config_err("history noise must be non-negative"));
            }
            let est = model.predict_track_with_history(track, &noisy_history(track, g, seed))?;
            Ok((g, error_report(&truth, &est)?))
        })
        .collect()
}

/// Mean correlation between freshly simulated scans along the test walk and
/// the stored mean fingerprint of the nearest RP, once per time slot.
pub fn time_slot_correlation(
    env: &SyntheticEnvironment,
    db: &FingerprintDatabase,
    slots: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let locs = env.track_locations();
    (0..slots)
        .map(|s| {
            let mut rng = substream(seed, Stream::TestNoise, s as u64 + 1);
            let mut sum = 0.0;
            let mut n = 0usize;
            for l in &locs {
                let scan = env.sample_scan(*l, &mut rng).imputed();
                let nearest = (0..db.len())
                    .min_by(|&a, &b| l.distance_sq(&db.location(a)).total_cmp(&l.distance_sq(&db.location(b))))
                    .ok_or_else(|| config_err("database is empty"))?;
                if let Ok(r) = pearson(&scan, db.mean_fingerprint(nearest)) {
                    sum += r;
                    n += 1;
                }
            }
            Ok(if n == 0 { 0.0 } else { sum / n as f64 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_synthetic;

    #[test]
    fn speed_track_shape() {
        let env = SyntheticEnvironment::default();
        let mut rng = stream(1, Stream::Sweep);
        let t = speed_track(&env, 2.0, 101, &mut rng).unwrap();
        assert_eq!(t.len(), 101);
        let steps: Vec<f64> = t.points.windows(2).map(|w| w[0].location.distance(&w[1].location)).collect();
        assert!(steps.iter().all(|&s| s <= 2.0 + 1e-9));
        // Corners shorten a few straight-line hops; most fast steps stay at 2 m.
        assert!(steps.iter().filter(|&&s| s > 2.0 - 1e-9).count() >= 40);
        let still = speed_track(&env, 0.0, 10, &mut rng).unwrap();
        assert!(still.max_step() == 0.0);
    }

    #[test]
    fn zero_gamma_is_true_history() {
        let env = SyntheticEnvironment::default();
        let (_, track) = generate_synthetic(&env, 1).unwrap();
        let h = noisy_history(&track, 0.0, 3);
        assert_eq!(h[0], track.points[0].location);
        assert_eq!(h[5], track.points[4].location);
        let a = noisy_history(&track, 2.0, 3);
        let b = noisy_history(&track, 4.0, 3);
        // Common random numbers: the larger gamma is the same draw scaled.
        for j in 0..track.len() {
            let base = h[j];
            assert!(((b[j].x - base.x) - 2.0 * (a[j].x - base.x)).abs() < 1e-12);
        }
        assert!((HistoryNoise::from_gamma(2.0).gamma() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slot_correlations_are_high() {
        let env = SyntheticEnvironment::default();
        let (db, _) = generate_synthetic(&env, 5).unwrap();
        let c = time_slot_correlation(&env, &db, 3, 0).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|&r| r > 0.7 && r <= 1.0), "{c:?}");
    }
}
