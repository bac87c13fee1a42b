//! Log-distance path-loss radio map with i.i.d. Gaussian shadowing.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Fingerprint, FingerprintDatabase, ReferencePoint, TestTrack, TrackPoint};
use crate::error::{config_err, Result};
use crate::location::Location;
use crate::rng::{stream, Rng, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub x: f64,
    pub y: f64,
    /// Whether the AP also contributes a 5 GHz feature.
    #[serde(default)]
    pub dual_band: bool,
}

impl AccessPoint {
    pub fn location(&self) -> Location {
        Location::new(self.x, self.y)
    }

    fn feature_count(&self) -> usize {
        if self.dual_band {
            2
        } else {
            1
        }
    }
}

/// Geometry and sampling rate of the synthetic test walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackSpec {
    pub waypoints: Vec<Location>,
    pub speed: f64,
    pub delta_t: f64,
    pub points: usize,
    pub scans_per_point: usize,
}

impl Default for TrackSpec {
    fn default() -> Self {
        // Three parallel corridors walked as a serpentine.
        Self {
            waypoints: vec![
                Location::new(1.5, 2.0),
                Location::new(19.5, 2.0),
                Location::new(19.5, 8.0),
                Location::new(1.5, 8.0),
                Location::new(1.5, 14.0),
                Location::new(19.5, 14.0),
            ],
            speed: 0.6,
            delta_t: 1.0,
            points: 175,
            scans_per_point: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticEnvironment {
    pub width: f64,
    pub height: f64,
    pub grid_size: f64,
    pub aps: Vec<AccessPoint>,
    pub path_loss_exponent: f64,
    /// Received power at 1 m on the 2.4 GHz band.
    pub ref_power_dbm: f64,
    /// Extra loss applied to 5 GHz features.
    pub band_offset_db: f64,
    pub shadowing_std_db: f64,
    /// Readings below this are reported as not detected.
    pub detection_floor_dbm: f64,
    pub seed: u64,
    pub track: TrackSpec,
}

impl Default for SyntheticEnvironment {
    fn default() -> Self {
        let ap = |x, y, dual_band| AccessPoint { x, y, dual_band };
        Self {
            width: 21.0,
            height: 16.0,
            grid_size: 1.0,
            aps: vec![
                ap(2.0, 2.5, true),
                ap(10.5, 1.0, true),
                ap(19.0, 4.0, true),
                ap(3.0, 13.5, true),
                ap(11.5, 8.5, true),
                ap(18.5, 14.5, false),
            ],
            path_loss_exponent: 3.0,
            ref_power_dbm: -40.0,
            band_offset_db: 6.0,
            shadowing_std_db: 3.0,
            detection_floor_dbm: -100.0,
            seed: 0,
            track: TrackSpec::default(),
        }
    }
}

impl SyntheticEnvironment {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(config_err("environment width and height must be positive"));
        }
        if !(self.grid_size > 0.0) {
            return Err(config_err("grid size must be positive"));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(config_err("shadowing std must be non-negative"));
        }
        if self.aps.is_empty() {
            return Err(config_err("at least one access point is required"));
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if !(0.0..=self.width).contains(&ap.x) || !(0.0..=self.height).contains(&ap.y) {
                return Err(config_err(format!(
                    "access point {i} at ({}, {}) lies outside [0, {}] x [0, {}]",
                    ap.x, ap.y, self.width, self.height
                )));
            }
        }
        if self.track.scans_per_point == 0 || self.track.scans_per_point > 2 {
            return Err(config_err("scans per test point must be 1 or 2"));
        }
        if self.track.waypoints.len() < 2 && self.track.points > 1 {
            return Err(config_err("test track needs at least two waypoints"));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.aps.iter().map(AccessPoint::feature_count).sum()
    }

    /// RP lattice: cell centres of a `grid_size` grid covering the area.
    pub fn grid(&self) -> Vec<Location> {
        let nx = (self.width / self.grid_size + 1e-9).floor() as usize;
        let ny = (self.height / self.grid_size + 1e-9).floor() as usize;
        let g = self.grid_size;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(Location::new((i as f64 + 0.5) * g, (j as f64 + 0.5) * g));
            }
        }
        out
    }

    /// Noise-free received power for every feature at `at`.
    pub fn mean_rssi(&self, at: Location) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_count());
        for ap in &self.aps {
            let d = ap.location().distance(&at).max(0.5);
            let base = self.ref_power_dbm - 10.0 * self.path_loss_exponent * d.log10();
            out.push(base);
            if ap.dual_band {
                out.push(base - self.band_offset_db);
            }
        }
        out
    }

    /// One noisy scan at `at`.
    pub fn sample_scan(&self, at: Location, rng: &mut Rng) -> Fingerprint {
        let values = self
            .mean_rssi(at)
            .into_iter()
            .map(|m| {
                let v = if self.shadowing_std_db > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    m + self.shadowing_std_db * z
                } else {
                    m
                };
                (v >= self.detection_floor_dbm)
                    .then(|| v.clamp(super::NOT_DETECTED_DBM, super::MAX_DBM))
            })
            .collect();
        Fingerprint::new(values).expect("clamped readings are in range")
    }

    /// A track through `locations` with fresh scans at each point.
    pub fn track_through(&self, locations: &[Location], scans: usize, rng: &mut Rng) -> TestTrack {
        let points = locations
            .iter()
            .map(|&l| TrackPoint {
                location: l,
                scans: (0..scans).map(|_| self.sample_scan(l, rng)).collect(),
            })
            .collect();
        TestTrack {
            points,
            initial_known: true,
        }
    }

    /// The configured corridor walk, one point every `speed * delta_t` meters.
    pub fn track_locations(&self) -> Vec<Location> {
        let path = Polyline::new(self.track.waypoints.clone());
        let step = self.track.speed * self.track.delta_t;
        (0..self.track.points)
            .map(|k| path.at(k as f64 * step))
            .collect()
    }
}

/// Piecewise-linear path walked back and forth by arc length.
#[derive(Clone, Debug)]
pub struct Polyline {
    pts: Vec<Location>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(pts: Vec<Location>) -> Self {
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + w[0].distance(&w[1]));
        }
        Self { pts, cum }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Position after walking `s` meters, reversing direction at each end.
    pub fn at(&self, s: f64) -> Location {
        let len = self.length();
        if self.pts.len() < 2 || len == 0.0 {
            return self.pts.first().copied().unwrap_or_default();
        }
        let mut s = s.rem_euclid(2.0 * len);
        if s > len {
            s = 2.0 * len - s;
        }
        let seg = self.cum.partition_point(|&c| c <= s).clamp(1, self.pts.len() - 1) - 1;
        let seg_len = self.cum[seg + 1] - self.cum[seg];
        let t = if seg_len > 0.0 { (s - self.cum[seg]) / seg_len } else { 0.0 };
        let (a, b) = (self.pts[seg], self.pts[seg + 1]);
        Location::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }
}

/// Builds the radio map on the environment's grid with `s1` scans per RP,
/// plus the configured test walk.
pub fn generate_synthetic(
    env: &SyntheticEnvironment,
    s1: usize,
) -> Result<(FingerprintDatabase, TestTrack)> {
    env.validate()?;
    if s1 == 0 {
        return Err(config_err("at least one scan per reference point is required"));
    }
    let mut rng = stream(env.seed, Stream::Dataset);
    let rps = env
        .grid()
        .into_iter()
        .map(|location| ReferencePoint {
            location,
            scans: (0..s1).map(|_| env.sample_scan(location, &mut rng)).collect(),
        })
        .collect();
    let db = FingerprintDatabase::new(rps, env.aps.len(), env.grid_size)?;
    let mut track_rng = stream(env.seed, Stream::TestNoise);
    let track = env.track_through(
        &env.track_locations(),
        env.track.scans_per_point,
        &mut track_rng,
    );
    Ok((db, track))
}
