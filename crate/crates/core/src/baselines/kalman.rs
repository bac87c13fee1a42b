use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::knn::radar_knn;
use crate::dataset::{FingerprintDatabase, TestTrack};
use crate::error::{config_err, Result};
use crate::location::Location;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    pub delta_t: f64,
    /// White-noise acceleration spectral density (m^2/s^3).
    pub process_noise: f64,
    /// Variance of each coordinate of a KNN fix (m^2).
    pub measurement_noise: f64,
    /// Prior variance of each velocity component ((m/s)^2).
    pub initial_velocity_var: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            delta_t: 1.0,
            process_noise: 0.5,
            measurement_noise: 4.0,
            initial_velocity_var: 1.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(config_err("Kalman delta_t must be positive"));
        }
        if !ok(self.process_noise) || !ok(self.initial_velocity_var) || self.measurement_noise.is_nan() || self.measurement_noise < 0.0 {
            return Err(config_err("Kalman noise settings must be non-negative"));
        }
        Ok(())
    }
}

/// Constant-velocity state `(x, y, vx, vy)` and its covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanOutput {
    pub locations: Vec<Location>,
    /// Number of updates whose covariance had to be repaired.
    pub repairs: usize,
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_cov(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        m[(i, i)] = a * q;
        m[(i, i + 2)] = b * q;
        m[(i + 2, i)] = b * q;
        m[(i + 2, i + 2)] = c * q;
    }
    m
}

/// Symmetrizes `p` and clamps negative eigenvalues to zero. Returns whether
/// a clamp was needed.
fn repair_psd(p: &mut Matrix4<f64>) -> bool {
    *p = (*p + p.transpose()) * 0.5;
    let eig = p.symmetric_eigen();
    let tol = 1e-12 * eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().all(|&l| l >= -tol) {
        return false;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    *p = eig.eigenvectors * Matrix4::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    true
}

impl KalmanState {
    pub fn new(at: Location, pos_var: f64, vel_var: f64) -> Self {
        Self {
            x: Vector4::new(at.x, at.y, 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(pos_var, pos_var, vel_var, vel_var)),
        }
    }

    pub fn predict(&mut self, config: &KalmanConfig) {
        let f = transition(config.delta_t);
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + process_cov(config.delta_t, config.process_noise);
    }

    /// Joseph-form update with a position fix. Returns true if the
    /// covariance needed repair. Infinite measurement noise leaves the state
    /// untouched.
    pub fn update(&mut self, z: Location, r: f64) -> bool {
        if r.is_infinite() {
            return false;
        }
        let mut h = Matrix2x4::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        let rm = Matrix2::identity() * r;
        let s = h * self.p * h.transpose() + rm;
        let Some(s_inv) = s.try_inverse() else {
            return false;
        };
        let k = self.p * h.transpose() * s_inv;
        let innov = Vector2::new(z.x, z.y) - h * self.x;
        self.x += k * innov;
        let ikh = Matrix4::identity() - k * h;
        self.p = ikh * self.p * ikh.transpose() + k * rm * k.transpose();
        repair_psd(&mut self.p)
    }

    pub fn position(&self) -> Location {
        Location::new(self.x[0], self.x[1])
    }
}

/// Filters RADAR KNN fixes with a constant-velocity model. With a known
/// start the state begins there with zero position variance; otherwise it
/// begins at the first fix.
pub fn kalman_track(db: &FingerprintDatabase, track: &TestTrack, k: usize, config: &KalmanConfig) -> Result<KalmanOutput> {
    config.validate()?;
    let mut out = KalmanOutput {
        locations: Vec::with_capacity(track.len()),
        repairs: 0,
    };
    let mut state: Option<KalmanState> = None;
    for p in &track.points {
        let fix = radar_knn(db, &p.query(), k)?;
        let st = state.get_or_insert_with(|| {
            if track.initial_known {
                KalmanState::new(p.location, 0.0, config.initial_velocity_var)
            } else {
                KalmanState::new(fix, config.measurement_noise, config.initial_velocity_var)
            }
        });
        if !out.locations.is_empty() {
            st.predict(config);
        }
        if st.update(fix, config.measurement_noise) {
            out.repairs += 1;
        }
        out.locations.push(st.position());
    }
    if out.repairs > 0 {
        log::warn!("Kalman covariance repaired {} times", out.repairs);
    }
    Ok(out)
}
