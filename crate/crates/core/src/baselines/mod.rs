//! Reference localizers: RADAR KNN, SRL-KNN, a Gaussian-kernel
//! probabilistic method, a constant-velocity Kalman tracker over KNN fixes,
//! and memoryless dense networks (MLP, MLNN).

mod kalman;
mod kernel;
mod knn;
mod neural;

pub use kalman::{kalman_track, KalmanConfig, KalmanOutput, KalmanState};
pub use kernel::{kernel_localize, KernelConfig, KernelEstimate};
pub use knn::{radar_knn, srl_knn, srl_knn_track, KnnConfig};
pub use neural::{DenseConfig, DenseLocalizer};

use serde::{Deserialize, Serialize};

use crate::dataset::{FingerprintDatabase, TestTrack};
use crate::error::Result;
use crate::location::Location;
use crate::seqmodels::SequenceModel;

/// Anything that turns a test track into per-point estimates.
pub trait TrackLocalizer {
    fn name(&self) -> String;
    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>>;
}

/// Settings for every baseline, grouped as one config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub knn: KnnConfig,
    pub kernel: KernelConfig,
    pub kalman: KalmanConfig,
    pub mlp: DenseConfig,
    pub mlnn: DenseConfig,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.knn.validate()?;
        self.kernel.validate()?;
        self.kalman.validate()?;
        self.mlp.validate()?;
        self.mlnn.validate()
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            knn: KnnConfig::default(),
            kernel: KernelConfig::default(),
            kalman: KalmanConfig::default(),
            mlp: DenseConfig::mlp(),
            mlnn: DenseConfig::mlnn(),
        }
    }
}

impl Default for DenseConfig {
    fn default() -> Self {
        DenseConfig::mlp()
    }
}

pub struct RadarKnn<'a> {
    pub db: &'a FingerprintDatabase,
    pub k: usize,
}

impl TrackLocalizer for RadarKnn<'_> {
    fn name(&self) -> String {
        "RADAR".into()
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        track.points.iter().map(|p| radar_knn(self.db, &p.query(), self.k)).collect()
    }
}

pub struct SrlKnn<'a> {
    pub db: &'a FingerprintDatabase,
    pub config: KnnConfig,
}

impl TrackLocalizer for SrlKnn<'_> {
    fn name(&self) -> String {
        "SRL-KNN".into()
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        srl_knn_track(self.db, track, &self.config)
    }
}

pub struct KernelMethod<'a> {
    pub db: &'a FingerprintDatabase,
    pub config: KernelConfig,
}

impl TrackLocalizer for KernelMethod<'_> {
    fn name(&self) -> String {
        "Kernel".into()
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        track
            .points
            .iter()
            .map(|p| kernel_localize(self.db, &p.query(), self.config.bandwidth).map(|e| e.location))
            .collect()
    }
}

pub struct KalmanTracker<'a> {
    pub db: &'a FingerprintDatabase,
    pub k: usize,
    pub config: KalmanConfig,
}

impl TrackLocalizer for KalmanTracker<'_> {
    fn name(&self) -> String {
        "Kalman".into()
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        kalman_track(self.db, track, self.k, &self.config).map(|o| o.locations)
    }
}

impl TrackLocalizer for DenseLocalizer {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        track.points.iter().map(|p| self.localize(&p.query())).collect()
    }
}

impl TrackLocalizer for SequenceModel {
    fn name(&self) -> String {
        let c = &self.config;
        let cell = match c.cell {
            crate::nncore::CellKind::Vanilla => "RNN",
            crate::nncore::CellKind::Lstm => "LSTM",
            crate::nncore::CellKind::Gru => "GRU",
        };
        format!("{} {}{}", c.wiring, if c.bidirectional { "Bi-" } else { "" }, cell)
    }

    fn localize_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        self.predict_track(track)
    }
}
