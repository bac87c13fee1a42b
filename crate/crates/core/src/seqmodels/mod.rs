//! The five recurrent wirings, their training loop and causal inference
//! over test tracks.
//!
//! | wiring | location channel (train) | location channel (test) | loss |
//! |--------|--------------------------|-------------------------|------|
//! | MISO   | none                     | none                    | last step |
//! | A-MISO | true previous location   | previous estimate       | last step |
//! | MIMO   | none                     | none                    | all steps |
//! | A-MIMO | true previous location   | previous estimate       | all steps |
//! | P-MIMO | own previous output      | own previous output     | all steps |

mod predict;
mod sample;
mod train;

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureScaler;
use crate::dataset::FingerprintDatabase;
use crate::error::{config_err, shape_err, Error, Result};
use crate::filter::FilterConfig;
use crate::location::Location;
use crate::nncore::{CellKind, LayerStack, OptimizerConfig, OptimizerState, Parameterized, StackSpec};
use crate::rng::{stream, Stream};

pub use sample::TrainingSample;
pub use train::{train, EpochRecord, TrainingData};

/// Recurrent cell family used by a model.
pub type CellType = CellKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wiring {
    #[serde(rename = "miso")]
    Miso,
    #[serde(rename = "a-miso")]
    AMiso,
    #[serde(rename = "mimo")]
    Mimo,
    #[serde(rename = "a-mimo")]
    AMimo,
    #[serde(rename = "p-mimo")]
    PMimo,
}

impl Wiring {
    pub const ALL: [Wiring; 5] = [Wiring::Miso, Wiring::AMiso, Wiring::Mimo, Wiring::AMimo, Wiring::PMimo];

    pub fn has_location_channel(self) -> bool {
        matches!(self, Wiring::AMiso | Wiring::AMimo | Wiring::PMimo)
    }

    /// True for wirings trained on every step and averaged at test time.
    pub fn is_multi_output(self) -> bool {
        matches!(self, Wiring::Mimo | Wiring::AMimo | Wiring::PMimo)
    }

    pub fn name(self) -> &'static str {
        match self {
            Wiring::Miso => "MISO",
            Wiring::AMiso => "A-MISO",
            Wiring::Mimo => "MIMO",
            Wiring::AMimo => "A-MIMO",
            Wiring::PMimo => "P-MIMO",
        }
    }
}

impl fmt::Display for Wiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wiring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        match key.to_ascii_lowercase().as_str() {
            "miso" => Ok(Wiring::Miso),
            "amiso" => Ok(Wiring::AMiso),
            "mimo" => Ok(Wiring::Mimo),
            "amimo" => Ok(Wiring::AMimo),
            "pmimo" => Ok(Wiring::PMimo),
            _ => Err(config_err(format!("unknown wiring `{s}`"))),
        }
    }
}

pub fn parse_cell(s: &str) -> Result<CellKind> {
    match s.to_ascii_lowercase().as_str() {
        "vanilla" | "rnn" => Ok(CellKind::Vanilla),
        "lstm" => Ok(CellKind::Lstm),
        "gru" => Ok(CellKind::Gru),
        _ => Err(config_err(format!("unknown cell `{s}`"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub wiring: Wiring,
    pub cell: CellKind,
    pub bidirectional: bool,
    /// Trajectory length T.
    pub memory_length: usize,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub optimizer: OptimizerConfig,
    pub trajectories: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub filter: FilterConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            wiring: Wiring::PMimo,
            cell: CellKind::Lstm,
            bidirectional: false,
            memory_length: 10,
            layers: 2,
            hidden: 100,
            dropout: 0.2,
            optimizer: OptimizerConfig::default(),
            trajectories: 10_000,
            epochs: 1000,
            batch_size: 32,
            validation_fraction: 0.1,
            filter: FilterConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_length == 0 {
            return Err(config_err("memory length T must be at least 1"));
        }
        if self.layers == 0 || self.hidden == 0 {
            return Err(config_err("layers and hidden size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config_err("dropout must lie in [0, 1)"));
        }
        if self.trajectories == 0 || self.batch_size == 0 {
            return Err(config_err("trajectory count and batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(config_err("validation fraction must lie in [0, 1)"));
        }
        self.optimizer.validate()?;
        self.filter.validate()
    }

    pub fn input_size(&self, features: usize) -> usize {
        features + if self.wiring.has_location_channel() { 2 } else { 0 }
    }

    /// `(training, validation)` trajectory counts.
    pub fn split(&self) -> (usize, usize) {
        let val = (self.trajectories as f64 * self.validation_fraction).round() as usize;
        let val = val.min(self.trajectories - 1);
        (self.trajectories - val, val)
    }
}

/// Affine map between meters and the network's unit coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Location,
    pub scale: f64,
}

impl Frame {
    pub fn for_database(db: &FingerprintDatabase) -> Self {
        let (lo, hi) = db.bounds();
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(db.grid_size());
        Self { origin: lo, scale: extent }
    }

    pub fn to_unit(&self, l: Location) -> [f64; 2] {
        [(l.x - self.origin.x) / self.scale, (l.y - self.origin.y) / self.scale]
    }

    pub fn to_meters(&self, u: &[f64]) -> Location {
        Location::new(self.origin.x + u[0] * self.scale, self.origin.y + u[1] * self.scale)
    }
}

/// A trained (or training) model plus everything needed to resume or run it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub stack: LayerStack,
    pub frame: Frame,
    pub scaler: FeatureScaler,
    pub feature_count: usize,
    pub optimizer: OptimizerState,
    pub epochs_done: usize,
    pub curve: Vec<EpochRecord>,
}

impl SequenceModel {
    /// Fresh, untrained model sized for `db`.
    pub fn init(db: &FingerprintDatabase, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let spec = StackSpec {
            kind: config.cell,
            bidirectional: config.bidirectional,
            input: config.input_size(db.feature_count()),
            hidden: config.hidden,
            layers: config.layers,
            outputs: 2,
            dropout: config.dropout,
        };
        let stack = LayerStack::new(&spec, &mut stream(config.seed, Stream::Init))?;
        let optimizer = OptimizerState::new(&config.optimizer, stack.param_count());
        Ok(Self {
            config: config.clone(),
            stack,
            frame: Frame::for_database(db),
            scaler: FeatureScaler::fit(db),
            feature_count: db.feature_count(),
            optimizer,
            epochs_done: 0,
            curve: Vec::new(),
        })
    }

    pub fn wiring(&self) -> Wiring {
        self.config.wiring
    }

    pub fn check_database(&self, db: &FingerprintDatabase) -> Result<()> {
        if db.feature_count() != self.feature_count {
            return Err(shape_err(format!(
                "model expects {} features, database has {}",
                self.feature_count,
                db.feature_count()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut f, self)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let m: Self = serde_json::from_reader(f)?;
        if m.stack.input_size() != m.config.input_size(m.feature_count) {
            return Err(shape_err("checkpoint network does not match its configuration"));
        }
        Ok(m)
    }
}

/// Component-wise mean of the predictions collected for one step.
pub fn sliding_window_average(window: &[Location]) -> Result<Location> {
    Location::centroid(window).ok_or_else(|| Error::EmptySelection("sliding window is empty".into()))
}

/// `epoch,train_err,val_err`, one row per recorded epoch.
pub fn write_learning_curve(path: impl AsRef<Path>, curve: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_err", "val_err"])?;
    for r in curve {
        let val = r.val_err.map_or_else(String::new, |v| v.to_string());
        w.write_record([r.epoch.to_string(), r.train_err.to_string(), val])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
