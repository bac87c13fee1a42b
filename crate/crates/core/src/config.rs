//! Top-level experiment configuration, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::dataset::{SyntheticEnvironment, UjiFilter};
use crate::error::{config_err, Error, Result};
use crate::eval::AmbiguityConfig;
use crate::seqmodels::ModelConfig;
use crate::trajgen::MotionModel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Synthetic,
    Uji,
}

/// UJIIndoorLoc input plus the row selection applied to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UjiSource {
    pub path: String,
    pub filter: UjiFilter,
    /// Length of the random-walk test track drawn over held-out RPs.
    pub track_points: usize,
}

impl Default for UjiSource {
    fn default() -> Self {
        Self {
            path: "UJIIndoorLoc/trainingData.csv".into(),
            filter: UjiFilter {
                buildings: Some(vec![0]),
                floors: None,
                phones: Some(vec![13, 14]),
                drop_undetected_waps: true,
            },
            track_points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Scans stored per reference point.
    pub scans_per_rp: usize,
    pub synthetic: SyntheticEnvironment,
    pub uji: UjiSource,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            scans_per_rp: 100,
            synthetic: SyntheticEnvironment::default(),
            uji: UjiSource::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Baselines run next to the sequence model by `eval`.
    pub baselines: Vec<String>,
    pub folds: usize,
    pub ambiguity: AmbiguityConfig,
    pub ambiguity_lengths: Vec<usize>,
    pub ambiguity_samples: usize,
    pub speeds: Vec<f64>,
    pub speed_points: usize,
    pub speed_repeats: usize,
    pub history_gammas: Vec<f64>,
    pub time_slots: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            baselines: ["radar", "kernel", "kalman", "srlknn", "mlp", "mlnn"]
                .map(String::from)
                .to_vec(),
            folds: 10,
            ambiguity: AmbiguityConfig::default(),
            ambiguity_lengths: vec![1, 2, 4, 8, 10],
            ambiguity_samples: 10_000,
            speeds: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            speed_points: 344,
            speed_repeats: 3,
            history_gammas: vec![0.0, 2.0, 4.0, 6.0],
            time_slots: 18,
        }
    }
}

pub const BASELINE_NAMES: [&str; 6] = ["radar", "kernel", "kalman", "srlknn", "mlp", "mlnn"];

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for b in &self.baselines {
            if !BASELINE_NAMES.contains(&b.as_str()) {
                return Err(config_err(format!(
                    "unknown baseline '{b}', expected one of {}",
                    BASELINE_NAMES.join(", ")
                )));
            }
        }
        if self.folds == 0 {
            return Err(config_err("folds must be at least 1"));
        }
        if self.ambiguity_lengths.contains(&0) {
            return Err(config_err("ambiguity lengths must be positive"));
        }
        if self.speeds.iter().any(|v| !(*v > 0.0)) {
            return Err(config_err("sweep speeds must be positive"));
        }
        if self.history_gammas.iter().any(|g| !(*g >= 0.0)) {
            return Err(config_err("history noise levels must be non-negative"));
        }
        self.ambiguity.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. [`ExperimentConfig::resolved`] copies it into every
    /// component that carries its own seed.
    pub seed: u64,
    pub output_dir: String,
    pub dataset: DatasetConfig,
    pub motion: MotionModel,
    pub model: ModelConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "out".into(),
            dataset: DatasetConfig::default(),
            motion: MotionModel::default(),
            model: ModelConfig::default(),
            baselines: BaselineConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset.scans_per_rp == 0 {
            return Err(config_err("scans_per_rp must be at least 1"));
        }
        if self.dataset.kind == DatasetKind::Synthetic {
            self.dataset.synthetic.validate()?;
        }
        self.motion.validate()?;
        self.model.validate()?;
        self.baselines.validate()?;
        self.eval.validate()
    }

    /// Copy of the config with the master seed pushed into every
    /// component seed, so a single `seed` key controls a whole run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.dataset.synthetic.seed = c.seed;
        c.model.seed = c.seed;
        c.baselines.mlp.seed = c.seed;
        c.baselines.mlnn.seed = c.seed;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| config_err(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}
