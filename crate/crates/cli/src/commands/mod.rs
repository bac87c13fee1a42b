//! Subcommand implementations. Each takes a resolved config plus explicit
//! input and output directories, so tests can drive them in-process.

mod analysis;
mod evaluate;
mod gen;
mod train;

pub use analysis::{cmd_ambiguity, cmd_sweep};
pub use evaluate::{cmd_eval, EvalOutcome};
pub use gen::cmd_gen;
pub use train::{cmd_train, fold_seed, TrainOptions};

use std::fs;
use std::path::{Path, PathBuf};

use trajloc::config::ExperimentConfig;
use trajloc::dataset::{read_database, read_track};
use trajloc::{FingerprintDatabase, SequenceModel, TestTrack};

use crate::error::{CliError, CliResult, FileContext};

pub const DATABASE_FILE: &str = "database.csv";
pub const TRACK_FILE: &str = "track.csv";
pub const MODEL_FILE: &str = "model.json";
pub const CURVE_FILE: &str = "curve.csv";

pub(crate) fn prepare(config: &ExperimentConfig) -> CliResult<ExperimentConfig> {
    let c = config.resolved();
    c.validate()?;
    Ok(c)
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).at(dir)
}

pub(crate) fn require(path: PathBuf, producer: &'static str) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingInput(path, producer))
    }
}

pub(crate) fn load_database(data: &Path) -> CliResult<(PathBuf, FingerprintDatabase)> {
    let p = require(data.join(DATABASE_FILE), "trajloc gen")?;
    let db = read_database(&p)?;
    Ok((p, db))
}

pub(crate) fn load_track(data: &Path) -> CliResult<(PathBuf, TestTrack)> {
    let p = require(data.join(TRACK_FILE), "trajloc gen")?;
    let t = read_track(&p)?;
    Ok((p, t))
}

pub(crate) fn fold_dir(models: &Path, k: usize) -> PathBuf {
    models.join(format!("fold_{k}"))
}

/// Every `fold_<k>/model.json` under `models`, ordered by `k`.
pub(crate) fn load_models(models: &Path) -> CliResult<Vec<(PathBuf, SequenceModel)>> {
    let mut out = Vec::new();
    for k in 0.. {
        let p = fold_dir(models, k).join(MODEL_FILE);
        if !p.is_file() {
            break;
        }
        let m = SequenceModel::load(&p)?;
        out.push((p, m));
    }
    if out.is_empty() {
        return Err(CliError::MissingInput(fold_dir(models, 0).join(MODEL_FILE), "trajloc train"));
    }
    Ok(out)
}

/// File-name form of a method label: `P-MIMO LSTM` becomes `p-mimo_lstm`.
pub(crate) fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
