use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use trajloc::config::ExperimentConfig;
use trajloc::rng::{derive_seed, Stream};
use trajloc::seqmodels::write_learning_curve;
use trajloc::{FingerprintDatabase, ModelConfig, SequenceModel};

use super::{create_dir, fold_dir, load_database, prepare, CURVE_FILE, MODEL_FILE};
use crate::error::CliResult;
use crate::manifest::{Manifest, RunRecord};

/// Epochs between intermediate checkpoints.
const CHECKPOINT_EVERY: usize = 10;

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Number of independently seeded models; `None` uses `eval.folds`.
    pub folds: Option<usize>,
    /// Continue from existing checkpoints instead of starting over.
    pub resume: bool,
    /// Print one line per epoch with its wall-clock time.
    pub verbose: bool,
}

/// Model seed of fold `k` out of `folds`. A single fold keeps the master seed.
pub fn fold_seed(seed: u64, k: usize, folds: usize) -> u64 {
    if folds == 1 {
        seed
    } else {
        derive_seed(seed, Stream::Fold, k as u64)
    }
}

/// Trains one model per fold on `data/database.csv`, writing
/// `out/fold_<k>/{model.json,curve.csv}`.
pub fn cmd_train(config: &ExperimentConfig, data: &Path, out: &Path, opts: &TrainOptions) -> CliResult<Manifest> {
    let cfg = prepare(config)?;
    let folds = opts.folds.unwrap_or(cfg.eval.folds).max(1);
    let (db_path, db) = load_database(data)?;
    create_dir(out)?;
    let mut rec = RunRecord::new("train");
    rec.input(data, &db_path)?;
    rec.extra("folds", folds);

    let finals: Vec<(usize, Option<f64>)> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let mut mc = cfg.model.clone();
            mc.seed = fold_seed(cfg.seed, k, folds);
            let m = train_fold(&db, &cfg, &mc, &fold_dir(out, k), k, opts)?;
            Ok((m.epochs_done, m.curve.last().and_then(|r| r.val_err)))
        })
        .collect::<CliResult<_>>()?;
    for (k, (epochs, val)) in finals.iter().enumerate() {
        match val {
            Some(v) => log::info!("fold {k}: {epochs} epochs, validation error {v:.4} m"),
            None => log::info!("fold {k}: {epochs} epochs"),
        }
    }
    rec.finish(out, &cfg)
}

fn train_fold(
    db: &FingerprintDatabase,
    cfg: &ExperimentConfig,
    mc: &ModelConfig,
    dir: &Path,
    k: usize,
    opts: &TrainOptions,
) -> CliResult<SequenceModel> {
    create_dir(dir)?;
    let ckpt = dir.join(MODEL_FILE);
    let mut model = if opts.resume && ckpt.is_file() {
        let m = SequenceModel::load(&ckpt)?;
        let same = ModelConfig {
            epochs: mc.epochs,
            ..m.config.clone()
        };
        if same != *mc {
            return Err(trajloc::Error::Config(format!(
                "{} was trained with a different model configuration",
                ckpt.display()
            ))
            .into());
        }
        log::info!("fold {k}: resuming after epoch {}", m.epochs_done);
        SequenceModel {
            config: mc.clone(),
            ..m
        }
    } else {
        SequenceModel::init(db, mc)?
    };
    model.check_database(db)?;
    let data = model.training_data(db, &cfg.motion)?;
    let total = mc.epochs;
    while model.epochs_done < total {
        let chunk = CHECKPOINT_EVERY.min(total - model.epochs_done);
        let mut tick = Instant::now();
        model.train_epochs(&data, chunk, |r| {
            if opts.verbose {
                let val = r.val_err.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                eprintln!(
                    "fold {k} epoch {}/{total}: train {:.4} m, val {val} m, {:.2} s",
                    r.epoch,
                    r.train_err,
                    tick.elapsed().as_secs_f64()
                );
            }
            tick = Instant::now();
        })?;
        model.save(&ckpt)?;
    }
    model.save(&ckpt)?;
    write_learning_curve(dir.join(CURVE_FILE), &model.curve)?;
    Ok(model)
}
