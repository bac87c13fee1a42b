//! Mini-batch training with per-epoch random streams, so a resumed run is
//! indistinguishable from an uninterrupted one.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, SequenceModel, TrainingSample};
use crate::dataset::FingerprintDatabase;
use crate::error::{Error, Result};
use crate::nncore::{clip_global_norm, LayerStack, Parameterized};
use crate::rng::{substream, Stream};
use crate::trajgen::{build_transition_table, generate_trajectories, MotionModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss (m) over the epoch, dropout active.
    pub train_err: f64,
    /// Mean validation loss (m); absent when there is no validation split.
    pub val_err: Option<f64>,
}

/// Training and validation samples for a model.
pub struct TrainingData {
    pub train: Vec<TrainingSample>,
    pub validation: Vec<TrainingSample>,
}

impl SequenceModel {
    /// Generates the model's trajectories. Deterministic in the config seed.
    pub fn training_data(&self, db: &FingerprintDatabase, motion: &MotionModel) -> Result<TrainingData> {
        self.check_database(db)?;
        let table = build_transition_table(db, motion)?;
        let cfg = &self.config;
        let (n_train, n_val) = cfg.split();
        let t = cfg.memory_length;
        let make = |count, stream| -> Result<Vec<TrainingSample>> {
            if count == 0 {
                return Ok(Vec::new());
            }
            let trajs = generate_trajectories(db, &table, t, count, cfg.seed, stream)?;
            Ok(trajs.iter().map(|tr| self.sample(db, tr)).collect())
        };
        Ok(TrainingData {
            train: make(n_train, Stream::TrainTrajectories)?,
            validation: make(n_val, Stream::ValidationTrajectories)?,
        })
    }

    /// Runs `epochs` further epochs on `data`, calling `on_epoch` after each.
    pub fn train_epochs(
        &mut self,
        data: &TrainingData,
        epochs: usize,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<()> {
        for _ in 0..epochs {
            let rec = self.one_epoch(data)?;
            on_epoch(&rec);
            self.curve.push(rec);
        }
        Ok(())
    }

    fn one_epoch(&mut self, data: &TrainingData) -> Result<EpochRecord> {
        let e = self.epochs_done;
        let seed = self.config.seed;
        let n = data.train.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, Stream::Shuffle, e as u64));
        let use_dropout = self.stack.dropout > 0.0;
        let batch = self.config.batch_size;
        let mut total = 0.0;
        for (b, chunk) in order.chunks(batch).enumerate() {
            let this = &*self;
            let results: Vec<Result<(f64, LayerStack)>> = chunk
                .par_iter()
                .enumerate()
                .map(|(i, &idx)| {
                    let mut rng = substream(seed, Stream::Dropout, ((e as u64) << 32) | (b * batch + i) as u64);
                    this.loss_and_grad(&data.train[idx], use_dropout.then_some(&mut rng))
                })
                .collect();
            let mut grad = self.stack.zeros_like();
            let mut batch_loss = 0.0;
            for r in results {
                let (l, g) = r?;
                batch_loss += l;
                grad.add_scaled(&g, 1.0);
            }
            if !batch_loss.is_finite() || !grad.all_finite() {
                return Err(Error::Divergence {
                    epoch: e + 1,
                    msg: format!("non-finite loss in batch {b}"),
                });
            }
            total += batch_loss;
            grad.scale(1.0 / chunk.len() as f64);
            let clip = self.config.optimizer.clip_norm;
            if clip > 0.0 {
                clip_global_norm(&mut grad, clip);
            }
            self.optimizer.update(&mut self.stack, &grad);
        }
        if !self.stack.all_finite() {
            return Err(Error::Divergence {
                epoch: e + 1,
                msg: "parameters became non-finite".into(),
            });
        }
        self.epochs_done += 1;
        let val_err = if data.validation.is_empty() {
            None
        } else {
            Some(self.mean_loss(&data.validation)?)
        };
        Ok(EpochRecord {
            epoch: self.epochs_done,
            train_err: total / n as f64,
            val_err,
        })
    }

    /// Mean dropout-free loss over `samples`.
    pub fn mean_loss(&self, samples: &[TrainingSample]) -> Result<f64> {
        let losses: Vec<f64> = samples
            .par_iter()
            .map(|s| self.sample_loss(s))
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / samples.len().max(1) as f64)
    }
}

/// Builds, trains and returns a model for `db`.
pub fn train(
    db: &FingerprintDatabase,
    config: &ModelConfig,
    motion: &MotionModel,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<SequenceModel> {
    let mut model = SequenceModel::init(db, config)?;
    let data = model.training_data(db, motion)?;
    model.train_epochs(&data, config.epochs, on_epoch)?;
    Ok(model)
}
