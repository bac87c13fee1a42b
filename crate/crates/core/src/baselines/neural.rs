//! Memoryless dense regressors from a single scan to a location.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureScaler, FingerprintDatabase};
use crate::error::{config_err, shape_err, Error, Result};
use crate::location::Location;
use crate::nncore::loss::grad_single;
use crate::nncore::{
    clip_global_norm, loss_single, Activation, Algorithm, FeedForward, OptimizerConfig, OptimizerState, Parameterized,
};
use crate::rng::{stream, substream, Stream};
use crate::seqmodels::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl DenseConfig {
    /// One hidden layer of 500 units.
    pub fn mlp() -> Self {
        Self {
            hidden: vec![500],
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.001,
            seed: 0,
        }
    }

    /// Three hidden layers of 200, 200 and 100 units.
    pub fn mlnn() -> Self {
        Self {
            hidden: vec![200, 200, 100],
            ..Self::mlp()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) || self.batch_size == 0 {
            return Err(config_err("hidden sizes and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(config_err("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLocalizer {
    pub label: String,
    pub net: FeedForward,
    pub frame: Frame,
    pub scaler: FeatureScaler,
}

impl DenseLocalizer {
    /// Fits the network on every stored scan of every RP.
    pub fn train(db: &FingerprintDatabase, config: &DenseConfig, label: &str) -> Result<Self> {
        config.validate()?;
        let frame = Frame::for_database(db);
        let scaler = FeatureScaler::fit(db);
        let mut samples: Vec<(Vec<f64>, [f64; 2])> = Vec::new();
        for rp in db.rps() {
            let y = frame.to_unit(rp.location);
            for s in &rp.scans {
                samples.push((scaler.apply_fingerprint(s), y));
            }
        }
        let mut net = FeedForward::init(
            db.feature_count(),
            &config.hidden,
            2,
            Activation::Relu,
            &mut stream(config.seed, Stream::Baseline),
        );
        let opt_cfg = OptimizerConfig {
            algorithm: Algorithm::Adam,
            learning_rate: config.learning_rate,
            clip_norm: 5.0,
        };
        let mut opt = OptimizerState::new(&opt_cfg, net.param_count());
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for e in 0..config.epochs {
            order.shuffle(&mut substream(config.seed, Stream::Baseline, e as u64 + 1));
            for chunk in order.chunks(config.batch_size) {
                let mut grad = net.zeros_like();
                for &i in chunk {
                    let (x, y) = &samples[i];
                    let acts = net.forward_trace(x);
                    let out = acts.last().expect("network has layers");
                    let g = grad_single([out[0], out[1]], *y);
                    net.backward(&acts, &[g[0] * frame.scale, g[1] * frame.scale], &mut grad);
                }
                grad.scale(1.0 / chunk.len() as f64);
                if !grad.all_finite() {
                    return Err(Error::Divergence {
                        epoch: e + 1,
                        msg: format!("{label} gradient is non-finite"),
                    });
                }
                clip_global_norm(&mut grad, 5.0);
                opt.update(&mut net, &grad);
            }
        }
        Ok(Self {
            label: label.to_string(),
            net,
            frame,
            scaler,
        })
    }

    /// Estimate from one query (imputed dBm).
    pub fn localize(&self, query: &[f64]) -> Result<Location> {
        if query.len() != self.net.input_size() {
            return Err(shape_err(format!(
                "{} expects {} features, got {}",
                self.label,
                self.net.input_size(),
                query.len()
            )));
        }
        let out = self.net.predict(&self.scaler.apply(query))?;
        Ok(self.frame.to_meters(&out))
    }

    /// Mean training error (m) over the database scans.
    pub fn training_error(&self, db: &FingerprintDatabase) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for rp in db.rps() {
            for s in &rp.scans {
                let l = self.localize(&s.imputed())?;
                sum += loss_single(l.into(), rp.location.into());
                n += 1;
            }
        }
        Ok(sum / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Fingerprint, ReferencePoint};

    #[test]
    fn single_rp_gives_constant_output() {
        let fp = Fingerprint::new(vec![Some(-45.0), None, Some(-80.0)]).unwrap();
        let at = Location::new(2.5, 7.0);
        let db = FingerprintDatabase::new(
            vec![ReferencePoint {
                location: at,
                scans: vec![fp.clone(); 4],
            }],
            3,
            1.0,
        )
        .unwrap();
        let cfg = DenseConfig {
            hidden: vec![8],
            epochs: 300,
            learning_rate: 0.01,
            ..DenseConfig::mlp()
        };
        let m = DenseLocalizer::train(&db, &cfg, "MLP").unwrap();
        assert!(m.localize(&fp.imputed()).unwrap().distance(&at) < 0.05);
        assert!(m.localize(&[0.0]).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(DenseConfig::mlp().hidden, vec![500]);
        assert_eq!(DenseConfig::mlnn().hidden, vec![200, 200, 100]);
    }
}
