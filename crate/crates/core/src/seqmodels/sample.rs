//! Per-trajectory inputs, forward wiring and loss.

use super::{SequenceModel, Wiring};
use crate::dataset::FingerprintDatabase;
use crate::error::{shape_err, Result};
use crate::filter::filter_features;
use crate::nncore::gradcheck::max_relative_error;
use crate::nncore::loss::grad_single;
use crate::nncore::{loss_single, LayerStack, Parameterized, Trace};
use crate::rng::Rng;
use crate::trajgen::TrainingTrajectory;

/// One training trajectory in network units.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Filtered, normalized features per step.
    pub features: Vec<Vec<f64>>,
    /// True previous location per step (step 0 uses the trajectory prior).
    pub prev: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
}

impl TrainingSample {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn with_loc(f: &[f64], loc: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(f.len() + 2);
    x.extend_from_slice(f);
    x.extend_from_slice(&loc[..2]);
    x
}

impl SequenceModel {
    pub fn sample(&self, db: &FingerprintDatabase, traj: &TrainingTrajectory) -> TrainingSample {
        let raw: Vec<Vec<f64>> = traj
            .steps
            .iter()
            .map(|&(rp, scan)| self.scaler.apply_fingerprint(&db.rp(rp).scans[scan]))
            .collect();
        let features = filter_features(&self.config.filter, &raw);
        let mut prev = Vec::with_capacity(traj.len());
        let mut last = traj.prior;
        for &(rp, _) in &traj.steps {
            prev.push(self.frame.to_unit(db.location(last)));
            last = rp;
        }
        let targets = traj.rps().map(|rp| self.frame.to_unit(db.location(rp))).collect();
        TrainingSample { features, prev, targets }
    }

    /// Forward pass over one sample with the wiring's location channel.
    pub(crate) fn run_sample(&self, stack: &LayerStack, s: &TrainingSample, dropout: Option<&mut Rng>) -> Result<Trace> {
        if s.features.len() != s.prev.len() || s.features.len() != s.targets.len() {
            return Err(shape_err("sample sequences differ in length"));
        }
        match self.config.wiring {
            Wiring::Miso | Wiring::Mimo => stack.forward(&s.features, dropout),
            Wiring::AMiso | Wiring::AMimo => {
                let inputs: Vec<Vec<f64>> = s.features.iter().zip(&s.prev).map(|(f, p)| with_loc(f, p)).collect();
                stack.forward(&inputs, dropout)
            }
            Wiring::PMimo if stack.is_causal() => stack.forward_causal(
                s.len(),
                |t, prev_out| match prev_out {
                    Some(o) if t > 0 => with_loc(&s.features[t], o),
                    _ => with_loc(&s.features[t], &s.prev[0]),
                },
                dropout,
            ),
            Wiring::PMimo => {
                // A bidirectional stack cannot feed back step by step, so a
                // first pass with only the known start supplies the history.
                let first: Vec<Vec<f64>> = s.features.iter().map(|f| with_loc(f, &s.prev[0])).collect();
                let pass = stack.forward(&first, None)?;
                let inputs: Vec<Vec<f64>> = (0..s.len())
                    .map(|t| {
                        let loc = if t == 0 { &s.prev[0][..] } else { &pass.outputs[t - 1][..] };
                        with_loc(&s.features[t], loc)
                    })
                    .collect();
                stack.forward(&inputs, dropout)
            }
        }
    }

    /// Loss in meters and its gradient with respect to every head output.
    pub(crate) fn loss_from_outputs(&self, outputs: &[Vec<f64>], targets: &[[f64; 2]]) -> (f64, Vec<Vec<f64>>) {
        let scale = self.frame.scale;
        let t_len = outputs.len();
        let mut d = vec![vec![0.0; 2]; t_len];
        let as_pair = |o: &[f64]| [o[0], o[1]];
        if self.config.wiring.is_multi_output() {
            let mut sum = 0.0;
            for t in 0..t_len {
                let p = as_pair(&outputs[t]);
                sum += scale * loss_single(p, targets[t]);
                let g = grad_single(p, targets[t]);
                d[t] = vec![scale * g[0] / t_len as f64, scale * g[1] / t_len as f64];
            }
            (sum / t_len as f64, d)
        } else {
            let last = t_len - 1;
            let p = as_pair(&outputs[last]);
            let g = grad_single(p, targets[last]);
            d[last] = vec![scale * g[0], scale * g[1]];
            (scale * loss_single(p, targets[last]), d)
        }
    }

    /// Loss and parameter gradient for one sample.
    pub fn loss_and_grad(&self, s: &TrainingSample, dropout: Option<&mut Rng>) -> Result<(f64, LayerStack)> {
        let trace = self.run_sample(&self.stack, s, dropout)?;
        let (loss, d) = self.loss_from_outputs(&trace.outputs, &s.targets);
        let mut g = self.stack.zeros_like();
        self.stack.backward(&trace, &d, &mut g);
        Ok((loss, g))
    }

    /// Loss of one sample without dropout.
    pub fn sample_loss(&self, s: &TrainingSample) -> Result<f64> {
        let trace = self.run_sample(&self.stack, s, None)?;
        Ok(self.loss_from_outputs(&trace.outputs, &s.targets).0)
    }

    /// Largest relative error between the analytic gradient and central
    /// differences with step `h`, dropout off. Fed-back locations are held at
    /// the values of the unperturbed pass, since they are treated as data.
    pub fn gradient_check(&self, s: &TrainingSample, h: f64) -> Result<f64> {
        let trace = self.run_sample(&self.stack, s, None)?;
        let inputs: Vec<Vec<f64>> = (0..trace.len()).map(|t| trace.input(t).to_vec()).collect();
        let (_, d) = self.loss_from_outputs(&trace.outputs, &s.targets);
        let mut g = self.stack.zeros_like();
        self.stack.backward(&trace, &d, &mut g);
        let loss = |p: &LayerStack| {
            let tr = p.forward(&inputs, None).expect("shapes fixed by the first pass");
            self.loss_from_outputs(&tr.outputs, &s.targets).0
        };
        Ok(max_relative_error(&self.stack, &g, loss, h))
    }
}
