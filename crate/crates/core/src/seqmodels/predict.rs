//! Causal inference over a test track.
//!
//! The estimate for point `k` only uses points `..=k`. Windows reaching
//! before the start of the track are left-padded with the first fingerprint
//! and the known initial location. For multi-output wirings the estimate of
//! `k` averages the predictions made for `k` by the `T-1` windows that
//! contain it at positions `T-1, T-2, ..., 1`.

use std::collections::VecDeque;

use super::{sliding_window_average, SequenceModel, Wiring};
use crate::dataset::TestTrack;
use crate::error::{config_err, shape_err, Result};
use crate::filter::filter_features;
use crate::location::Location;
use crate::nncore::StackState;

fn with_loc(f: &[f64], loc: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(f.len() + 2);
    x.extend_from_slice(f);
    x.extend_from_slice(&loc[..2]);
    x
}

impl SequenceModel {
    /// Per-point estimates; previous estimates feed the location channel.
    pub fn predict_track(&self, track: &TestTrack) -> Result<Vec<Location>> {
        self.predict_inner(track, None)
    }

    /// Like [`predict_track`](Self::predict_track) but every location input
    /// is taken from `history`: `history[j]` is what the model is told about
    /// the location preceding point `j`.
    pub fn predict_track_with_history(&self, track: &TestTrack, history: &[Location]) -> Result<Vec<Location>> {
        if history.len() != track.len() {
            return Err(shape_err(format!(
                "history has {} entries for {} track points",
                history.len(),
                track.len()
            )));
        }
        self.predict_inner(track, Some(history))
    }

    /// Filtered, normalized query features per track point.
    pub fn track_features(&self, track: &TestTrack) -> Result<Vec<Vec<f64>>> {
        let raw: Vec<Vec<f64>> = track
            .points
            .iter()
            .map(|p| {
                let q = p.query();
                if q.len() != self.feature_count {
                    return Err(shape_err(format!(
                        "model expects {} features, track has {}",
                        self.feature_count,
                        q.len()
                    )));
                }
                Ok(self.scaler.apply(&q))
            })
            .collect::<Result<_>>()?;
        Ok(filter_features(&self.config.filter, &raw))
    }

    fn predict_inner(&self, track: &TestTrack, history: Option<&[Location]>) -> Result<Vec<Location>> {
        if track.is_empty() {
            return Ok(Vec::new());
        }
        let wiring = self.config.wiring;
        if wiring.has_location_channel() && !track.initial_known && history.is_none() {
            return Err(config_err(format!("{wiring} needs a track with a known initial location")));
        }
        let feats = self.track_features(track)?;
        let init = self.frame.to_unit(track.initial_location().unwrap_or_default());
        let history: Option<Vec<[f64; 2]>> = history.map(|h| h.iter().map(|&l| self.frame.to_unit(l)).collect());
        if self.stack.is_causal() {
            self.predict_incremental(&feats, init, history.as_deref())
        } else {
            self.predict_windows(&feats, init, history.as_deref())
        }
    }

    /// Location input for virtual point `v` (negative = padding).
    fn loc_input(v: isize, init: [f64; 2], history: Option<&[[f64; 2]]>, est: &[[f64; 2]]) -> [f64; 2] {
        match history {
            Some(h) if v >= 0 => h[v as usize],
            None if v >= 1 => est[v as usize - 1],
            _ => init,
        }
    }

    /// Causal stacks: one live recurrent state per window start.
    pub(super) fn predict_incremental(
        &self,
        feats: &[Vec<f64>],
        init: [f64; 2],
        history: Option<&[[f64; 2]]>,
    ) -> Result<Vec<Location>> {
        let t_len = self.config.memory_length;
        let wiring = self.config.wiring;
        let pad = (t_len - 1) as isize;
        let mut windows: VecDeque<(StackState, Option<Vec<f64>>)> = VecDeque::with_capacity(t_len);
        let mut est: Vec<[f64; 2]> = Vec::with_capacity(feats.len());
        for v in -pad..feats.len() as isize {
            let f = &feats[v.max(0) as usize];
            let loc = Self::loc_input(v, init, history, &est);
            windows.push_back((self.stack.zero_state(), None));
            let mut outs = Vec::with_capacity(windows.len());
            for (state, last) in windows.iter_mut() {
                let x = match wiring {
                    Wiring::Miso | Wiring::Mimo => f.clone(),
                    Wiring::AMiso | Wiring::AMimo => with_loc(f, &loc),
                    Wiring::PMimo => match (&last, history) {
                        (Some(prev), None) => with_loc(f, prev),
                        _ => with_loc(f, &loc),
                    },
                };
                let o = self.stack.step(state, &x)?;
                *last = Some(o.clone());
                outs.push(o);
            }
            if v >= 0 {
                let unit = if !wiring.is_multi_output() || t_len == 1 {
                    [outs[0][0], outs[0][1]]
                } else {
                    let n = outs.len() - 1;
                    let (sx, sy) = outs[..n].iter().fold((0.0, 0.0), |a, o| (a.0 + o[0], a.1 + o[1]));
                    [sx / n as f64, sy / n as f64]
                };
                est.push(unit);
            }
            if windows.len() == t_len {
                windows.pop_front();
            }
        }
        Ok(est.iter().map(|u| self.frame.to_meters(u)).collect())
    }

    /// Bidirectional stacks: every window is rerun in full.
    pub(super) fn predict_windows(&self, feats: &[Vec<f64>], init: [f64; 2], history: Option<&[[f64; 2]]>) -> Result<Vec<Location>> {
        let t_len = self.config.memory_length;
        let wiring = self.config.wiring;
        let lens: Vec<usize> = if wiring.is_multi_output() && t_len > 1 {
            (2..=t_len).rev().collect()
        } else {
            vec![t_len]
        };
        let mut est: Vec<[f64; 2]> = Vec::with_capacity(feats.len());
        for k in 0..feats.len() as isize {
            let mut preds = Vec::with_capacity(lens.len());
            for &len in &lens {
                let start = k - len as isize + 1;
                let fs: Vec<&Vec<f64>> = (start..=k).map(|j| &feats[j.max(0) as usize]).collect();
                let locs: Vec<[f64; 2]> = (start..=k).map(|j| Self::loc_input(j, init, history, &est)).collect();
                let inputs: Vec<Vec<f64>> = match wiring {
                    Wiring::Miso | Wiring::Mimo => fs.iter().map(|f| f.to_vec()).collect(),
                    Wiring::AMiso | Wiring::AMimo => fs.iter().zip(&locs).map(|(f, l)| with_loc(f, l)).collect(),
                    Wiring::PMimo if history.is_some() => fs.iter().zip(&locs).map(|(f, l)| with_loc(f, l)).collect(),
                    Wiring::PMimo if self.stack.is_causal() => {
                        let tr = self.stack.forward_causal(
                            len,
                            |t, prev| match prev {
                                Some(o) if t > 0 => with_loc(fs[t], o),
                                _ => with_loc(fs[t], &locs[0]),
                            },
                            None,
                        )?;
                        (0..len).map(|t| tr.input(t).to_vec()).collect()
                    }
                    Wiring::PMimo => {
                        let first: Vec<Vec<f64>> = fs.iter().map(|f| with_loc(f, &locs[0])).collect();
                        let pass = self.stack.forward(&first, None)?;
                        (0..len)
                            .map(|t| {
                                let l = if t == 0 { &locs[0][..] } else { &pass.outputs[t - 1][..] };
                                with_loc(fs[t], l)
                            })
                            .collect()
                    }
                };
                let out = self.stack.forward(&inputs, None)?;
                preds.push(self.frame.to_meters(out.outputs.last().expect("window is nonempty")));
            }
            let p = sliding_window_average(&preds)?;
            est.push(self.frame.to_unit(p));
        }
        Ok(est.iter().map(|u| self.frame.to_meters(u)).collect())
    }
}
