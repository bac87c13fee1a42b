//! Stacked (optionally bidirectional) recurrent layers with a linear head.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::cell::{CellKind, CellParams, StepCache};
use super::dense::{Activation, Dense};
use super::dropout::apply_dropout;
use super::Parameterized;
use crate::error::{config_err, shape_err, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "direction", rename_all = "lowercase")]
pub enum RecurrentLayer {
    Uni { cell: CellParams },
    Bi { fwd: CellParams, bwd: CellParams },
}

impl RecurrentLayer {
    pub fn input_size(&self) -> usize {
        match self {
            RecurrentLayer::Uni { cell } => cell.input_size(),
            RecurrentLayer::Bi { fwd, .. } => fwd.input_size(),
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            RecurrentLayer::Uni { cell } => cell.hidden_size(),
            RecurrentLayer::Bi { fwd, bwd } => fwd.hidden_size() + bwd.hidden_size(),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            RecurrentLayer::Uni { cell } => cell.tensors(),
            RecurrentLayer::Bi { fwd, bwd } => {
                let mut t = fwd.tensors();
                t.extend(bwd.tensors());
                t
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            RecurrentLayer::Uni { cell } => cell.tensors_mut(),
            RecurrentLayer::Bi { fwd, bwd } => {
                let mut t = fwd.tensors_mut();
                t.extend(bwd.tensors_mut());
                t
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackSpec {
    pub kind: CellKind,
    pub bidirectional: bool,
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub outputs: usize,
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<RecurrentLayer>,
    pub head: Dense,
    /// Inverted-dropout rate on every recurrent layer's output.
    pub dropout: f64,
}

/// Recurrent state of every layer, for incremental inference.
#[derive(Clone, Debug)]
pub struct StackState {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, Default)]
struct LayerTrace {
    fwd: Vec<StepCache>,
    /// Backward-direction caches in processing order (index `s` is time `T-1-s`).
    bwd: Vec<StepCache>,
}

/// Cached activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    /// Dropout multipliers `[layer][t]`; empty when dropout was off.
    masks: Vec<Vec<Vec<f64>>>,
    head_in: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// The input vector that was fed at step `t`.
    pub fn input(&self, t: usize) -> &[f64] {
        &self.layers[0].fwd[t].x
    }
}

impl LayerStack {
    pub fn new(spec: &StackSpec, rng: &mut Rng) -> Result<Self> {
        if spec.layers == 0 || spec.hidden == 0 || spec.input == 0 || spec.outputs == 0 {
            return Err(config_err("layer count, hidden, input and output sizes must be positive"));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(config_err(format!("dropout {} outside [0, 1)", spec.dropout)));
        }
        let mut layers = Vec::with_capacity(spec.layers);
        let mut d = spec.input;
        for _ in 0..spec.layers {
            let layer = if spec.bidirectional {
                RecurrentLayer::Bi {
                    fwd: CellParams::init(spec.kind, d, spec.hidden, rng),
                    bwd: CellParams::init(spec.kind, d, spec.hidden, rng),
                }
            } else {
                RecurrentLayer::Uni {
                    cell: CellParams::init(spec.kind, d, spec.hidden, rng),
                }
            };
            d = layer.output_size();
            layers.push(layer);
        }
        let head = Dense::init(d, spec.outputs, Activation::Identity, rng);
        Ok(Self {
            layers,
            head,
            dropout: spec.dropout,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.head.output_size()
    }

    /// True when no layer looks at future inputs.
    pub fn is_causal(&self) -> bool {
        self.layers.iter().all(|l| matches!(l, RecurrentLayer::Uni { .. }))
    }

    /// Runs the whole sequence. Dropout is active iff `dropout_rng` is given.
    pub fn forward(&self, inputs: &[Vec<f64>], dropout_rng: Option<&mut Rng>) -> Result<Trace> {
        if self.is_causal() {
            return self.forward_causal(inputs.len(), |t, _| inputs[t].clone(), dropout_rng);
        }
        let t_len = inputs.len();
        for x in inputs {
            self.check_input(x)?;
        }
        let mut rng = dropout_rng;
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::new();
        let mut seq = inputs.to_vec();
        for layer in &self.layers {
            let mut lt = LayerTrace::default();
            let mut outs: Vec<Vec<f64>>;
            match layer {
                RecurrentLayer::Uni { cell } => {
                    lt.fwd = run_direction(cell, seq.iter());
                    outs = lt.fwd.iter().map(|c| c.h.clone()).collect();
                }
                RecurrentLayer::Bi { fwd, bwd } => {
                    lt.fwd = run_direction(fwd, seq.iter());
                    lt.bwd = run_direction(bwd, seq.iter().rev());
                    outs = (0..t_len)
                        .map(|t| [lt.fwd[t].h.as_slice(), &lt.bwd[t_len - 1 - t].h].concat())
                        .collect();
                }
            }
            if let Some(r) = rng.as_deref_mut() {
                let lm: Vec<Vec<f64>> = outs
                    .iter_mut()
                    .filter_map(|o| apply_dropout(o, self.dropout, r, true))
                    .collect();
                if !lm.is_empty() {
                    masks.push(lm);
                }
            }
            traces.push(lt);
            seq = outs;
        }
        let outputs = seq.iter().map(|a| self.head.forward(a)).collect();
        Ok(Trace {
            layers: traces,
            masks,
            head_in: seq,
            outputs,
        })
    }

    /// Step-by-step forward for causal stacks. `input_fn(t, prev_output)`
    /// builds the input of step `t`, given the head output of step `t-1`.
    pub fn forward_causal<F>(&self, t_len: usize, mut input_fn: F, dropout_rng: Option<&mut Rng>) -> Result<Trace>
    where
        F: FnMut(usize, Option<&[f64]>) -> Vec<f64>,
    {
        if !self.is_causal() {
            return Err(shape_err("step-by-step forward needs a unidirectional stack"));
        }
        let mut rng = dropout_rng;
        let n_layers = self.layers.len();
        let mut states: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.output_size()], vec![0.0; l.output_size()]))
            .collect();
        let mut traces = vec![LayerTrace::default(); n_layers];
        let mut masks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
        let mut head_in = Vec::with_capacity(t_len);
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x = input_fn(t, outputs.last().map(Vec::as_slice));
            self.check_input(&x)?;
            let mut a = x;
            for (l, layer) in self.layers.iter().enumerate() {
                let RecurrentLayer::Uni { cell } = layer else { unreachable!() };
                let cache = cell.forward(&a, &states[l].0, &states[l].1);
                states[l].0.copy_from_slice(&cache.h);
                if cell.kind == CellKind::Lstm {
                    states[l].1.copy_from_slice(&cache.c);
                }
                a = cache.h.clone();
                traces[l].fwd.push(cache);
                if let Some(r) = rng.as_deref_mut() {
                    if let Some(m) = apply_dropout(&mut a, self.dropout, r, true) {
                        masks[l].push(m);
                    }
                }
            }
            outputs.push(self.head.forward(&a));
            head_in.push(a);
        }
        if masks.iter().any(Vec::is_empty) {
            masks.clear();
        }
        Ok(Trace {
            layers: traces,
            masks,
            head_in,
            outputs,
        })
    }

    /// Backpropagation through time. `d_outputs[t]` is the loss gradient
    /// with respect to head output `t` (all-zero rows are skipped).
    /// Gradients accumulate into `grads`.
    pub fn backward(&self, trace: &Trace, d_outputs: &[Vec<f64>], grads: &mut LayerStack) {
        let t_len = trace.len();
        debug_assert_eq!(d_outputs.len(), t_len);
        let top = self.layers.last().map_or(0, RecurrentLayer::output_size);
        let mut d_seq = vec![vec![0.0; top]; t_len];
        for t in 0..t_len {
            if d_outputs[t].iter().any(|&v| v != 0.0) {
                self.head.backward(
                    &trace.head_in[t],
                    &trace.outputs[t],
                    &d_outputs[t],
                    &mut grads.head,
                    Some(&mut d_seq[t]),
                );
            }
        }
        for l in (0..self.layers.len()).rev() {
            if let Some(lm) = trace.masks.get(l) {
                for (d, m) in d_seq.iter_mut().zip(lm) {
                    d.iter_mut().zip(m).for_each(|(dv, mv)| *dv *= mv);
                }
            }
            let mut dx = if l > 0 {
                vec![vec![0.0; self.layers[l].input_size()]; t_len]
            } else {
                Vec::new()
            };
            let lt = &trace.layers[l];
            match (&self.layers[l], &mut grads.layers[l]) {
                (RecurrentLayer::Uni { cell }, RecurrentLayer::Uni { cell: g }) => {
                    bptt(cell, g, &lt.fwd, &d_seq, 0..cell.hidden_size(), |s| s, &mut dx);
                }
                (RecurrentLayer::Bi { fwd, bwd }, RecurrentLayer::Bi { fwd: gf, bwd: gb }) => {
                    let h = fwd.hidden_size();
                    bptt(fwd, gf, &lt.fwd, &d_seq, 0..h, |s| s, &mut dx);
                    bptt(bwd, gb, &lt.bwd, &d_seq, h..h + bwd.hidden_size(), |s| t_len - 1 - s, &mut dx);
                }
                _ => unreachable!("gradient container must mirror the stack"),
            }
            d_seq = dx;
        }
    }

    /// Fresh zero state for [`LayerStack::step`].
    pub fn zero_state(&self) -> StackState {
        StackState {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.output_size()], vec![0.0; l.output_size()]))
                .collect(),
        }
    }

    /// Inference-only single step of a causal stack.
    pub fn step(&self, state: &mut StackState, x: &[f64]) -> Result<Vec<f64>> {
        if !self.is_causal() {
            return Err(shape_err("single-step inference needs a unidirectional stack"));
        }
        self.check_input(x)?;
        let mut a = x.to_vec();
        for (layer, (h, c)) in self.layers.iter().zip(&mut state.layers) {
            let RecurrentLayer::Uni { cell } = layer else { unreachable!() };
            let cache = cell.forward(&a, h, c);
            h.copy_from_slice(&cache.h);
            if cell.kind == CellKind::Lstm {
                c.copy_from_slice(&cache.c);
            }
            a = cache.h;
        }
        Ok(self.head.forward(&a))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(shape_err(format!(
                "stack expects {} inputs per step, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(())
    }
}

impl Parameterized for LayerStack {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = self.layers.iter().flat_map(RecurrentLayer::tensors).collect();
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(RecurrentLayer::tensors_mut).collect();
        t.extend(self.head.tensors_mut());
        t
    }
}

fn run_direction<'a>(cell: &CellParams, seq: impl Iterator<Item = &'a Vec<f64>>) -> Vec<StepCache> {
    let hs = cell.hidden_size();
    let mut h = vec![0.0; hs];
    let mut c = vec![0.0; hs];
    let mut caches = Vec::new();
    for x in seq {
        let cache = cell.forward(x, &h, &c);
        h.copy_from_slice(&cache.h);
        if cell.kind == CellKind::Lstm {
            c.copy_from_slice(&cache.c);
        }
        caches.push(cache);
    }
    caches
}

/// BPTT for one direction. Cache `s` was computed at time `time_of(s)`;
/// its external hidden gradient is `d_seq[t][range]`.
fn bptt(
    cell: &CellParams,
    grads: &mut CellParams,
    caches: &[StepCache],
    d_seq: &[Vec<f64>],
    range: Range<usize>,
    time_of: impl Fn(usize) -> usize,
    dx: &mut [Vec<f64>],
) {
    let hs = cell.hidden_size();
    let mut dh = vec![0.0; hs];
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut dh_prev = vec![0.0; hs];
    let mut dc_prev = vec![0.0; hs];
    for s in (0..caches.len()).rev() {
        let t = time_of(s);
        for k in 0..hs {
            dh[k] = d_seq[t][range.start + k] + dh_next[k];
        }
        let dxt = dx.get_mut(t).map(Vec::as_mut_slice);
        cell.backward(&caches[s], &dh, &dc_next, grads, dxt, &mut dh_prev, &mut dc_prev);
        std::mem::swap(&mut dh_next, &mut dh_prev);
        std::mem::swap(&mut dc_next, &mut dc_prev);
    }
}

/// Forward pass of a bidirectional layer over a full sequence; returns the
/// per-step concatenation `[forward hidden, backward hidden]`.
pub fn bidirectional_sequence(fwd: &CellParams, bwd: &CellParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    for x in inputs {
        if x.len() != fwd.input_size() || x.len() != bwd.input_size() {
            return Err(shape_err("bidirectional input size mismatch"));
        }
    }
    let f = run_direction(fwd, inputs.iter());
    let b = run_direction(bwd, inputs.iter().rev());
    let n = inputs.len();
    Ok((0..n).map(|t| [f[t].h.as_slice(), &b[n - 1 - t].h].concat()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::gradcheck::max_relative_error;
    use crate::rng::{stream, Stream};

    fn spec(kind: CellKind, bidirectional: bool) -> StackSpec {
        StackSpec {
            kind,
            bidirectional,
            input: 3,
            hidden: 4,
            layers: 2,
            outputs: 2,
            dropout: 0.0,
        }
    }

    fn sum_sq(trace: &Trace, w: &[Vec<f64>]) -> f64 {
        trace
            .outputs
            .iter()
            .zip(w)
            .map(|(o, w)| o.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream(11, Stream::Init);
        let inputs: Vec<Vec<f64>> = (0..3).map(|t| vec![0.3 * t as f64, -0.5, 0.8 - 0.2 * t as f64]).collect();
        let weights: Vec<Vec<f64>> = vec![vec![0.7, -0.3], vec![0.0, 0.0], vec![1.1, 0.4]];
        for kind in [CellKind::Vanilla, CellKind::Lstm, CellKind::Gru] {
            for bi in [false, true] {
                let net = LayerStack::new(&spec(kind, bi), &mut rng).unwrap();
                let trace = net.forward(&inputs, None).unwrap();
                let mut g = net.zeros_like();
                net.backward(&trace, &weights, &mut g);
                let err = max_relative_error(
                    &net,
                    &g,
                    |n| sum_sq(&n.forward(&inputs, None).unwrap(), &weights),
                    1e-5,
                );
                assert!(err < 1e-6, "{kind:?} bi={bi}: {err}");
            }
        }
    }

    #[test]
    fn dropout_gradients_with_fixed_masks() {
        let mut rng = stream(12, Stream::Init);
        let mut s = spec(CellKind::Lstm, false);
        s.dropout = 0.3;
        let net = LayerStack::new(&s, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..4).map(|t| vec![0.1 * t as f64, 0.2, -0.3]).collect();
        let w = vec![vec![1.0, 0.5]; 4];
        let run = |n: &LayerStack| {
            let mut r = stream(99, Stream::Dropout);
            n.forward(&inputs, Some(&mut r)).unwrap()
        };
        let trace = run(&net);
        let mut g = net.zeros_like();
        net.backward(&trace, &w, &mut g);
        let err = max_relative_error(&net, &g, |n| sum_sq(&run(n), &w), 1e-5);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn causal_prefix_is_stable() {
        let mut rng = stream(13, Stream::Init);
        let net = LayerStack::new(&spec(CellKind::Gru, false), &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64 * 0.1, 1.0, -1.0]).collect();
        let full = net.forward(&inputs, None).unwrap();
        let part = net.forward(&inputs[..3], None).unwrap();
        assert_eq!(&full.outputs[..3], &part.outputs[..]);
        let mut st = net.zero_state();
        for (x, o) in inputs.iter().zip(&full.outputs) {
            assert_eq!(&net.step(&mut st, x).unwrap(), o);
        }
    }

    #[test]
    fn palindrome_gives_swapped_reversal() {
        let mut rng = stream(14, Stream::Init);
        let cell = CellParams::init(CellKind::Lstm, 2, 3, &mut rng);
        let seq: Vec<Vec<f64>> = [[0.1, 0.4], [-0.3, 0.2], [0.9, -0.7], [-0.3, 0.2], [0.1, 0.4]]
            .iter()
            .map(|v| v.to_vec())
            .collect();
        let out = bidirectional_sequence(&cell, &cell, &seq).unwrap();
        let n = out.len();
        for t in 0..n {
            let mirrored = &out[n - 1 - t];
            let swapped = [&mirrored[3..], &mirrored[..3]].concat();
            for (a, b) in out[t].iter().zip(&swapped) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_input_zero_state_zero_output() {
        let cell = CellParams::zeros(CellKind::Gru, 2, 3);
        let out = bidirectional_sequence(&cell, &cell, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(out, vec![vec![0.0; 6]]);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = stream(15, Stream::Init);
        let net = LayerStack::new(&spec(CellKind::Lstm, true), &mut rng).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: LayerStack = serde_json::from_str(&text).unwrap();
        assert_eq!(net, back);
    }
}
