//! The online Q-network: a fully connected ReLU perceptron with hand-written
//! forward and backward passes, trained by Adam on the importance-weighted
//! squared TD error of the taken action.

mod io;

pub use io::{QNET_MAGIC, QNET_VERSION};

use rand::Rng;

use crate::error::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Dense layer, weights stored row-major as `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + self.biases[o]);
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// One TD regression sample.
#[derive(Debug, Clone, Copy)]
pub struct TdSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
    pub weight: f64,
}

/// Parameter gradients laid out like [`QNetwork::params`].
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QNetDiagnostics {
    pub steps: u64,
    pub skipped_non_finite: u64,
    pub clipped: u64,
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

#[derive(Debug, Clone)]
pub struct QNetwork {
    layers: Vec<Layer>,
    adam: Adam,
    grad_clip_norm: f64,
    diagnostics: QNetDiagnostics,
}

impl QNetwork {
    /// All-zero network with the given layer widths.
    pub fn zeros(input_dim: usize, hidden: &[usize], actions: usize) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(actions);
        let layers: Vec<Layer> = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        let n: usize = layers.iter().map(Layer::param_count).sum();
        Self {
            layers,
            adam: Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
            grad_clip_norm: 10.0,
            diagnostics: QNetDiagnostics::default(),
        }
    }

    /// He-uniform initialised weights, zero biases.
    pub fn new<R: Rng>(input_dim: usize, hidden: &[usize], actions: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, hidden, actions);
        for layer in &mut net.layers {
            let bound = (6.0 / layer.in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    pub fn with_grad_clip(mut self, norm: f64) -> Self {
        self.grad_clip_norm = norm;
        self
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::DimensionMismatch {
                    expected: w[0].out_dim,
                    got: w[1].in_dim,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::Format("layer parameter block has wrong size".into()));
            }
        }
        let n: usize = layers.iter().map(Layer::param_count).sum();
        Ok(Self {
            layers,
            adam: Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
            grad_clip_norm: 10.0,
            diagnostics: QNetDiagnostics::default(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn action_count(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Layer widths from input to output.
    pub fn architecture(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn diagnostics(&self) -> QNetDiagnostics {
        self.diagnostics
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    /// Adds `c` to every output bias, shifting all Q-values equally.
    pub fn shift_outputs(&mut self, c: f64) {
        if let Some(last) = self.layers.last_mut() {
            for b in &mut last.biases {
                *b += c;
            }
        }
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: state.len(),
            });
        }
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("state contains NaN or infinity".into()));
        }
        Ok(())
    }

    /// Per-layer outputs; hidden outputs are post-ReLU, the last is linear.
    fn trace(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            let input = if i == 0 { state } else { &acts[i - 1] };
            layer.apply(input, &mut out);
            if i < last {
                for x in &mut out {
                    *x = x.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        Ok(self.trace(state).pop().unwrap_or_default())
    }

    /// Lowest-index argmax of `forward(state)`.
    pub fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(state)?))
    }

    pub fn epsilon_greedy_action<R: Rng>(
        &self,
        state: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if rng.gen::<f64>() < epsilon {
            Ok(rng.gen_range(0..self.action_count()))
        } else {
            self.greedy_action(state)
        }
    }

    /// Mean importance-weighted squared error `(1/n) Σ w (Y - Q(s,a))²` and
    /// its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[TdSample<'_>]) -> Result<(f64, Gradients)> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::Empty("TD batch"));
        }
        let mut grad = vec![0.0; self.param_count()];
        let offsets = self.param_offsets();
        let mut loss = 0.0;
        for s in batch {
            self.check_state(s.state)?;
            if s.action >= self.action_count() {
                return Err(Error::ActionOutOfRange {
                    action: s.action,
                    count: self.action_count(),
                });
            }
            let acts = self.trace(s.state);
            let q = acts.last().unwrap()[s.action];
            let err = s.target - q;
            loss += s.weight * err * err;
            if s.weight == 0.0 || err == 0.0 {
                continue;
            }
            // dL/dQ(s, a); other outputs receive no gradient.
            let mut delta = vec![0.0; self.action_count()];
            delta[s.action] = -2.0 * s.weight * err / n as f64;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input: &[f64] = if li == 0 { s.state } else { &acts[li - 1] };
                let (w_off, b_off) = offsets[li];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut grad[w_off + o * layer.in_dim..w_off + (o + 1) * layer.in_dim];
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                    grad[b_off + o] += d;
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU derivative of the previous layer's output.
                for (p, a) in prev.iter_mut().zip(&acts[li - 1]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss / n as f64, Gradients(grad)))
    }

    fn param_offsets(&self) -> Vec<(usize, usize)> {
        let mut k = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = k;
                let b = k + l.weights.len();
                k = b + l.biases.len();
                (w, b)
            })
            .collect()
    }

    /// One Adam step on the TD loss; returns the loss before the step.
    /// Zero gradients leave parameters and optimizer state untouched; a
    /// non-finite gradient skips the step and is counted.
    pub fn td_step(&mut self, batch: &[TdSample<'_>], lr: f64) -> Result<f64> {
        if batch.iter().any(|s| !s.target.is_finite() || !s.weight.is_finite()) {
            return Err(Error::NonFinite("TD target or weight".into()));
        }
        let (loss, mut grad) = self.loss_and_gradient(batch)?;
        let norm = grad.norm();
        if !norm.is_finite() || !loss.is_finite() {
            self.diagnostics.skipped_non_finite += 1;
            return Ok(loss);
        }
        if norm == 0.0 {
            return Ok(loss);
        }
        if norm > self.grad_clip_norm {
            let scale = self.grad_clip_norm / norm;
            grad.0.iter_mut().for_each(|g| *g *= scale);
            self.diagnostics.clipped += 1;
        }
        let mut params = self.params();
        let adam = &mut self.adam;
        adam.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(adam.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(adam.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(&grad.0)
            .zip(adam.m.iter_mut())
            .zip(adam.v.iter_mut())
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
        }
        if params.iter().any(|p| !p.is_finite()) {
            self.diagnostics.skipped_non_finite += 1;
            return Ok(loss);
        }
        self.set_params(&params);
        self.diagnostics.steps += 1;
        Ok(loss)
    }

    /// Copies parameters only; the optimizer state stays with `self`.
    pub fn frozen_copy(&self) -> Self {
        let mut copy = Self::from_layers(self.layers.clone()).expect("valid layers");
        copy.grad_clip_norm = self.grad_clip_norm;
        copy
    }
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
