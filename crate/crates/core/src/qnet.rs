//! Warm-up Q-network: a ReLU MLP trained by plain SGD on the squared TD
//! error against a periodically synced target copy.

use rand::Rng as _;
use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("input has {got} values, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("invalid sgd setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// `w[i * n_out + j]` connects input i to output j.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * self.n_out..(i + 1) * self.n_out];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

/// MLP parameters; hidden layers use ReLU, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetParams {
    pub layers: Vec<Layer>,
}

impl QNetParams {
    pub fn zeros(n_in: usize, hidden: &[usize], n_out: usize) -> Self {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(n_out);
        Self { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() }
    }

    /// Weights and biases uniform in ±1/sqrt(fan_in).
    pub fn init(n_in: usize, hidden: &[usize], n_out: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(n_in, hidden, n_out);
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.n_in as f64).sqrt();
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            if idx < l.w.len() {
                return &mut l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return &mut l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    fn param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.n_in() {
            return Err(NetError::ShapeMismatch { expected: self.n_in(), got: x.len() });
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if li < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Pre-activations of every layer.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward(&cur, &mut z);
            cur = if li < last { z.iter().map(|v| v.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
        }
        pre
    }

    /// Flat binary record: magic, layer count and shapes (u64), then every
    /// weight and bias as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend((self.layers.len() as u64).to_le_bytes());
        for l in &self.layers {
            out.extend((l.n_in as u64).to_le_bytes());
            out.extend((l.n_out as u64).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.w.iter().chain(&l.b) {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let bad = |m: &str| NetError::BadCheckpoint(m.to_string());
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("missing magic"))?;
        let mut words = rest.chunks_exact(8).map(|c| c.try_into().unwrap());
        let mut next_u64 = || words.next().map(u64::from_le_bytes).ok_or_else(|| bad("truncated"));
        let n_layers = next_u64()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(bad("implausible layer count"));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            shapes.push((next_u64()? as usize, next_u64()? as usize));
        }
        if shapes.windows(2).any(|w| w[0].1 != w[1].0) {
            return Err(bad("layer shapes do not chain"));
        }
        let expected: usize = shapes.iter().map(|(i, o)| i * o + o).sum();
        let header = 8 * (1 + 2 * n_layers);
        if rest.len() != header + 8 * expected {
            return Err(bad("payload length does not match shapes"));
        }
        let mut floats = rest[header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut layers = Vec::with_capacity(n_layers);
        for (n_in, n_out) in shapes {
            let w: Vec<f64> = floats.by_ref().take(n_in * n_out).collect();
            let b: Vec<f64> = floats.by_ref().take(n_out).collect();
            if w.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(bad("non-finite parameter"));
            }
            layers.push(Layer { n_in, n_out, w, b });
        }
        Ok(Self { layers })
    }
}

const MAGIC: &[u8] = b"TABQLNET";

/// One TD sample in network-input form.
#[derive(Debug, Clone, PartialEq)]
pub struct TdSample {
    pub input: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_input: Vec<f64>,
    /// No bootstrap from the next state.
    pub terminal: bool,
}

fn td_target(target: &QNetParams, s: &TdSample, gamma: f64) -> f64 {
    if s.terminal {
        s.reward
    } else {
        let next = target.forward_unchecked(&s.next_input);
        s.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_batch(params: &QNetParams, batch: &[TdSample]) -> Result<(), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    for s in batch {
        for len in [s.input.len(), s.next_input.len()] {
            if len != params.n_in() {
                return Err(NetError::ShapeMismatch { expected: params.n_in(), got: len });
            }
        }
        if s.action >= params.n_out() {
            return Err(NetError::ShapeMismatch { expected: params.n_out(), got: s.action + 1 });
        }
    }
    Ok(())
}

/// Mean squared TD error over the batch.
pub fn td_loss(params: &QNetParams, target: &QNetParams, batch: &[TdSample], gamma: f64) -> Result<f64, NetError> {
    check_batch(params, batch)?;
    Ok(batch
        .iter()
        .map(|s| {
            let d = params.forward_unchecked(&s.input)[s.action] - td_target(target, s, gamma);
            d * d
        })
        .sum::<f64>()
        / batch.len() as f64)
}

/// Gradient of [`td_loss`] with respect to `params` (targets held fixed).
pub fn td_gradient(
    params: &QNetParams,
    target: &QNetParams,
    batch: &[TdSample],
    gamma: f64,
) -> Result<QNetParams, NetError> {
    check_batch(params, batch)?;
    Ok(loss_and_grad(params, target, batch, gamma).1)
}

fn loss_and_grad(params: &QNetParams, target: &QNetParams, batch: &[TdSample], gamma: f64) -> (f64, QNetParams) {
    let mut grad = QNetParams { layers: params.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect() };
    let n = batch.len() as f64;
    let last = params.layers.len() - 1;
    let mut loss = 0.0;
    for s in batch {
        let y = td_target(target, s, gamma);
        let pre = params.trace(&s.input);
        let delta = pre[last][s.action] - y;
        loss += delta * delta / n;
        let mut dout = vec![0.0; params.n_out()];
        dout[s.action] = 2.0 * delta / n;
        for li in (0..=last).rev() {
            let layer = &params.layers[li];
            let g = &mut grad.layers[li];
            let input: Vec<f64> =
                if li == 0 { s.input.clone() } else { pre[li - 1].iter().map(|v| v.max(0.0)).collect() };
            for (gb, d) in g.b.iter_mut().zip(&dout) {
                *gb += d;
            }
            let mut din = vec![0.0; layer.n_in];
            for (i, &xi) in input.iter().enumerate() {
                let row = i * layer.n_out..(i + 1) * layer.n_out;
                if xi != 0.0 {
                    for (gw, d) in g.w[row.clone()].iter_mut().zip(&dout) {
                        *gw += xi * d;
                    }
                }
                if li > 0 {
                    din[i] = layer.w[row].iter().zip(&dout).map(|(w, d)| w * d).sum();
                }
            }
            if li > 0 {
                // ReLU derivative of the previous layer's pre-activation
                for (d, z) in din.iter_mut().zip(&pre[li - 1]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
                dout = din;
            }
        }
    }
    (loss, grad)
}

/// One SGD step on the batch TD loss; returns the loss before the step.
pub fn td_update(
    params: &mut QNetParams,
    target: &QNetParams,
    batch: &[TdSample],
    gamma: f64,
    lr: f64,
) -> Result<f64, NetError> {
    check_batch(params, batch)?;
    let (loss, grad) = loss_and_grad(params, target, batch, gamma);
    for (l, g) in params.layers.iter_mut().zip(&grad.layers) {
        for (p, d) in l.w.iter_mut().zip(&g.w).chain(l.b.iter_mut().zip(&g.b)) {
            *p -= lr * d;
        }
    }
    Ok(loss)
}

fn relu_pattern(params: &QNetParams, batch: &[TdSample]) -> Vec<bool> {
    let hidden = params.layers.len() - 1;
    batch
        .iter()
        .flat_map(|s| {
            let pre = params.trace(&s.input);
            pre.into_iter().take(hidden).flatten().map(|z| z > 0.0).collect::<Vec<_>>()
        })
        .collect()
}

/// Maximum relative error between the analytic TD gradient and central
/// finite differences (h = 1e-5) over up to `n_probe` random parameters.
/// Parameters whose perturbation flips a ReLU are skipped, since the loss is
/// not differentiable there. `corrupt` flips the analytic gradient's sign
/// (negative control).
pub fn grad_check(
    params: &QNetParams,
    target: &QNetParams,
    batch: &[TdSample],
    gamma: f64,
    n_probe: usize,
    corrupt: bool,
    rng: &mut Rng,
) -> Result<f64, NetError> {
    const H: f64 = 1e-5;
    let mut analytic = td_gradient(params, target, batch, gamma)?;
    if corrupt {
        for l in &mut analytic.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = -*v);
        }
    }
    let base_pattern = relu_pattern(params, batch);
    let total = params.n_params();
    let probes = rand::seq::index::sample(rng, total, n_probe.min(total));
    let mut worst: f64 = 0.0;
    for idx in probes {
        let mut plus = params.clone();
        *plus.param_mut(idx) += H;
        let mut minus = params.clone();
        *minus.param_mut(idx) -= H;
        if relu_pattern(&plus, batch) != base_pattern || relu_pattern(&minus, batch) != base_pattern {
            continue;
        }
        let numeric = (td_loss(&plus, target, batch, gamma)? - td_loss(&minus, target, batch, gamma)?) / (2.0 * H);
        let a = analytic.param(idx);
        let scale = a.abs().max(numeric.abs());
        let err = if scale < 1e-10 { 0.0 } else { (a - numeric).abs() / scale.max(1e-6) };
        worst = worst.max(err);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    /// Linear from `start` to `end` over `decay_steps`, then constant.
    pub fn at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub target_sync: u64,
    pub epsilon: EpsilonSchedule,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 32,
            target_sync: 500,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, decay_steps: 10_000 },
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let e = &self.epsilon;
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.target_sync == 0 {
            return bad("batch size and target sync period must be positive".into());
        }
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || e.end > e.start {
            return bad(format!("epsilon schedule {} -> {} is not a decreasing probability", e.start, e.end));
        }
        if e.decay_steps == 0 {
            return bad("epsilon decay steps must be at least 1".into());
        }
        Ok(())
    }
}

/// With probability `epsilon` a uniform action, otherwise the argmax with
/// lowest-index tie-break. Always consumes one uniform draw for the coin.
pub fn epsilon_greedy(q: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    if u < epsilon {
        rng.gen_range(0..q.len())
    } else {
        crate::argmax(q)
    }
}
