//! Dense autoencoder trained by plain mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    #[inline]
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => (z > 0.0) as u8 as f64,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut rng::Rng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-a..=a)).collect(),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Writes pre-activations into `z` and activations into `out`.
    fn forward(&self, x: &[f64], z: &mut [f64], out: &mut [f64]) {
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut s = self.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                s += wi * xi;
            }
            z[o] = s;
            out[o] = self.activation.apply(s);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Hidden width; `min(64, 2d)` when unset.
    pub hidden: Option<usize>,
    /// Bottleneck width; `max(2, ceil(d / 4))` when unset.
    pub bottleneck: Option<usize>,
    pub hidden_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            hidden: None,
            bottleneck: None,
            hidden_activation: Activation::Relu,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 1337,
        }
    }
}

impl AeConfig {
    pub fn dims(&self, d: usize) -> [usize; 5] {
        let h = self.hidden.unwrap_or_else(|| (2 * d).min(64)).max(1);
        let k = self.bottleneck.unwrap_or_else(|| d.div_ceil(4).max(2));
        [d, h, k, h, d]
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::arg("autoencoder epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning_rate must be positive"));
        }
        if self.hidden == Some(0) || self.bottleneck == Some(0) {
            return Err(Error::arg("layer widths must be positive"));
        }
        Ok(())
    }
}

/// Learning rates at or below this are expected to decrease the epoch loss
/// monotonically; an increase is reported as a failed run.
pub const MONITORED_LR: f64 = 1e-3;
/// Relative slack allowed before a loss increase counts as a violation.
pub const MONITOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub dims: Vec<usize>,
    pub layers: Vec<Dense>,
    /// Full-data reconstruction MSE before training and after each epoch.
    pub loss_history: Vec<f64>,
}

/// Parameter gradients, shaped like the layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl AutoencoderModel {
    /// Glorot-initialized network with the given layer widths and one
    /// activation per layer.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 || dims.contains(&0) {
            return Err(Error::arg("layer dims and activations do not chain"));
        }
        let mut r = rng::stream(seed, &[rng::TAG_AE_INIT]);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Dense::glorot(w[0], w[1], a, &mut r))
            .collect();
        Ok(AutoencoderModel {
            dims: dims.to_vec(),
            layers,
            loss_history: Vec::new(),
        })
    }

    /// The standard `d -> h -> k -> h -> d` shape.
    pub fn for_config(d: usize, cfg: &AeConfig) -> Result<Self> {
        let act = cfg.hidden_activation;
        Self::init(&cfg.dims(d), &[act, Activation::Linear, act, Activation::Linear], cfg.seed)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.dims[self.layers.len() / 2]
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Pre-activations and activations of every layer for one row.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let mut z = vec![0.0; l.outputs];
            let mut a = vec![0.0; l.outputs];
            l.forward(acts.last().unwrap(), &mut z, &mut a);
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).1.pop().unwrap()
    }

    /// Mean squared reconstruction error over rows `idx` of `x`.
    pub fn loss_rows(&self, x: &Matrix, idx: impl Iterator<Item = usize>) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for r in idx {
            let row = x.row(r);
            let out = self.reconstruct(row);
            total += out.iter().zip(row).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
            n += 1;
        }
        total / (n.max(1) * x.cols.max(1)) as f64
    }

    pub fn loss(&self, x: &Matrix) -> f64 {
        self.loss_rows(x, 0..x.rows)
    }

    /// Loss and analytic gradients of the mean squared error over `rows`.
    pub fn gradients(&self, x: &Matrix, rows: &[usize]) -> (f64, Gradients) {
        let mut g = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let scale = 1.0 / (rows.len().max(1) * x.cols.max(1)) as f64;
        let mut loss = 0.0;
        for &r in rows {
            let row = x.row(r);
            let (zs, acts) = self.trace(row);
            let out = acts.last().unwrap();
            // dL/d(output activation)
            let mut delta: Vec<f64> = out
                .iter()
                .zip(row)
                .map(|(o, t)| {
                    loss += (o - t) * (o - t);
                    2.0 * (o - t) * scale
                })
                .collect();
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                for (d, &z) in delta.iter_mut().zip(&zs[li]) {
                    *d *= l.activation.grad(z);
                }
                let input = &acts[li];
                let gw = &mut g.weights[li];
                for o in 0..l.outputs {
                    g.bias[li][o] += delta[o];
                    let row_w = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    for (w, xi) in row_w.iter_mut().zip(input) {
                        *w += delta[o] * xi;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; l.inputs];
                    for o in 0..l.outputs {
                        let w = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                        for (p, wi) in prev.iter_mut().zip(w) {
                            *p += delta[o] * wi;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss * scale, g)
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (li, l) in self.layers.iter_mut().enumerate() {
            for (w, d) in l.weights.iter_mut().zip(&g.weights[li]) {
                *w -= lr * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias[li]) {
                *b -= lr * d;
            }
        }
    }

    /// Bottleneck activations (the embedding) for every row of `x`.
    pub fn embed(&self, x: &Matrix) -> Matrix {
        let depth = self.layers.len() / 2;
        let k = self.bottleneck_dim();
        let mut m = Matrix::zeros(x.rows, k);
        for r in 0..x.rows {
            let mut cur = x.row(r).to_vec();
            for l in &self.layers[..depth] {
                let mut z = vec![0.0; l.outputs];
                let mut a = vec![0.0; l.outputs];
                l.forward(&cur, &mut z, &mut a);
                cur = a;
            }
            m.data[r * k..(r + 1) * k].copy_from_slice(&cur);
        }
        m
    }

    fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for l in &mut self.layers {
            if i < l.weights.len() {
                return &mut l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return &mut l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }
}

/// Trains `model` in place on `x`; returns the per-epoch losses.
pub fn train(model: &mut AutoencoderModel, x: &Matrix, cfg: &AeConfig) -> Result<()> {
    cfg.validate()?;
    if x.cols != model.input_dim() {
        return Err(Error::data(format!("{} input columns for a {}-wide network", x.cols, model.input_dim())));
    }
    if x.rows == 0 {
        return Err(Error::data("no rows to train the autoencoder on"));
    }
    model.loss_history = vec![model.loss(x)];
    let mut order: Vec<usize> = (0..x.rows).collect();
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, &[rng::TAG_AE_SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut r);
        for batch in order.chunks(cfg.batch_size) {
            let (_, g) = model.gradients(x, batch);
            model.step(&g, cfg.learning_rate);
        }
        let loss = model.loss(x);
        let prev = *model.loss_history.last().unwrap();
        model.loss_history.push(loss);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("reconstruction loss became {loss}"),
            });
        }
        if cfg.learning_rate <= MONITORED_LR && loss > prev * (1.0 + MONITOR_SLACK) {
            return Err(Error::Diverged {
                epoch,
                detail: format!("epoch loss rose from {prev:.6e} to {loss:.6e} at learning rate {}", cfg.learning_rate),
            });
        }
    }
    Ok(())
}

/// Builds and trains the standard autoencoder on `x`.
pub fn train_autoencoder(x: &Matrix, cfg: &AeConfig) -> Result<AutoencoderModel> {
    cfg.validate()?;
    let mut model = AutoencoderModel::for_config(x.cols, cfg)?;
    train(&mut model, x, cfg)?;
    Ok(model)
}

/// Largest relative gap between analytic gradients and central finite
/// differences (step `1e-5`) over every parameter, on the rows of `x`.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`, so two vanishing
/// gradients count as agreement.
pub fn gradient_check(model: &AutoencoderModel, x: &Matrix) -> f64 {
    const STEP: f64 = 1e-5;
    let rows: Vec<usize> = (0..x.rows).collect();
    let (_, g) = model.gradients(x, &rows);
    let analytic: Vec<f64> = g
        .weights
        .iter()
        .zip(&g.bias)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
        .collect();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + STEP;
        let up = probe.loss(x);
        *probe.param_mut(i) = orig - STEP;
        let down = probe.loss(x);
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}
