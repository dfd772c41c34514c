//! A small dense autoencoder with hand-written backpropagation, trainable
//! under mean squared error or the Wiener loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::gradients::{ensure_step, grad_wiener_loss, summarize, GradientCheck, Stencil};
use crate::spectral::{make_window, LagFilter, LagGrid, Signal, WindowSpec};
use crate::wiener::{concentration, loss_filter, WienerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x tanh(softplus(x))`
    Mish,
    Tanh,
    Relu,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mish" => Ok(Self::Mish),
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

impl Activation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mish => "mish",
            Self::Tanh => "tanh",
            Self::Relu => "relu",
        }
    }

    pub fn code(&self) -> u32 {
        match self {
            Self::Mish => 0,
            Self::Tanh => 1,
            Self::Relu => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Self::Mish),
            1 => Ok(Self::Tanh),
            2 => Ok(Self::Relu),
            other => Err(Error::InvalidInput(format!(
                "unknown activation code {other}"
            ))),
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Mish => x * libm::tanh(softplus(x)),
            Self::Tanh => libm::tanh(x),
            Self::Relu => x.max(0.0),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Mish => {
                let t = libm::tanh(softplus(x));
                t + x * (1.0 - t * t) * sigmoid(x)
            }
            Self::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, a)| w * a).sum::<f64>());
        }
    }
}

/// Dense stack with a nonlinearity on every hidden layer and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAutoencoder {
    widths: Vec<usize>,
    layers: Vec<Dense>,
    activation: Activation,
}

impl DenseAutoencoder {
    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!(
                "need at least two positive layer widths, got {widths:?}"
            )));
        }
        Ok(())
    }

    /// All parameters zero.
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        Self::check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            activation,
        })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn random(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(widths, activation)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            let bound = 1.0 / libm::sqrt(layer.inputs as f64);
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn from_parameters(
        widths: &[usize],
        activation: Activation,
        params: &[f64],
    ) -> Result<Self> {
        let mut model = Self::zeros(widths, activation)?;
        model.set_parameters(params)?;
        Ok(model)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat parameters: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::Shape(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.num_parameters()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    fn forward_one(&self, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if i < last {
                a = z.iter().map(|&v| self.activation.apply(v)).collect();
            } else {
                a = z.clone();
            }
        }
        a
    }

    fn check_input(&self, s: &Signal) -> Result<()> {
        if s.len() != self.widths[0] {
            return Err(Error::Shape(format!(
                "input of {} values for a first layer of width {}",
                s.len(),
                self.widths[0]
            )));
        }
        Ok(())
    }
}

/// Reconstructions of a batch. Outputs take the input layout when the
/// output width matches it and are 1D otherwise.
pub fn forward(model: &DenseAutoencoder, batch: &[Signal]) -> Result<Vec<Signal>> {
    batch
        .iter()
        .map(|s| {
            model.check_input(s)?;
            let out = model.forward_one(s.data());
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite network output".into()));
            }
            if out.len() == s.len() {
                s.with_data(out)
            } else {
                let n = out.len();
                Signal::new(out, &[n])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Wiener,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "wiener" => Ok(Self::Wiener),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mse => "mse",
            Self::Wiener => "wiener",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub whitening: WindowSpec,
    pub wiener: WienerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Mse,
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            whitening: WindowSpec::laplace(4.0, 0.1),
            wiener: WienerConfig::with_lambda(1.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment decays must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        self.whitening.validate()?;
        self.wiener.validate()
    }
}

/// Loss of one reconstruction and its gradient with respect to it.
fn sample_loss(
    recon: &Signal,
    target: &Signal,
    cfg: &TrainConfig,
    whitening: Option<&LagFilter>,
) -> Result<(f64, Vec<f64>)> {
    match cfg.loss {
        LossKind::Mse => {
            let n = recon.len() as f64;
            let mut loss = 0.0;
            let grad = recon
                .data()
                .iter()
                .zip(target.data())
                .map(|(r, t)| {
                    loss += (r - t) * (r - t) / n;
                    2.0 * (r - t) / n
                })
                .collect();
            Ok((loss, grad))
        }
        LossKind::Wiener => {
            let w = whitening.expect("whitening window built for the Wiener loss");
            let r = grad_wiener_loss(recon, target, w, &cfg.wiener)?;
            Ok((r.value, r.grad.into_data()))
        }
    }
}

fn whitening_for(shape: &[usize], cfg: &TrainConfig) -> Result<Option<LagFilter>> {
    match cfg.loss {
        LossKind::Mse => Ok(None),
        LossKind::Wiener => Ok(Some(make_window(
            &cfg.whitening,
            &LagGrid::for_signal_shape(shape)?,
        )?)),
    }
}

/// Batch-mean reconstruction loss and its gradient with respect to every
/// parameter (flat, in [`DenseAutoencoder::parameters`] order).
pub fn loss_and_gradient(
    model: &DenseAutoencoder,
    batch: &[Signal],
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Config("empty batch".into()))?;
    let whitening = whitening_for(first.shape(), cfg)?;
    loss_and_gradient_with(model, batch, cfg, whitening.as_ref())
}

fn loss_and_gradient_with(
    model: &DenseAutoencoder,
    batch: &[Signal],
    cfg: &TrainConfig,
    whitening: Option<&LagFilter>,
) -> Result<(f64, Vec<f64>)> {
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let last = model.layers.len() - 1;
    let mut total = 0.0;

    for sample in batch {
        model.check_input(sample)?;
        if model.widths[last + 1] != sample.len() {
            return Err(Error::Shape(format!(
                "output width {} cannot reconstruct {} values",
                model.widths[last + 1],
                sample.len()
            )));
        }
        // activations[l] feeds layer l; pre[l] is layer l's affine output
        let mut activations = vec![sample.data().to_vec()];
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(model.layers.len());
        for (i, layer) in model.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward(&activations[i], &mut z);
            let a = if i < last {
                z.iter().map(|&v| model.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(a);
        }
        let recon = sample
            .with_data(activations[last + 1].clone())
            .map_err(|_| Error::Numerical("non-finite reconstruction".into()))?;
        let (loss, out_grad) = sample_loss(&recon, sample, cfg, whitening)?;
        total += loss * scale;

        let mut delta: Vec<f64> = out_grad.iter().map(|g| g * scale).collect();
        for i in (0..=last).rev() {
            let layer = &model.layers[i];
            let input = &activations[i];
            let (gw, gb) = &mut grads[i];
            for o in 0..layer.outputs {
                gb[o] += delta[o];
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += delta[o] * a;
                }
            }
            if i > 0 {
                let mut back = vec![0.0; layer.inputs];
                for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += w * d;
                    }
                }
                for (b, z) in back.iter_mut().zip(&pre[i - 1]) {
                    *b *= model.activation.derivative(*z);
                }
                delta = back;
            }
        }
    }

    let mut flat = Vec::with_capacity(model.num_parameters());
    for (gw, gb) in grads {
        flat.extend(gw);
        flat.extend(gb);
    }
    Ok((total, flat))
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(params: usize) -> Self {
        Self {
            first: vec![0.0; params],
            second: vec![0.0; params],
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.steps += 1;
        let c1 = 1.0 - libm::pow(cfg.beta1, self.steps as f64);
        let c2 = 1.0 - libm::pow(cfg.beta2, self.steps as f64);
        for i in 0..params.len() {
            self.first[i] = cfg.beta1 * self.first[i] + (1.0 - cfg.beta1) * grad[i];
            self.second[i] = cfg.beta2 * self.second[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m = self.first[i] / c1;
            let v = self.second[i] / c2;
            params[i] -= cfg.learning_rate * m / (libm::sqrt(v) + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub loss: f64,
    /// Mean reconstruction-target filter concentration after the epoch.
    pub concentration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Concentration of the untrained model.
    pub initial_concentration: f64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn final_concentration(&self) -> f64 {
        self.epochs
            .last()
            .map_or(self.initial_concentration, |e| e.concentration)
    }
}

/// Mean concentration of the filters matching each reconstruction to its
/// target, using the loss direction of `wiener`.
pub fn mean_concentration(
    model: &DenseAutoencoder,
    data: &[Signal],
    wiener: &WienerConfig,
) -> Result<f64> {
    let recon = forward(model, data)?;
    let mut total = 0.0;
    for (r, t) in recon.iter().zip(data) {
        total += concentration(&loss_filter(r, t, wiener)?)?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Mini-batch Adam training on reconstruction of `data`. Deterministic for a
/// fixed seed.
pub fn train(model: &mut DenseAutoencoder, data: &[Signal], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    let first = data
        .first()
        .ok_or_else(|| Error::Config("training data is empty".into()))?;
    let whitening = whitening_for(first.shape(), cfg)?;
    let mut log = TrainLog {
        initial_concentration: mean_concentration(model, data, &cfg.wiener)?,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len());

    for epoch in 1..=cfg.epochs {
        let in_epoch = |e: Error| match e {
            Error::Numerical(m) => Error::Numerical(format!(
                "{m} in epoch {epoch}; last finite epoch {}",
                epoch - 1
            )),
            other => other,
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Signal> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grad) =
                loss_and_gradient_with(model, &batch, cfg, whitening.as_ref()).map_err(in_epoch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss in epoch {epoch}; last finite epoch {}",
                    epoch - 1
                )));
            }
            loss_sum += loss;
            batches += 1;
            adam.step(&mut params, &grad, cfg);
            model.set_parameters(&params).map_err(|_| {
                Error::Numerical(format!(
                    "non-finite parameters in epoch {epoch}; last finite epoch {}",
                    epoch - 1
                ))
            })?;
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            concentration: mean_concentration(model, data, &cfg.wiener).map_err(in_epoch)?,
        });
    }
    Ok(log)
}

/// Central-difference check of every parameter gradient on one batch.
pub fn grad_check_model(
    model: &DenseAutoencoder,
    batch: &[Signal],
    cfg: &TrainConfig,
    h: f64,
) -> Result<GradientCheck> {
    grad_check_model_with(model, batch, cfg, h, Stencil::Central)
}

/// [`grad_check_model`] with a chosen stencil.
pub fn grad_check_model_with(
    model: &DenseAutoencoder,
    batch: &[Signal],
    cfg: &TrainConfig,
    h: f64,
    stencil: Stencil,
) -> Result<GradientCheck> {
    ensure_step(h)?;
    let (_, analytic) = loss_and_gradient(model, batch, cfg)?;
    let mut probe = model.clone();
    let base = model.parameters();
    let mut params = base.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        numeric.push(stencil.derivative(h, |d| {
            params[i] = base[i] + d;
            probe.set_parameters(&params)?;
            loss_and_gradient(&probe, batch, cfg).map(|r| r.0)
        })?);
        params[i] = base[i];
    }
    Ok(summarize(analytic, numeric))
}
