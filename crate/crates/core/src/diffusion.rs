//! Non-parametric Wiener diffusion: a dataset-defined energy sampled with
//! Langevin dynamics,
//!
//! ```text
//! E(x) = sum_i 1/2 R(T, v(x, y_i)) + gamma/2 (v_0(x, y_i) - 1)^2
//! x_{t+1} = x_t - alpha_t / 2 grad E(x_t) + z_t,   z_t ~ N(0, beta_t I)
//! ```

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gradients::{evaluate_energy, TermDiagnostics};
use crate::spectral::{LagFilter, Signal};
use crate::wiener::{PreparedSignal, WienerConfig, WienerEngine};

/// Defining samples, penalty window and scalars of the diffusion energy.
///
/// Filters are always `v(x, y_i) = wiener_filter(target = x, source = y_i)`;
/// the loss direction flag of the config is not consulted.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    samples: Vec<Signal>,
    prepared: Vec<PreparedSignal>,
    penalty: LagFilter,
    gamma: f64,
    wiener_cfg: WienerConfig,
    engine: WienerEngine,
}

impl EnergyModel {
    pub fn new(
        defining_samples: Vec<Signal>,
        penalty: LagFilter,
        gamma: f64,
        wiener_cfg: WienerConfig,
    ) -> Result<Self> {
        let first = defining_samples.first().ok_or_else(|| {
            Error::Config("energy model needs at least one defining sample".into())
        })?;
        if let Some(bad) = defining_samples.iter().position(|s| !s.same_layout(first)) {
            return Err(Error::Config(format!(
                "defining sample {bad} does not share the layout of sample 0"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be nonnegative, got {gamma}"
            )));
        }
        wiener_cfg.validate()?;
        let engine = WienerEngine::new(first.shape())?;
        penalty.ensure_window_for(engine.grid(), first.channels())?;
        let prepared = defining_samples
            .iter()
            .map(|s| engine.prepare(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples: defining_samples,
            prepared,
            penalty,
            gamma,
            wiener_cfg,
            engine,
        })
    }

    pub fn samples(&self) -> &[Signal] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn penalty(&self) -> &LagFilter {
        &self.penalty
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn wiener_cfg(&self) -> &WienerConfig {
        &self.wiener_cfg
    }

    /// The same model with a different amplitude weight.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be nonnegative, got {gamma}"
            )));
        }
        let mut m = self.clone();
        m.gamma = gamma;
        Ok(m)
    }

    pub(crate) fn engine(&self) -> &WienerEngine {
        &self.engine
    }

    pub(crate) fn prepared(&self) -> &[PreparedSignal] {
        &self.prepared
    }

    pub(crate) fn ensure_input(&self, x: &Signal) -> Result<()> {
        self.samples[0].ensure_same_layout(x)
    }

    /// Index of and Euclidean distance to the closest defining sample.
    pub fn nearest_sample(&self, x: &Signal) -> Result<(usize, f64)> {
        self.ensure_input(x)?;
        let mut best = (0, f64::INFINITY);
        for (i, y) in self.samples.iter().enumerate() {
            let d = libm::sqrt(x.distance_sq(y));
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }
}

/// Energy of `x`, summed over defining samples in dataset order.
pub fn energy(x: &Signal, model: &EnergyModel) -> Result<f64> {
    Ok(evaluate_energy(x, model, false)?.value)
}

/// Per-defining-sample energy terms and filter concentrations.
pub fn energy_terms(x: &Signal, model: &EnergyModel) -> Result<Vec<TermDiagnostics>> {
    Ok(evaluate_energy(x, model, false)?.terms)
}

/// Half-cosine interpolation from `start` (t = 0) to `end` (t = steps - 1).
pub fn cosine_schedule(steps: usize, start: f64, end: f64) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::Config(format!(
            "cosine schedule needs at least 2 steps, got {steps}"
        )));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|t| {
            if t == 0 {
                start
            } else if t == steps - 1 {
                end
            } else {
                end + (start - end) * 0.5 * (1.0 + libm::cos(PI * t as f64 / last))
            }
        })
        .collect())
}

/// Step sizes `alpha_t` and noise variances `beta_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Schedule {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::Config(format!(
                "schedule lengths differ or are empty: {} step sizes, {} variances",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        if beta.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::Config("noise variances must be nonnegative".into()));
        }
        Ok(Self { alpha, beta })
    }

    /// Cosine step sizes from `alpha.0` to `alpha.1` and variances from
    /// `beta.0` to `beta.1`.
    pub fn cosine(steps: usize, alpha: (f64, f64), beta: (f64, f64)) -> Result<Self> {
        Self::new(
            cosine_schedule(steps, alpha.0, alpha.1)?,
            cosine_schedule(steps, beta.0, beta.1)?,
        )
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

fn step_from_gradient<R: Rng + ?Sized>(
    x: &Signal,
    grad: &Signal,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Signal> {
    let sd = libm::sqrt(beta);
    let data = x
        .data()
        .iter()
        .zip(grad.data())
        .map(|(xi, gi)| {
            let noise = if beta > 0.0 {
                sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            xi - 0.5 * alpha * gi + noise
        })
        .collect();
    x.with_data(data)
        .map_err(|_| Error::Numerical("Langevin step produced a non-finite sample".into()))
}

/// One Langevin update of `x`.
pub fn langevin_step<R: Rng + ?Sized>(
    x: &Signal,
    model: &EnergyModel,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Signal> {
    if !(alpha > 0.0) || !(beta >= 0.0) {
        return Err(Error::Config(format!(
            "need alpha > 0 and beta >= 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let eval = evaluate_energy(x, model, true)?;
    step_from_gradient(
        x,
        eval.grad.as_ref().expect("gradient requested"),
        alpha,
        beta,
        rng,
    )
}

/// Logging options for a diffusion run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffusionOptions {
    /// Keep a snapshot every `snapshot_stride` steps (plus the final one).
    pub snapshot_stride: usize,
    /// Number of lowest-energy filters averaged in the concentration trace.
    pub nearest_k: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 10,
            nearest_k: 30,
        }
    }
}

/// Record of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Snapshots taken at `snapshot_steps`; always includes `x_0` and `x_T`.
    pub samples: Vec<Signal>,
    pub snapshot_steps: Vec<usize>,
    /// `E(x_t)` for `t = 0..=T`.
    pub energies: Vec<f64>,
    /// Mean concentration of the `nearest_k` lowest-energy filters, `t = 0..=T`.
    pub concentrations: Vec<f64>,
}

impl Trajectory {
    pub fn initial(&self) -> &Signal {
        &self.samples[0]
    }

    pub fn last(&self) -> &Signal {
        self.samples.last().expect("trajectory holds x_0")
    }
}

fn nearest_concentration(terms: &[TermDiagnostics], k: usize) -> f64 {
    let mut sorted: Vec<TermDiagnostics> = terms.to_vec();
    sorted.sort_by(|a, b| a.term.total_cmp(&b.term));
    let k = k.clamp(1, sorted.len());
    sorted[..k].iter().map(|t| t.concentration).sum::<f64>() / k as f64
}

/// Seeded generator of chain `chain`: the master seed selects the key, the
/// chain index selects the stream.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Runs a single chain from `x_0 ~ N(0, init_variance I)`.
pub fn run_chain(
    model: &EnergyModel,
    schedule: &Schedule,
    init_variance: f64,
    seed: u64,
    chain: u64,
    opts: &DiffusionOptions,
) -> Result<Trajectory> {
    if !(init_variance >= 0.0) || !init_variance.is_finite() {
        return Err(Error::Config(format!(
            "initial variance must be nonnegative, got {init_variance}"
        )));
    }
    if opts.snapshot_stride == 0 {
        return Err(Error::Config("snapshot stride must be positive".into()));
    }
    let mut rng = chain_rng(seed, chain);
    let template = &model.samples()[0];
    let sd = libm::sqrt(init_variance);
    let init = (0..template.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut x = template.with_data(init)?;

    let steps = schedule.steps();
    let mut traj = Trajectory {
        samples: Vec::with_capacity(steps / opts.snapshot_stride + 2),
        snapshot_steps: Vec::new(),
        energies: Vec::with_capacity(steps + 1),
        concentrations: Vec::with_capacity(steps + 1),
    };
    for t in 0..steps {
        if t % opts.snapshot_stride == 0 {
            traj.samples.push(x.clone());
            traj.snapshot_steps.push(t);
        }
        let eval = evaluate_energy(&x, model, true)?;
        traj.energies.push(eval.value);
        traj.concentrations
            .push(nearest_concentration(&eval.terms, opts.nearest_k));
        let grad = eval.grad.expect("gradient requested");
        x = step_from_gradient(&x, &grad, schedule.alpha[t], schedule.beta[t], &mut rng)?;
    }
    let last = evaluate_energy(&x, model, false)?;
    traj.energies.push(last.value);
    traj.concentrations
        .push(nearest_concentration(&last.terms, opts.nearest_k));
    traj.samples.push(x);
    traj.snapshot_steps.push(steps);
    Ok(traj)
}

/// Runs `n_samples` independent chains sequentially.
pub fn run_diffusion(
    model: &EnergyModel,
    schedule: &Schedule,
    n_samples: usize,
    init_variance: f64,
    seed: u64,
    opts: &DiffusionOptions,
) -> Result<Vec<Trajectory>> {
    if n_samples == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    (0..n_samples as u64)
        .map(|chain| run_chain(model, schedule, init_variance, seed, chain, opts))
        .collect()
}
