//! Analytic gradients of the Wiener loss and the diffusion energy.
//!
//! # Chain rule through the Fourier ratio
//!
//! Let `F` be the unnormalized DFT on the padded grid, `F^-1 = F^H / N`, and
//! let a functional `L(v)` of a real filter `v = F^-1 vhat` have lag-domain
//! gradient `g` (in raw, uncentered layout) with spectrum `G = F g`. If the
//! filter spectrum responds to a real input `z` with spectrum `Z` as
//!
//! ```text
//! d vhat = P * conj(dZ) + Q * dZ        (elementwise)
//! ```
//!
//! then, because `F` is symmetric and `F^-1` is the conjugate adjoint of
//! `F / N`,
//!
//! ```text
//! dL/dz = Re F^-1[ conj(G) * P + G * conj(Q) ]
//! ```
//!
//! and the gradient with respect to the unpadded signal is the leading block
//! of that padded gradient (the adjoint of zero padding is cropping).
//!
//! * Varying target `X` with fixed source `S`: `vhat = (conj(S) X + l) / D`,
//!   `D = |S|^2 + l`, so `P = 0`, `Q = conj(S) / D` and the gradient spectrum
//!   is `G * S / D`. The filter is affine in the target, which makes the
//!   Wiener loss a convex quadratic in the prediction in this direction.
//! * Varying source `S` with fixed target `Y`: with `N = conj(S) Y + l`,
//!   `P = (Y D - S N) / D^2` and `Q = -conj(S) N / D^2`.
//!
//! The lag-domain gradients are `W^2 (v - delta)` for the Wiener loss and
//! `(T^2 v - R v) / |v|^2 + gamma (v_0 - 1) delta` for one term of the
//! diffusion energy (`R` the Rayleigh quotient).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::diffusion::EnergyModel;
use crate::error::{Error, Result};
use crate::spectral::{check_real, crop_plane, uncenter_plane, LagFilter, Signal};
use crate::wiener::{LossDirection, WienerConfig, WienerEngine, FILTER_RESIDUE_TOL};

/// A functional value together with its gradient with respect to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub grad: Signal,
    pub value: f64,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Raw-layout spectrum of a centered lag-domain gradient plane.
fn gradient_spectrum(engine: &WienerEngine, centered: &[f64]) -> Vec<Complex64> {
    let mut raw = vec![0.0; centered.len()];
    uncenter_plane(centered, &mut raw, engine.grid());
    engine.plan().forward_real(&raw)
}

/// Back from a padded gradient spectrum to the unpadded plane.
fn crop_gradient(engine: &WienerEngine, spectrum: &[Complex64], out: &mut [f64]) -> Result<()> {
    let (raw, residue) = engine.plan().inverse_real(spectrum);
    check_real(&raw, residue, FILTER_RESIDUE_TOL)?;
    crop_plane(&raw, engine.shape(), out);
    Ok(())
}

/// Gradient of the Wiener loss with respect to the prediction.
pub fn grad_wiener_loss(
    prediction: &Signal,
    target: &Signal,
    whitening: &LagFilter,
    cfg: &WienerConfig,
) -> Result<GradientResult> {
    prediction.ensure_same_layout(target)?;
    cfg.validate()?;
    let engine = WienerEngine::new(prediction.shape())?;
    whitening.ensure_window_for(engine.grid(), prediction.channels())?;
    let pred = engine.prepare(prediction)?;
    let targ = engine.prepare(target)?;

    let n = engine.grid().len();
    let z = engine.grid().zero_lag_flat();
    let lambda = cfg.lambda;
    let plane_len = prediction.plane_len();
    let mut grad = vec![0.0; prediction.len()];
    let mut value = 0.0;
    let mut v = vec![0.0; n];

    for c in 0..prediction.channels() {
        let p = pred.plane(c, n);
        let t = targ.plane(c, n);
        let spectrum = match cfg.direction {
            LossDirection::PredictionAsTarget => engine.ratio(p, t, lambda)?,
            LossDirection::PredictionAsSource => engine.ratio(t, p, lambda)?,
        };
        engine.centered_from_spectrum(&spectrum, &mut v)?;

        let w = whitening.window_plane(c);
        let mut g = vec![0.0; n];
        for i in 0..n {
            let d = if i == z { v[i] - 1.0 } else { v[i] };
            let w2 = w[i] * w[i];
            value += 0.5 * w2 * d * d;
            g[i] = w2 * d;
        }
        let gs = gradient_spectrum(&engine, &g);

        let grad_spec: Vec<Complex64> = match cfg.direction {
            LossDirection::PredictionAsTarget => gs
                .iter()
                .zip(t)
                .map(|(g, s)| g * s / (s.norm_sqr() + lambda))
                .collect(),
            LossDirection::PredictionAsSource => gs
                .iter()
                .zip(p.iter().zip(t))
                .map(|(g, (s, y))| {
                    let d = s.norm_sqr() + lambda;
                    let num = s.conj() * y + lambda;
                    let pp = (y * d - s * num) / (d * d);
                    let qq = -(s.conj() * num) / (d * d);
                    g.conj() * pp + g * qq.conj()
                })
                .collect(),
        };
        crop_gradient(
            &engine,
            &grad_spec,
            &mut grad[c * plane_len..(c + 1) * plane_len],
        )?;
    }

    Ok(GradientResult {
        grad: prediction.with_data(grad)?,
        value,
    })
}

/// Batch-mean Wiener loss and the per-prediction gradients of that mean.
pub fn grad_wiener_loss_batch(
    predictions: &[Signal],
    targets: &[Signal],
    whitening: &LagFilter,
    cfg: &WienerConfig,
) -> Result<(f64, Vec<Signal>)> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "batch of {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let scale = 1.0 / predictions.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(predictions.len());
    for (p, t) in predictions.iter().zip(targets) {
        let r = grad_wiener_loss(p, t, whitening, cfg)?;
        total += r.value;
        let scaled = r.grad.data().iter().map(|g| g * scale).collect();
        grads.push(r.grad.with_data(scaled)?);
    }
    Ok((total * scale, grads))
}

/// Per-sample diagnostics gathered while evaluating the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermDiagnostics {
    /// Contribution of this defining sample to the energy.
    pub term: f64,
    /// Zero-lag energy share of its filter.
    pub concentration: f64,
}

pub(crate) struct EnergyEvaluation {
    pub value: f64,
    pub grad: Option<Signal>,
    pub terms: Vec<TermDiagnostics>,
}

pub(crate) fn evaluate_energy(
    x: &Signal,
    model: &EnergyModel,
    with_grad: bool,
) -> Result<EnergyEvaluation> {
    model.ensure_input(x)?;
    let engine = model.engine();
    let penalty = model.penalty();
    let gamma = model.gamma();
    let lambda = model.wiener_cfg().lambda;
    let n = engine.grid().len();
    let z = engine.grid().zero_lag_flat();
    let channels = x.channels();
    let inv_channels = 1.0 / channels as f64;

    let xs = engine.prepare(x)?;
    let mut acc = if with_grad {
        vec![zero(); channels * n]
    } else {
        Vec::new()
    };
    let mut terms = Vec::with_capacity(model.len());
    let mut value = 0.0;
    let mut v = vec![0.0; n];
    let mut g = vec![0.0; n];

    for source in model.prepared() {
        let mut quotient = 0.0;
        let mut amplitude = 0.0;
        let mut zero_energy = 0.0;
        let mut total_energy = 0.0;
        for c in 0..channels {
            let s = source.plane(c, n);
            let spectrum = engine.ratio(xs.plane(c, n), s, lambda)?;
            engine.centered_from_spectrum(&spectrum, &mut v)?;
            let t = penalty.window_plane(c);
            let norm_sq: f64 = v.iter().map(|a| a * a).sum();
            if norm_sq == 0.0 {
                return Err(Error::UndefinedQuotient);
            }
            let r = v.iter().zip(t).map(|(a, w)| (w * a) * (w * a)).sum::<f64>() / norm_sq;
            quotient += r;
            amplitude += (v[z] - 1.0) * (v[z] - 1.0);
            zero_energy += v[z] * v[z];
            total_energy += norm_sq;

            if with_grad {
                for i in 0..n {
                    g[i] = inv_channels * (t[i] * t[i] * v[i] - r * v[i]) / norm_sq;
                }
                g[z] += gamma * (v[z] - 1.0);
                let gs = gradient_spectrum(engine, &g);
                for ((a, gk), sk) in acc[c * n..(c + 1) * n].iter_mut().zip(&gs).zip(s) {
                    *a += gk * sk / (sk.norm_sqr() + lambda);
                }
            }
        }
        let term = 0.5 * quotient * inv_channels + 0.5 * gamma * amplitude;
        value += term;
        terms.push(TermDiagnostics {
            term,
            concentration: zero_energy / total_energy,
        });
    }

    let grad = if with_grad {
        let plane_len = x.plane_len();
        let mut grad = vec![0.0; x.len()];
        for c in 0..channels {
            crop_gradient(
                engine,
                &acc[c * n..(c + 1) * n],
                &mut grad[c * plane_len..(c + 1) * plane_len],
            )?;
        }
        Some(x.with_data(grad)?)
    } else {
        None
    };
    Ok(EnergyEvaluation { value, grad, terms })
}

/// Gradient of the diffusion energy with respect to the sample.
pub fn grad_energy(x: &Signal, model: &EnergyModel) -> Result<GradientResult> {
    let eval = evaluate_energy(x, model, true)?;
    Ok(GradientResult {
        grad: eval.grad.expect("gradient requested"),
        value: eval.value,
    })
}

/// Outcome of a central finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Finite-difference formula used by the gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, truncation error `O(h^2)`.
    #[default]
    Central,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, truncation error
    /// `O(h^4)`; tolerates larger steps and so less round-off.
    FivePoint,
}

impl Stencil {
    /// Derivative estimate from `eval(offset)`, the function value at `x + offset`.
    pub fn derivative<E>(
        self,
        h: f64,
        mut eval: impl FnMut(f64) -> core::result::Result<f64, E>,
    ) -> core::result::Result<f64, E> {
        Ok(match self {
            Self::Central => (eval(h)? - eval(-h)?) / (2.0 * h),
            Self::FivePoint => {
                (-eval(2.0 * h)? + 8.0 * eval(h)? - 8.0 * eval(-h)? + eval(-2.0 * h)?) / (12.0 * h)
            }
        })
    }
}

pub(crate) fn ensure_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "finite-difference step must be positive, got {h}"
        )))
    }
}

pub(crate) fn summarize(analytic: Vec<f64>, numeric: Vec<f64>) -> GradientCheck {
    let errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .collect();
    GradientCheck {
        max_rel_error: errors.iter().fold(0.0f64, |m, &e| m.max(e)),
        mean_rel_error: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
        analytic,
        numeric,
    }
}

/// Compares the gradient reported by `f` at `x` with central differences of
/// its value, perturbing one element at a time by `h`.
pub fn check_gradient<F>(f: F, x: &Signal, h: f64) -> Result<GradientCheck>
where
    F: Fn(&Signal) -> Result<GradientResult>,
{
    check_gradient_with(f, x, h, Stencil::Central)
}

/// [`check_gradient`] with a chosen stencil.
pub fn check_gradient_with<F>(f: F, x: &Signal, h: f64, stencil: Stencil) -> Result<GradientCheck>
where
    F: Fn(&Signal) -> Result<GradientResult>,
{
    ensure_step(h)?;
    let analytic = f(x)?.grad.into_data();
    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        numeric.push(stencil.derivative(h, |d| {
            probe.data_mut()[i] = orig + d;
            f(&probe).map(|r| r.value)
        })?);
        probe.data_mut()[i] = orig;
    }
    Ok(summarize(analytic, numeric))
}
