use std::str::FromStr;

use serde::Serialize;
use wienerlab_core::gradients::grad_wiener_loss;
use wienerlab_core::spectral::{make_window, LagFilter, LagGrid, Signal};
use wienerlab_core::trainer::LossKind;
use wienerlab_core::wiener::WienerConfig;

use super::image_or_digit;
use crate::config::{derive_seed, Config};
use crate::error::{LabError, LabResult};
use crate::formats::pgm::write_pgm;
use crate::metrics::{compute_metrics, Metrics};
use crate::run::RunDir;

const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e6;

pub struct Inputs {
    pub target: Signal,
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let r = &cfg.recover;
    let target = image_or_digit(
        r.target.as_deref(),
        r.digit,
        r.size,
        derive_seed(cfg.seed, 0x7265),
    )?;
    if target.channels() != 1 {
        return Err(LabError::Data(
            "recovery expects a single-channel image".into(),
        ));
    }
    Ok(Inputs {
        target: min_max_scale(&target)?,
    })
}

/// Maps the smallest value to 0 and the largest to 1; constant images map to 0.
pub fn min_max_scale(s: &Signal) -> LabResult<Signal> {
    let lo = s.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(s.with_data(s.data().iter().map(|v| (v - lo) / span).collect())?)
}

fn rows_cols(s: &Signal) -> (usize, usize) {
    match s.shape() {
        [c] => (1, *c),
        [r, c] => (*r, *c),
        _ => unreachable!("signals are 1D or 2D"),
    }
}

/// Keeps pixels whose row and column indices are multiples of `stride`.
pub fn stride_mask(s: &Signal, stride: usize) -> Vec<bool> {
    let (rows, cols) = rows_cols(s);
    (0..rows * cols)
        .map(|i| (i / cols) % stride == 0 && (i % cols) % stride == 0)
        .collect()
}

pub fn apply_mask(s: &Signal, mask: &[bool]) -> LabResult<Signal> {
    let data = s
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(s.with_data(data)?)
}

/// Fills every dropped pixel with the mean of the kept pixels within
/// Chebyshev distance `stride`.
pub fn mask_mean_fill(masked: &Signal, mask: &[bool], stride: usize) -> LabResult<Signal> {
    let (rows, cols) = rows_cols(masked);
    let d = masked.data();
    let reach = stride as isize;
    let data = (0..rows * cols)
        .map(|i| {
            if mask[i] {
                return d[i];
            }
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            let (mut sum, mut n) = (0.0, 0usize);
            for rr in (r - reach).max(0)..=(r + reach).min(rows as isize - 1) {
                for cc in (c - reach).max(0)..=(c + reach).min(cols as isize - 1) {
                    let j = rr as usize * cols + cc as usize;
                    if mask[j] {
                        sum += d[j];
                        n += 1;
                    }
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    Ok(masked.with_data(data)?)
}

/// Loss of `x` against the target and its gradient.
pub struct Objective<'a> {
    kind: LossKind,
    target: &'a Signal,
    whitening: LagFilter,
    wiener: WienerConfig,
}

impl<'a> Objective<'a> {
    pub fn new(kind: LossKind, target: &'a Signal, cfg: &Config) -> LabResult<Self> {
        Ok(Self {
            kind,
            target,
            whitening: make_window(
                &cfg.window.spec()?,
                &LagGrid::for_signal_shape(target.shape())?,
            )?,
            wiener: cfg.wiener_config()?,
        })
    }

    pub fn evaluate(&self, x: &Signal) -> LabResult<(f64, Signal)> {
        match self.kind {
            LossKind::Mse => {
                let n = x.len() as f64;
                let grad = x
                    .data()
                    .iter()
                    .zip(self.target.data())
                    .map(|(a, b)| 2.0 * (a - b) / n)
                    .collect();
                Ok((x.distance_sq(self.target) / n, x.with_data(grad)?))
            }
            LossKind::Wiener => {
                let r = grad_wiener_loss(x, self.target, &self.whitening, &self.wiener)?;
                Ok((r.value, r.grad))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub loss: f64,
    pub step: f64,
}

pub struct Descent {
    pub iterate: Signal,
    pub curve: Vec<CurvePoint>,
    /// Set when a non-finite gradient stopped the descent.
    pub failure: Option<String>,
}

/// Gradient descent with a backtracking line search: a step is accepted
/// only if it lowers the loss; accepted steps double the trial step, rejected
/// ones halve it. Stops after `iterations` steps or when no decrease is found.
pub fn descend(
    objective: &Objective,
    start: &Signal,
    iterations: usize,
    step: f64,
) -> LabResult<Descent> {
    let mut x = start.clone();
    let (mut loss, mut grad) = objective.evaluate(&x)?;
    let mut curve = vec![CurvePoint {
        iteration: 0,
        loss,
        step: 0.0,
    }];
    let mut s = step;
    for it in 1..=iterations {
        if grad.data().iter().any(|g| !g.is_finite()) {
            return Ok(Descent {
                iterate: x,
                curve,
                failure: Some(format!("non-finite gradient at iteration {it}")),
            });
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = x
                .data()
                .iter()
                .zip(grad.data())
                .map(|(a, g)| a - s * g)
                .collect();
            if cand.iter().all(|v| v.is_finite()) {
                let cand = x.with_data(cand)?;
                let (l, g) = objective.evaluate(&cand)?;
                if l < loss {
                    accepted = Some((cand, l, g, s));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((cand, l, g, used)) = accepted else {
            break;
        };
        x = cand;
        loss = l;
        grad = g;
        s = (used * 2.0).min(MAX_STEP);
        curve.push(CurvePoint {
            iteration: it,
            loss,
            step: used,
        });
    }
    Ok(Descent {
        iterate: x,
        curve,
        failure: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverReport {
    pub loss: &'static str,
    pub stride: usize,
    pub iterations_run: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub masked: Metrics,
    pub baseline: Metrics,
    pub recovered: Metrics,
}

pub struct RecoverOutcome {
    pub report: RecoverReport,
    pub masked: Signal,
    pub baseline: Signal,
    pub recovered: Signal,
    pub curve: Vec<CurvePoint>,
}

fn clamp_unit(s: &Signal) -> LabResult<Signal> {
    Ok(s.with_data(s.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())?)
}

/// Masks the target, recovers it by descent from the masked image, and
/// writes every artifact. A non-finite gradient still saves the last good
/// iterate before failing.
pub fn run(inputs: &Inputs, cfg: &Config, dir: &RunDir) -> LabResult<RecoverOutcome> {
    let r = &cfg.recover;
    let kind = LossKind::from_str(&r.loss)?;
    let target = &inputs.target;
    let mask = stride_mask(target, r.stride);
    let masked = apply_mask(target, &mask)?;
    let baseline = mask_mean_fill(&masked, &mask, r.stride)?;
    let objective = Objective::new(kind, target, cfg)?;
    let descent = descend(&objective, &masked, r.iterations, r.step)?;

    write_pgm(&dir.file("target.pgm"), target)?;
    write_pgm(&dir.file("masked.pgm"), &masked)?;
    write_pgm(&dir.file("baseline.pgm"), &baseline)?;
    write_pgm(&dir.file("recovered.pgm"), &descent.iterate)?;
    dir.write_csv("loss.csv", &["iteration", "loss", "step"], &descent.curve)?;
    if let Some(msg) = descent.failure {
        return Err(LabError::Numerical(format!(
            "{msg}; last good iterate saved"
        )));
    }

    let recovered = descent.iterate;
    let report = RecoverReport {
        loss: kind.as_str(),
        stride: r.stride,
        iterations_run: descent.curve.len() - 1,
        initial_loss: descent.curve[0].loss,
        final_loss: descent.curve.last().expect("curve holds the start").loss,
        masked: compute_metrics(&clamp_unit(&masked)?, target)?,
        baseline: compute_metrics(&clamp_unit(&baseline)?, target)?,
        recovered: compute_metrics(&clamp_unit(&recovered)?, target)?,
    };
    dir.write_json("recover.json", &report)?;
    Ok(RecoverOutcome {
        report,
        masked,
        baseline,
        recovered,
        curve: descent.curve,
    })
}
