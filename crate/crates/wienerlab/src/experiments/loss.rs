use serde::Serialize;
use wienerlab_core::gradients::grad_wiener_loss;
use wienerlab_core::spectral::{make_window, LagGrid, Signal};
use wienerlab_core::wiener::{concentration, loss_filter, LossDirection};

use super::filter::filter_image;
use super::image_pair;
use crate::config::Config;
use crate::error::LabResult;
use crate::formats::pgm::write_pgm_normalized;
use crate::run::RunDir;

pub struct Inputs {
    pub prediction: Signal,
    pub target: Signal,
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let l = &cfg.loss;
    let (prediction, target) = image_pair(
        l.prediction.as_deref(),
        l.target.as_deref(),
        l.digit,
        l.size,
        l.shift,
        cfg,
        0x6c6f,
    )?;
    Ok(Inputs { prediction, target })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub lambda: f64,
    pub direction: &'static str,
    pub wiener_loss: f64,
    pub mse: f64,
    pub mae: f64,
    pub gradient_norm: f64,
    pub gradient_max_abs: f64,
    pub zero_lag_value: f64,
    pub concentration: f64,
    pub argmax_lag: [isize; 2],
}

pub struct LossOutcome {
    pub report: LossReport,
    pub gradient: Signal,
    pub filter: Signal,
}

pub fn compute(inputs: &Inputs, cfg: &Config) -> LabResult<LossOutcome> {
    let wcfg = cfg.wiener_config()?;
    let (p, t) = (&inputs.prediction, &inputs.target);
    let whitening = make_window(&cfg.window.spec()?, &LagGrid::for_signal_shape(t.shape())?)?;
    let result = grad_wiener_loss(p, t, &whitening, &wcfg)?;
    let v = loss_filter(p, t, &wcfg)?;
    let n = p.len() as f64;
    let (r, c) = v.argmax_lag(0);
    let report = LossReport {
        lambda: wcfg.lambda,
        direction: match wcfg.direction {
            LossDirection::PredictionAsTarget => "prediction_as_target",
            LossDirection::PredictionAsSource => "prediction_as_source",
        },
        wiener_loss: result.value,
        mse: p.distance_sq(t) / n,
        mae: p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n,
        gradient_norm: result.grad.norm_sq().sqrt(),
        gradient_max_abs: result
            .grad
            .data()
            .iter()
            .fold(0.0, |m: f64, g| m.max(g.abs())),
        zero_lag_value: v.zero_lag_value(0),
        concentration: concentration(&v)?,
        argmax_lag: [r, c],
    };
    Ok(LossOutcome {
        report,
        gradient: result.grad,
        filter: filter_image(&v)?,
    })
}

pub fn write(out: &LossOutcome, dir: &RunDir) -> LabResult<()> {
    if out.gradient.channels() == 1 {
        write_pgm_normalized(&dir.file("gradient.pgm"), &out.gradient)?;
        write_pgm_normalized(&dir.file("filter.pgm"), &out.filter)?;
    }
    dir.write_json("loss.json", &out.report)
}
