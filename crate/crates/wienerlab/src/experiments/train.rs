use serde::Serialize;
use wienerlab_core::spectral::Signal;
use wienerlab_core::trainer::{forward, train, DenseAutoencoder, EpochRecord, TrainLog};

use crate::config::{derive_seed, Config};
use crate::digits::{synthetic_digits, DigitStyle};
use crate::error::{LabError, LabResult};
use crate::formats::idx::read_images;
use crate::formats::model::write_model;
use crate::formats::pgm::{tile, write_pgm};
use crate::metrics::{metrics_report, Metrics};
use crate::run::RunDir;

/// Validation images drawn in `reconstructions.pgm`.
const SHOWN: usize = 10;

pub struct Inputs {
    pub train: Vec<Signal>,
    pub val: Vec<Signal>,
}

/// Center-crops to the largest multiple of `size` and average-pools down to
/// `size x size`.
pub fn crop_pool(s: &Signal, size: usize) -> LabResult<Signal> {
    let [rows, cols] = s.shape() else {
        return Err(LabError::Data(format!(
            "expected a 2D image, got shape {:?}",
            s.shape()
        )));
    };
    let f = rows.min(cols) / size;
    if f == 0 {
        return Err(LabError::Data(format!(
            "image of {rows}x{cols} is smaller than train.size {size}"
        )));
    }
    let (r0, c0) = ((rows - f * size) / 2, (cols - f * size) / 2);
    let d = s.data();
    let mut out = vec![0.0; size * size];
    for (i, o) in out.iter_mut().enumerate() {
        let (r, c) = (i / size, i % size);
        let mut acc = 0.0;
        for dr in 0..f {
            for dc in 0..f {
                acc += d[(r0 + r * f + dr) * cols + c0 + c * f + dc];
            }
        }
        *o = acc / (f * f) as f64;
    }
    Ok(Signal::new(out, &[size, size])?)
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let t = &cfg.train;
    let style = DigitStyle {
        supersample: 4,
        ..DigitStyle::default()
    };
    let load = |path: &Option<std::path::PathBuf>, n: usize, tag: u64| -> LabResult<Vec<Signal>> {
        match path {
            Some(p) => read_images(p)?
                .iter()
                .take(n)
                .map(|s| crop_pool(s, t.size))
                .collect(),
            None => Ok(
                synthetic_digits(n, t.size, &style, derive_seed(cfg.seed, tag))?
                    .signals()
                    .to_vec(),
            ),
        }
    };
    let train = load(&cfg.data.train_images, t.n_train, 0x7464)?;
    let val = load(&cfg.data.test_images, t.n_val, 0x7676)?;
    if train.is_empty() {
        return Err(LabError::Data("no training images".into()));
    }
    Ok(Inputs { train, val })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub loss: &'static str,
    pub epochs: usize,
    pub parameters: usize,
    pub initial_concentration: f64,
    pub final_concentration: f64,
    pub final_loss: Option<f64>,
    /// Reconstructions clamped to `[0, 1]`; `mse` is of the raw outputs.
    pub train: Metrics,
    pub val: Option<Metrics>,
}

pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: DenseAutoencoder,
    pub log: TrainLog,
    pub shown: Vec<Signal>,
}

fn evaluate(model: &DenseAutoencoder, data: &[Signal]) -> LabResult<(Metrics, Vec<Signal>)> {
    let recon = forward(model, data)?;
    let clamped = recon
        .iter()
        .map(|r| r.with_data(r.data().iter().map(|v| v.clamp(0.0, 1.0)).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut m = metrics_report(&clamped, data)?.mean;
    m.mse = recon
        .iter()
        .zip(data)
        .map(|(r, t)| r.distance_sq(t) / t.len() as f64)
        .sum::<f64>()
        / data.len() as f64;
    Ok((m, recon))
}

pub fn compute(inputs: &Inputs, cfg: &Config) -> LabResult<TrainOutcome> {
    let tcfg = cfg.train_config()?;
    let mut model = DenseAutoencoder::random(
        &cfg.train.widths,
        cfg.activation()?,
        derive_seed(cfg.seed, 0x6d6f),
    )?;
    let log = train(&mut model, &inputs.train, &tcfg)?;
    let (train_metrics, _) = evaluate(&model, &inputs.train)?;
    let (val, shown_set) = if inputs.val.is_empty() {
        (None, &inputs.train)
    } else {
        (Some(evaluate(&model, &inputs.val)?.0), &inputs.val)
    };
    let originals: Vec<Signal> = shown_set.iter().take(SHOWN).cloned().collect();
    let mut shown = originals.clone();
    shown.extend(forward(&model, &originals)?);
    let report = TrainReport {
        loss: tcfg.loss.as_str(),
        epochs: tcfg.epochs,
        parameters: model.num_parameters(),
        initial_concentration: log.initial_concentration,
        final_concentration: log.final_concentration(),
        final_loss: log.epochs.last().map(|e| e.loss),
        train: train_metrics,
        val,
    };
    Ok(TrainOutcome {
        report,
        model,
        log,
        shown,
    })
}

#[derive(Serialize)]
struct LogRow {
    epoch: usize,
    loss: f64,
    concentration: f64,
}

pub fn write(out: &TrainOutcome, dir: &RunDir) -> LabResult<()> {
    let rows: Vec<LogRow> = out
        .log
        .epochs
        .iter()
        .map(
            |&EpochRecord {
                 epoch,
                 loss,
                 concentration,
             }| LogRow {
                epoch,
                loss,
                concentration,
            },
        )
        .collect();
    dir.write_csv("log.csv", &["epoch", "loss", "concentration"], &rows)?;
    write_model(&dir.file("model.wnae"), &out.model)?;
    let per_row = out.shown.len() / 2;
    write_pgm(
        &dir.file("reconstructions.pgm"),
        &tile(&out.shown, per_row, false)?,
    )?;
    dir.write_json("train.json", &out.report)
}
