use serde::Serialize;
use wienerlab_core::spectral::{LagFilter, Signal};
use wienerlab_core::wiener::{concentration, wiener_filter};

use super::image_pair;
use crate::config::Config;
use crate::error::LabResult;
use crate::formats::pgm::{write_pgm, write_pgm_normalized};
use crate::run::RunDir;

pub struct Inputs {
    pub target: Signal,
    pub source: Signal,
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let f = &cfg.filter;
    let (target, source) = image_pair(
        f.target.as_deref(),
        f.source.as_deref(),
        f.digit,
        f.size,
        f.shift,
        cfg,
        0x6669,
    )?;
    Ok(Inputs { target, source })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub lambda: f64,
    pub grid: Vec<usize>,
    pub zero_lag_value: f64,
    pub concentration: f64,
    /// `(row, column)` lag of the largest coefficient.
    pub argmax_lag: [isize; 2],
    /// Value range mapped onto `[0, 255]` in `filter.pgm`.
    pub display_min: f64,
    pub display_max: f64,
}

pub struct FilterOutcome {
    pub inputs: (Signal, Signal),
    pub filter: LagFilter,
    pub report: FilterReport,
}

pub fn compute(inputs: &Inputs, cfg: &Config) -> LabResult<FilterOutcome> {
    let wcfg = cfg.wiener_config()?;
    let v = wiener_filter(&inputs.target, &inputs.source, &wcfg)?;
    let (r, c) = v.argmax_lag(0);
    let (lo, hi) = v
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let report = FilterReport {
        lambda: wcfg.lambda,
        grid: v.grid().extents().to_vec(),
        zero_lag_value: v.zero_lag_value(0),
        concentration: concentration(&v)?,
        argmax_lag: [r, c],
        display_min: lo,
        display_max: hi,
    };
    Ok(FilterOutcome {
        inputs: (inputs.target.clone(), inputs.source.clone()),
        filter: v,
        report,
    })
}

/// Centered lag-domain coefficients as a signal on the lag grid.
pub fn filter_image(v: &LagFilter) -> LabResult<Signal> {
    Ok(Signal::with_channels(
        v.data().to_vec(),
        v.grid().extents(),
        v.channels(),
    )?)
}

pub fn write(out: &FilterOutcome, dir: &RunDir) -> LabResult<()> {
    write_pgm(&dir.file("target.pgm"), &out.inputs.0)?;
    write_pgm(&dir.file("source.pgm"), &out.inputs.1)?;
    write_pgm_normalized(&dir.file("filter.pgm"), &filter_image(&out.filter)?)?;
    dir.write_json("filter.json", &out.report)
}
