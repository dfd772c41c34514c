use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use wienerlab_core::diffusion::{run_chain, DiffusionOptions, EnergyModel, Schedule, Trajectory};
use wienerlab_core::spectral::{make_window, LagGrid, Signal};
use wienerlab_core::wiener::WienerConfig;

use crate::config::{derive_seed, Config};
use crate::digits::{synthetic_digits, DigitStyle};
use crate::error::{LabError, LabResult};
use crate::formats::pgm::{tile, write_pgm};
use crate::run::RunDir;

/// Chains drawn in `snapshots.pgm`.
const SNAPSHOT_CHAINS: usize = 8;

/// Defining samples and the group each belongs to.
pub struct Inputs {
    pub samples: Vec<Signal>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
}

/// Two clusters of length-`len` signals: `n / 2` noisy copies of a random
/// prototype, and their exact negations.
pub fn mirrored_clusters(n: usize, len: usize, spread: f64, seed: u64) -> LabResult<Inputs> {
    let half = n / 2;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let proto: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let mut samples = Vec::with_capacity(2 * half);
    for _ in 0..half {
        let data = proto
            .iter()
            .map(|p| p + spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        samples.push(Signal::new(data, &[len])?);
    }
    for i in 0..half {
        let neg = samples[i].data().iter().map(|v| -v).collect();
        samples.push(Signal::new(neg, &[len])?);
    }
    let groups = (0..2 * half).map(|i| i / half).collect();
    Ok(Inputs {
        samples,
        groups,
        n_groups: 2,
    })
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let d = &cfg.diffusion;
    let seed = derive_seed(cfg.seed, 0x6473);
    match d.dataset.as_str() {
        "two_cluster" => mirrored_clusters(d.n_defining, d.size, d.spread, seed),
        "digits" => {
            let set = synthetic_digits(d.n_defining, d.size, &DigitStyle::default(), seed)?;
            Ok(Inputs {
                samples: set.signals().to_vec(),
                groups: set.labels().iter().map(|&l| l as usize).collect(),
                n_groups: 10,
            })
        }
        other => Err(LabError::Config(format!(
            "unknown diffusion dataset `{other}`"
        ))),
    }
}

/// Population variance over all values of all samples.
pub fn sample_variance(samples: &[Signal]) -> f64 {
    let n = samples.iter().map(Signal::len).sum::<usize>() as f64;
    let mean = samples.iter().map(Signal::sum).sum::<f64>() / n;
    samples
        .iter()
        .flat_map(|s| s.data())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub nearest: usize,
    pub group: usize,
    pub nearest_distance: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub initial_concentration: f64,
    pub final_concentration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionReport {
    pub dataset: String,
    pub gamma: f64,
    pub lambda: f64,
    pub steps: usize,
    pub n_samples: usize,
    pub init_variance: f64,
    pub chain_seed: u64,
    /// Final samples per group of their nearest defining sample.
    pub group_counts: Vec<usize>,
    pub mean_initial_energy: f64,
    pub mean_final_energy: f64,
    pub mean_initial_concentration: f64,
    pub mean_final_concentration: f64,
    /// Half the final noise scale; closer samples count as collapsed.
    pub collapse_radius: f64,
    pub collapsed: usize,
    pub median_nearest_distance: f64,
}

pub struct DiffusionOutcome {
    pub report: DiffusionReport,
    pub trajectories: Vec<Trajectory>,
    pub chains: Vec<ChainSummary>,
}

pub fn build_model(inputs: &Inputs, cfg: &Config) -> LabResult<EnergyModel> {
    let d = &cfg.diffusion;
    let grid = LagGrid::for_signal_shape(inputs.samples[0].shape())?;
    let penalty = make_window(&cfg.penalty.spec()?, &grid)?;
    Ok(EnergyModel::new(
        inputs.samples.clone(),
        penalty,
        d.gamma,
        WienerConfig::with_lambda(d.lambda),
    )?)
}

pub fn compute(inputs: &Inputs, cfg: &Config) -> LabResult<DiffusionOutcome> {
    let d = &cfg.diffusion;
    let model = build_model(inputs, cfg)?;
    let schedule = Schedule::cosine(
        d.steps,
        (d.alpha_start, d.alpha_end),
        (d.beta_start, d.beta_end),
    )?;
    let init_variance = d
        .init_variance
        .unwrap_or_else(|| sample_variance(&inputs.samples));
    let chain_seed = d.seed.unwrap_or_else(|| derive_seed(cfg.seed, 0x6469));
    let opts = DiffusionOptions {
        snapshot_stride: d.snapshot_stride,
        nearest_k: d.nearest_k,
    };
    let trajectories = (0..d.n_samples as u64)
        .into_par_iter()
        .map(|c| run_chain(&model, &schedule, init_variance, chain_seed, c, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut chains = Vec::with_capacity(trajectories.len());
    let mut group_counts = vec![0; inputs.n_groups];
    for (i, tr) in trajectories.iter().enumerate() {
        let (nearest, dist) = model.nearest_sample(tr.last())?;
        let group = inputs.groups[nearest];
        group_counts[group] += 1;
        chains.push(ChainSummary {
            chain: i,
            nearest,
            group,
            nearest_distance: dist,
            initial_energy: tr.energies[0],
            final_energy: tr.energies[d.steps],
            initial_concentration: tr.concentrations[0],
            final_concentration: tr.concentrations[d.steps],
        });
    }
    let n = chains.len() as f64;
    let mean = |f: fn(&ChainSummary) -> f64| chains.iter().map(f).sum::<f64>() / n;
    let collapse_radius = 0.5 * d.beta_end.sqrt();
    let mut dists: Vec<f64> = chains.iter().map(|c| c.nearest_distance).collect();
    dists.sort_by(f64::total_cmp);
    let report = DiffusionReport {
        dataset: d.dataset.clone(),
        gamma: d.gamma,
        lambda: d.lambda,
        steps: d.steps,
        n_samples: d.n_samples,
        init_variance,
        chain_seed,
        group_counts,
        mean_initial_energy: mean(|c| c.initial_energy),
        mean_final_energy: mean(|c| c.final_energy),
        mean_initial_concentration: mean(|c| c.initial_concentration),
        mean_final_concentration: mean(|c| c.final_concentration),
        collapse_radius,
        collapsed: dists.iter().filter(|&&x| x <= collapse_radius).count(),
        median_nearest_distance: dists[dists.len() / 2],
    };
    Ok(DiffusionOutcome {
        report,
        trajectories,
        chains,
    })
}

#[derive(Serialize)]
struct EnergyRow {
    step: usize,
    mean_energy: f64,
    mean_concentration: f64,
}

pub fn write(out: &DiffusionOutcome, dir: &RunDir) -> LabResult<()> {
    let trs = &out.trajectories;
    let n = trs.len() as f64;
    let rows: Vec<EnergyRow> = (0..trs[0].energies.len())
        .map(|t| EnergyRow {
            step: t,
            mean_energy: trs.iter().map(|tr| tr.energies[t]).sum::<f64>() / n,
            mean_concentration: trs.iter().map(|tr| tr.concentrations[t]).sum::<f64>() / n,
        })
        .collect();
    dir.write_csv(
        "energy.csv",
        &["step", "mean_energy", "mean_concentration"],
        &rows,
    )?;
    dir.write_csv(
        "chains.csv",
        &[
            "chain",
            "nearest",
            "group",
            "nearest_distance",
            "initial_energy",
            "final_energy",
            "initial_concentration",
            "final_concentration",
        ],
        &out.chains,
    )?;

    if trs[0].last().channels() == 1 {
        let finals: Vec<Signal> = trs.iter().map(|tr| tr.last().clone()).collect();
        write_pgm(&dir.file("samples.pgm"), &tile(&finals, 10, true)?)?;
        let per_row = trs[0].samples.len();
        let snaps: Vec<Signal> = trs
            .iter()
            .take(SNAPSHOT_CHAINS)
            .flat_map(|tr| tr.samples.iter().cloned())
            .collect();
        write_pgm(&dir.file("snapshots.pgm"), &tile(&snaps, per_row, true)?)?;
    }
    dir.write_json("diffusion.json", &out.report)
}
