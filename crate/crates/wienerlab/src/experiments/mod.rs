//! The subcommands: input preparation, computation and artifact emission.
//! Inputs are loaded before a run directory exists so that bad data leaves
//! nothing behind.

pub mod diffuse;
pub mod filter;
pub mod knn;
pub mod loss;
pub mod recover;
pub mod train;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use wienerlab_core::spectral::Signal;

use crate::config::{derive_seed, Config};
use crate::digits::{render_digit, DigitStyle};
use crate::error::LabResult;
use crate::formats::pgm::read_pgm;
use crate::run::RunDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Filter,
    Loss,
    Recover,
    Diffuse,
    Knn,
    Train,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Self::Filter,
        Self::Loss,
        Self::Recover,
        Self::Diffuse,
        Self::Knn,
        Self::Train,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Filter => "filter",
            Self::Loss => "loss",
            Self::Recover => "recover",
            Self::Diffuse => "diffuse",
            Self::Knn => "knn",
            Self::Train => "train",
        }
    }
}

/// Loaded inputs of one subcommand.
pub enum Prepared {
    Filter(filter::Inputs),
    Loss(loss::Inputs),
    Recover(recover::Inputs),
    Diffuse(diffuse::Inputs),
    Knn(knn::Inputs),
    Train(train::Inputs),
}

pub fn prepare(cmd: Command, cfg: &Config) -> LabResult<Prepared> {
    Ok(match cmd {
        Command::Filter => Prepared::Filter(filter::prepare(cfg)?),
        Command::Loss => Prepared::Loss(loss::prepare(cfg)?),
        Command::Recover => Prepared::Recover(recover::prepare(cfg)?),
        Command::Diffuse => Prepared::Diffuse(diffuse::prepare(cfg)?),
        Command::Knn => Prepared::Knn(knn::prepare(cfg)?),
        Command::Train => Prepared::Train(train::prepare(cfg)?),
    })
}

pub fn execute(prepared: Prepared, cfg: &Config, dir: &RunDir) -> LabResult<()> {
    match prepared {
        Prepared::Filter(i) => filter::write(&filter::compute(&i, cfg)?, dir),
        Prepared::Loss(i) => loss::write(&loss::compute(&i, cfg)?, dir),
        Prepared::Recover(i) => recover::run(&i, cfg, dir).map(|_| ()),
        Prepared::Diffuse(i) => diffuse::write(&diffuse::compute(&i, cfg)?, dir),
        Prepared::Knn(i) => knn::write(&knn::compute(&i, cfg)?, dir),
        Prepared::Train(i) => train::write(&train::compute(&i, cfg)?, dir),
    }
}

/// A synthetic digit, or the image at `path` when given.
pub(crate) fn image_or_digit(
    path: Option<&Path>,
    digit: u8,
    size: usize,
    seed: u64,
) -> LabResult<Signal> {
    match path {
        Some(p) => read_pgm(p),
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            Ok(render_digit(digit, size, &DigitStyle::default(), &mut rng))
        }
    }
}

/// Two loaded images, or a synthetic digit as the second and its cyclic
/// shift by `shift` as the first.
pub(crate) fn image_pair(
    first: Option<&Path>,
    second: Option<&Path>,
    digit: u8,
    size: usize,
    shift: [i64; 2],
    cfg: &Config,
    tag: u64,
) -> LabResult<(Signal, Signal)> {
    match (first, second) {
        (Some(a), Some(b)) => Ok((read_pgm(a)?, read_pgm(b)?)),
        _ => {
            let base = image_or_digit(None, digit, size, derive_seed(cfg.seed, tag))?;
            let moved = base.roll(&[shift[0] as isize, shift[1] as isize])?;
            Ok((moved, base))
        }
    }
}
