use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use wienerlab::config::Config;
use wienerlab::error::exit;
use wienerlab::experiments::{execute, prepare, Command};
use wienerlab::run::RunDir;
use wienerlab::LabError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Filter,
    Loss,
    Recover,
    Diffuse,
    Knn,
    Train,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Filter => Command::Filter,
            Sub::Loss => Command::Loss,
            Sub::Recover => Command::Recover,
            Sub::Diffuse => Command::Diffuse,
            Sub::Knn => Command::Knn,
            Sub::Train => Command::Train,
        }
    }
}

/// Wiener-filter losses, translation-invariant distances and diffusion.
#[derive(Debug, Parser)]
#[command(name = "wienerlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Root under which the timestamped run directory is created.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "WIENERLAB_THREADS")]
    threads: Option<usize>,
}

fn fail(err: &LabError) -> ExitCode {
    eprintln!("wienerlab: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    let mut cfg = match Config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&LabError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail(&LabError::Config(format!("cannot set up {n} threads: {e}")));
        }
    }
    let cmd = Command::from(cli.command);
    let prepared = match prepare(cmd, &cfg) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let dir = match RunDir::create(&cli.out, cmd.as_str(), &cfg) {
        Ok(d) => d,
        Err(e) => return fail(&e),
    };
    match execute(prepared, &cfg, &dir) {
        Ok(()) => {
            println!("{}", dir.path().display());
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => fail(&e),
    }
}
