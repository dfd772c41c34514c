//! End-to-end acceptance checks, one line per criterion. Runs sequentially on
//! a single thread so the timing checks are not disturbed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wienerlab::config::Config;
use wienerlab::experiments::{diffuse, knn, train};
use wienerlab_core::diffusion::{cosine_schedule, EnergyModel};
use wienerlab_core::gradients::{check_gradient_with, grad_energy, grad_wiener_loss, Stencil};
use wienerlab_core::spectral::{make_window, LagFilter, LagGrid, Signal, WindowSpec};
use wienerlab_core::trainer::{
    grad_check_model_with, Activation, DenseAutoencoder, LossKind, TrainConfig,
};
use wienerlab_core::wiener::{wiener_filter, wiener_filter_direct, LossDirection, WienerConfig};

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Signal {
    let n = shape.iter().product();
    Signal::new((0..n).map(|_| rng.random::<f64>()).collect(), shape).unwrap()
}

/// Random 2D image with a blank border of `margin` pixels.
fn with_margin(rng: &mut ChaCha8Rng, side: usize, margin: usize) -> Signal {
    let mut data = vec![0.0; side * side];
    for r in margin..side - margin {
        for c in margin..side - margin {
            data[r * side + c] = rng.random::<f64>();
        }
    }
    Signal::new(data, &[side, side]).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Max-norm distance between `v` and a unit spike at `lag`.
fn delta_error(v: &LagFilter, lag: (isize, isize)) -> f64 {
    let spike = v.grid().flat_of(lag).unwrap();
    v.data()
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - if i == spike { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for lambda in [1e-3, 1.0, 250.0] {
        let cfg = WienerConfig::with_lambda(lambda);
        let shapes = (0..50)
            .map(|_| vec![rng.random_range(8..=32usize)])
            .chain((0..10).map(|_| vec![6, 6]))
            .collect::<Vec<_>>();
        for shape in shapes {
            let (x, y) = (uniform(&mut rng, &shape), uniform(&mut rng, &shape));
            let fast = wiener_filter(&x, &y, &cfg).unwrap();
            let slow = wiener_filter_direct(&x, &y, &cfg).unwrap();
            let diff: Vec<f64> = fast
                .data()
                .iter()
                .zip(slow.data())
                .map(|(a, b)| a - b)
                .collect();
            worst = worst.max(max_abs(&diff) / max_abs(slow.data()));
            pairs += 1;
        }
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("{pairs} pairs, max relative error {worst:.2e}"),
    }
}

fn identity_and_shift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut identity, mut shifted) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let y = uniform(&mut rng, &[12, 12]);
        let v = wiener_filter(&y, &y, &WienerConfig::default()).unwrap();
        identity = identity.max(delta_error(&v, (0, 0)));
    }
    let exact = WienerConfig::with_lambda(0.0);
    for _ in 0..20 {
        let y = with_margin(&mut rng, 12, 3);
        let k = (
            rng.random_range(-3i64..=3) as isize,
            rng.random_range(-3i64..=3) as isize,
        );
        let x = y.roll(&[k.0, k.1]).unwrap();
        let v = wiener_filter(&x, &y, &exact).unwrap();
        shifted = shifted.max(delta_error(&v, k));
    }
    Outcome {
        pass: identity < 1e-10 && shifted < 1e-9,
        detail: format!("identity {identity:.2e}, shift (lambda 0) {shifted:.2e}"),
    }
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (h, five) = (1e-3, Stencil::FivePoint);
    let mut loss_err = 0.0f64;
    for shape in [vec![6usize, 6], vec![16, 16], vec![5, 11], vec![32]] {
        let w = make_window(
            &WindowSpec::laplace(4.0, 0.1),
            &LagGrid::for_signal_shape(&shape).unwrap(),
        )
        .unwrap();
        for lambda in [0.1, 1.0, 250.0] {
            for direction in [
                LossDirection::PredictionAsTarget,
                LossDirection::PredictionAsSource,
            ] {
                let (x, y) = (uniform(&mut rng, &shape), uniform(&mut rng, &shape));
                let cfg = WienerConfig { lambda, direction };
                let r = check_gradient_with(|p| grad_wiener_loss(p, &y, &w, &cfg), &x, h, five)
                    .unwrap();
                loss_err = loss_err.max(r.max_rel_error);
            }
        }
    }
    let mut energy_err = 0.0f64;
    for (shape, lambda) in [
        (vec![16usize, 16], 0.1),
        (vec![8, 8], 1.0),
        (vec![16], 250.0),
    ] {
        let grid = LagGrid::for_signal_shape(&shape).unwrap();
        let t = make_window(&WindowSpec::inverted_laplace(2.0), &grid).unwrap();
        let samples = (0..3).map(|_| uniform(&mut rng, &shape)).collect();
        let model = EnergyModel::new(samples, t, 0.5, WienerConfig::with_lambda(lambda)).unwrap();
        let x = uniform(&mut rng, &shape);
        let r = check_gradient_with(|s| grad_energy(s, &model), &x, h, five).unwrap();
        energy_err = energy_err.max(r.max_rel_error);
    }
    let mut model_err = 0.0f64;
    let batch: Vec<Signal> = (0..4).map(|_| uniform(&mut rng, &[8, 8])).collect();
    let model = DenseAutoencoder::random(&[64, 32, 16, 32, 64], Activation::Mish, 7).unwrap();
    for loss in [LossKind::Mse, LossKind::Wiener] {
        let cfg = TrainConfig {
            loss,
            ..TrainConfig::default()
        };
        model_err = model_err.max(
            grad_check_model_with(&model, &batch, &cfg, h, five)
                .unwrap()
                .max_rel_error,
        );
    }
    Outcome {
        pass: loss_err < 1e-5 && energy_err < 1e-5 && model_err < 1e-4,
        detail: format!("loss {loss_err:.2e}, energy {energy_err:.2e}, trainer {model_err:.2e}"),
    }
}

fn translation_robust_knn() -> Outcome {
    let cfg = Config::default();
    let out = knn::compute(&knn::prepare(&cfg).unwrap(), &cfg).unwrap();
    let r = &out.report;
    Outcome {
        pass: r.gap >= 0.20,
        detail: format!(
            "wiener_ti k={} {:.3} vs manhattan k={} {:.3}, gap {:.3}",
            r.wiener_ti.k, r.wiener_ti.accuracy, r.baseline.k, r.baseline.accuracy, r.gap
        ),
    }
}

fn diffusion_config(gamma: f64) -> Config {
    let mut cfg = Config::default();
    cfg.diffusion.gamma = gamma;
    cfg
}

fn diffusion_checks(cfg: &Config) -> (bool, String) {
    let out = diffuse::compute(&diffuse::prepare(cfg).unwrap(), cfg).unwrap();
    let r = &out.report;
    let n = r.n_samples as f64;
    let a = r.group_counts.iter().all(|&c| c as f64 >= 0.2 * n);
    let b = r.mean_final_energy < r.mean_initial_energy;
    let c = r.mean_final_concentration > r.mean_initial_concentration;
    let d = r.collapsed as f64 <= 0.1 * n;
    let detail = format!(
        "clusters {:?}, energy {:.3} -> {:.3}, concentration {:.3} -> {:.3}, collapsed {}/{}",
        r.group_counts,
        r.mean_initial_energy,
        r.mean_final_energy,
        r.mean_initial_concentration,
        r.mean_final_concentration,
        r.collapsed,
        r.n_samples
    );
    (a && b && c && d, detail)
}

fn diffusion_behaviour() -> Outcome {
    let start = Instant::now();
    let (pass, detail) = diffusion_checks(&diffusion_config(0.1));
    let elapsed = start.elapsed();
    for gamma in [0.0, 0.3, 1.0] {
        let (ok, d) = diffusion_checks(&diffusion_config(gamma));
        println!(
            "      gamma {gamma}: {} {d}",
            if ok { "meets all four" } else { "misses" }
        );
    }
    Outcome {
        pass: pass && elapsed <= Duration::from_secs(120),
        detail: format!("gamma 0.1: {detail} ({:.1} s)", elapsed.as_secs_f64()),
    }
}

fn training_demonstration() -> Outcome {
    let run = |loss: &str| {
        let mut cfg = Config::default();
        cfg.train.loss = loss.into();
        train::compute(&train::prepare(&cfg).unwrap(), &cfg)
    };
    let (mse, wiener) = match (run("mse"), run("wiener")) {
        (Ok(m), Ok(w)) => (m.report, w.report),
        (m, w) => {
            return Outcome {
                pass: false,
                detail: format!("diverged: mse {:?}, wiener {:?}", m.err(), w.err()),
            }
        }
    };
    let ratio = wiener.train.mse / mse.train.mse;
    Outcome {
        pass: wiener.final_concentration > wiener.initial_concentration && ratio <= 3.0,
        detail: format!(
            "concentration {:.3} -> {:.3}, mse wiener {:.4} vs mse {:.4} (ratio {ratio:.2})",
            wiener.initial_concentration,
            wiener.final_concentration,
            wiener.train.mse,
            mse.train.mse
        ),
    }
}

fn schedule_endpoints() -> Outcome {
    let a = cosine_schedule(200, 500.0, 1.0).unwrap();
    let b = cosine_schedule(400, 0.1, 4.0).unwrap();
    let ends = [a[0], a[199], b[0], b[399]];
    Outcome {
        pass: (a.len(), b.len()) == (200, 400) && ends == [500.0, 1.0, 0.1, 4.0],
        detail: format!("endpoints {ends:?}"),
    }
}

const SMALL: &str = "\
seed = 11
[train]
epochs = 3
n_train = 40
n_val = 10
[knn]
n_train = 40
n_test = 20
[diffusion]
T = 40
n_samples = 8
[recover]
iterations = 50
";

fn run_cli(cmd: &str, dir: &Path) -> PathBuf {
    let out = Command::new(env!("CARGO_BIN_EXE_wienerlab"))
        .args([
            cmd,
            "--config",
            "cfg.toml",
            "--out",
            "runs",
            "--threads",
            "1",
            "--seed",
            "11",
        ])
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{cmd}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join(String::from_utf8(out.stdout).unwrap().trim())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut all: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    all.sort();
    all
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.toml"), SMALL).unwrap();
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for cmd in ["filter", "loss", "recover", "diffuse", "knn", "train"] {
        let (a, b) = (
            files(&run_cli(cmd, tmp.path())),
            files(&run_cli(cmd, tmp.path())),
        );
        compared += a.len();
        if a != b {
            mismatched.push(cmd);
        }
    }
    Outcome {
        pass: mismatched.is_empty(),
        detail: format!("{compared} files across 6 subcommands, mismatched: {mismatched:?}"),
    }
}

/// Median wall time of filter + loss + gradient on a `side x side` pair.
fn pipeline_time(side: usize, rng: &mut ChaCha8Rng) -> Duration {
    let (x, y) = (uniform(rng, &[side, side]), uniform(rng, &[side, side]));
    let cfg = WienerConfig::default();
    let w = make_window(
        &WindowSpec::laplace(4.0, 0.1),
        &LagGrid::for_signal_shape(&[side, side]).unwrap(),
    )
    .unwrap();
    let mut times: Vec<Duration> = (0..15)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(wiener_filter(&x, &y, &cfg).unwrap());
            std::hint::black_box(grad_wiener_loss(&x, &y, &w, &cfg).unwrap());
            t.elapsed()
        })
        .collect();
    times.sort();
    times[times.len() / 2]
}

fn performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    pipeline_time(16, &mut rng);
    let sides = [32usize, 48, 64, 96, 128];
    let times: Vec<f64> = sides
        .iter()
        .map(|&s| pipeline_time(s, &mut rng).as_secs_f64())
        .collect();
    // t = c * N log N over padded element counts, c fitted in log space
    let work: Vec<f64> = sides
        .iter()
        .map(|&s| (4 * s * s) as f64 * ((4 * s * s) as f64).ln())
        .collect();
    let log_c = times
        .iter()
        .zip(&work)
        .map(|(t, w)| (t / w).ln())
        .sum::<f64>()
        / sides.len() as f64;
    let worst = times
        .iter()
        .zip(&work)
        .map(|(t, w)| {
            let r = t / (log_c.exp() * w);
            r.max(1.0 / r)
        })
        .fold(0.0, f64::max);
    let t64 = times[2] * 1e3;
    Outcome {
        pass: t64 < 50.0 && worst <= 2.0,
        detail: format!(
            "64x64 {t64:.2} ms; 32..128 ms {:?}; worst deviation from n log n fit {worst:.2}x",
            times
                .iter()
                .map(|t| (t * 1e5).round() / 100.0)
                .collect::<Vec<_>>()
        ),
    }
}

fn main() -> ExitCode {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build_global()
        .unwrap();
    let criteria: [Criterion; 9] = [
        (
            "oracle equivalence",
            oracle_equivalence,
            Duration::from_secs(10),
        ),
        (
            "identity and shift",
            identity_and_shift,
            Duration::from_secs(5),
        ),
        (
            "gradient fidelity",
            gradient_fidelity,
            Duration::from_secs(60),
        ),
        (
            "translation-robust knn",
            translation_robust_knn,
            Duration::from_secs(300),
        ),
        (
            "diffusion behaviour",
            diffusion_behaviour,
            Duration::from_secs(300),
        ),
        (
            "training demonstration",
            training_demonstration,
            Duration::from_secs(300),
        ),
        (
            "schedule endpoints",
            schedule_endpoints,
            Duration::from_secs(1),
        ),
        ("reproducibility", reproducibility, Duration::from_secs(600)),
        ("performance", performance, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= *budget;
        failed += usize::from(!pass);
        println!(
            "{} {}. {name}: {} [{:.1} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
