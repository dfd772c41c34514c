//! Experiment configuration: a TOML document with one table per module.
//! Every key has a default and unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wienerlab_core::spectral::{WindowFamily, WindowSpec};
use wienerlab_core::trainer::{Activation, LossKind, TrainConfig};
use wienerlab_core::wiener::{LossDirection, WienerConfig};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Master seed; every experiment derives its generators from it.
    pub seed: u64,
    pub wiener: WienerSection,
    /// Whitening window of the Wiener loss.
    pub window: WindowSection,
    /// Penalty window of the diffusion energy.
    pub penalty: WindowSection,
    pub filter: FilterSection,
    pub loss: LossSection,
    pub recover: RecoverSection,
    pub diffusion: DiffusionSection,
    pub knn: KnnSection,
    pub train: TrainSection,
    pub data: DataSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            wiener: WienerSection::default(),
            window: WindowSection {
                family: "laplace".into(),
                b: 4.0,
                epsilon: 0.1,
            },
            penalty: WindowSection {
                family: "inverted_laplace".into(),
                b: 1.0,
                epsilon: 0.0,
            },
            filter: FilterSection::default(),
            loss: LossSection::default(),
            recover: RecoverSection::default(),
            diffusion: DiffusionSection::default(),
            knn: KnnSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerSection {
    pub lambda: f64,
    /// `prediction_as_target` or `prediction_as_source`.
    pub direction: String,
}

impl Default for WienerSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            direction: "prediction_as_target".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    /// `laplace` or `inverted_laplace`.
    pub family: String,
    pub b: f64,
    #[serde(default)]
    pub epsilon: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Config::default().window
    }
}

/// Two input images, or a synthetic digit and a translated copy of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    pub digit: u8,
    pub size: usize,
    /// Cyclic `(row, column)` shift of the synthetic target.
    pub shift: [i64; 2],
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            target: None,
            source: None,
            digit: 3,
            size: 20,
            shift: [3, -2],
        }
    }
}

/// Prediction and target images, or a synthetic digit and a translated copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    pub digit: u8,
    pub size: usize,
    pub shift: [i64; 2],
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            prediction: None,
            target: None,
            digit: 5,
            size: 16,
            shift: [0, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    pub digit: u8,
    pub size: usize,
    /// Keep pixels whose row and column are multiples of `stride`.
    pub stride: usize,
    /// `mse` or `wiener`.
    pub loss: String,
    pub iterations: usize,
    /// Initial step of the backtracking line search.
    pub step: f64,
}

impl Default for RecoverSection {
    fn default() -> Self {
        Self {
            target: None,
            digit: 2,
            size: 8,
            stride: 2,
            loss: "wiener".into(),
            iterations: 200,
            step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    /// `two_cluster` (1D toy) or `digits` (small raw images).
    pub dataset: String,
    /// Defining samples; split evenly between the clusters of the toy.
    pub n_defining: usize,
    /// Toy signal length or digit side.
    pub size: usize,
    /// Within-cluster standard deviation of the toy.
    pub spread: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub n_samples: usize,
    /// Variance of `x_0`; defaults to the variance of the defining samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_variance: Option<f64>,
    pub snapshot_stride: usize,
    pub nearest_k: usize,
    /// Chain seed; derived from the master seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        Self {
            dataset: "two_cluster".into(),
            n_defining: 8,
            size: 8,
            spread: 0.15,
            steps: 200,
            alpha_start: 1.0,
            alpha_end: 2e-3,
            beta_start: 5e-5,
            beta_end: 4e-3,
            gamma: 1.0,
            lambda: 0.1,
            n_samples: 50,
            init_variance: None,
            snapshot_stride: 10,
            nearest_k: 30,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSection {
    pub k: usize,
    pub baseline_k: usize,
    pub max_shift: usize,
    pub pad: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Side of the synthetic digits before padding.
    pub size: usize,
    pub lambda: f64,
}

impl Default for KnnSection {
    fn default() -> Self {
        Self {
            k: 10,
            baseline_k: 3,
            max_shift: 6,
            pad: 6,
            n_train: 500,
            n_test: 200,
            size: 20,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// `mse` or `wiener`.
    pub loss: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub widths: Vec<usize>,
    /// `mish`, `tanh` or `relu`.
    pub activation: String,
    pub n_train: usize,
    pub n_val: usize,
    /// Side of the training images.
    pub size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            loss: "wiener".into(),
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            widths: vec![64, 32, 16, 32, 64],
            activation: "mish".into(),
            n_train: 500,
            n_val: 100,
            size: 8,
        }
    }
}

/// Optional IDX files replacing the synthetic digits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> LabResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> LabResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be nonnegative, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> LabResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be at least {min}, got {v}"
        )))
    }
}

impl WindowSection {
    pub fn spec(&self) -> LabResult<WindowSpec> {
        let spec = WindowSpec {
            family: WindowFamily::from_str(&self.family)?,
            scale: self.b,
            epsilon: self.epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Config {
    /// Parses and validates a TOML document. Relative paths are resolved
    /// against `base`.
    pub fn from_toml(text: &str, base: &Path) -> LabResult<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        Self::from_toml(&text, &base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.filter.target);
        fix(&mut self.filter.source);
        fix(&mut self.loss.prediction);
        fix(&mut self.loss.target);
        fix(&mut self.recover.target);
        fix(&mut self.data.train_images);
        fix(&mut self.data.train_labels);
        fix(&mut self.data.test_images);
        fix(&mut self.data.test_labels);
    }

    pub fn validate(&self) -> LabResult<()> {
        self.wiener_config()?;
        self.window.spec()?;
        self.penalty.spec()?;

        if self.filter.target.is_some() != self.filter.source.is_some() {
            return Err(config_err(
                "filter needs both target and source, or neither",
            ));
        }
        at_least("filter.size", self.filter.size, 1)?;
        if self.loss.prediction.is_some() != self.loss.target.is_some() {
            return Err(config_err(
                "loss needs both prediction and target, or neither",
            ));
        }
        at_least("loss.size", self.loss.size, 1)?;

        let r = &self.recover;
        at_least("recover.size", r.size, 1)?;
        at_least("recover.stride", r.stride, 1)?;
        LossKind::from_str(&r.loss)?;
        positive("recover.step", r.step)?;

        let d = &self.diffusion;
        match d.dataset.as_str() {
            "two_cluster" => {
                if d.n_defining < 2 || !d.n_defining.is_multiple_of(2) {
                    return Err(config_err(format!(
                        "diffusion.n_defining must be a positive even count for two_cluster, got {}",
                        d.n_defining
                    )));
                }
            }
            "digits" => at_least("diffusion.n_defining", d.n_defining, 1)?,
            other => return Err(config_err(format!("unknown diffusion dataset `{other}`"))),
        }
        at_least("diffusion.size", d.size, 1)?;
        nonnegative("diffusion.spread", d.spread)?;
        at_least("diffusion.T", d.steps, 2)?;
        positive("diffusion.alpha_start", d.alpha_start)?;
        positive("diffusion.alpha_end", d.alpha_end)?;
        nonnegative("diffusion.beta_start", d.beta_start)?;
        nonnegative("diffusion.beta_end", d.beta_end)?;
        nonnegative("diffusion.gamma", d.gamma)?;
        nonnegative("diffusion.lambda", d.lambda)?;
        at_least("diffusion.n_samples", d.n_samples, 1)?;
        if let Some(v) = d.init_variance {
            nonnegative("diffusion.init_variance", v)?;
        }
        at_least("diffusion.snapshot_stride", d.snapshot_stride, 1)?;
        at_least("diffusion.nearest_k", d.nearest_k, 1)?;

        let k = &self.knn;
        at_least("knn.k", k.k, 1)?;
        at_least("knn.baseline_k", k.baseline_k, 1)?;
        if k.max_shift > k.pad {
            return Err(config_err(format!(
                "knn.max_shift ({}) exceeds knn.pad ({})",
                k.max_shift, k.pad
            )));
        }
        at_least("knn.n_train", k.n_train, k.k.max(k.baseline_k))?;
        at_least("knn.n_test", k.n_test, 1)?;
        at_least("knn.size", k.size, 1)?;
        nonnegative("knn.lambda", k.lambda)?;

        let t = &self.train;
        self.train_config()?;
        if t.widths.first() != Some(&(t.size * t.size))
            || t.widths.last() != Some(&(t.size * t.size))
        {
            return Err(config_err(format!(
                "train.widths must start and end with size^2 = {}",
                t.size * t.size
            )));
        }
        at_least("train.n_train", t.n_train, 1)?;

        let data = &self.data;
        if data.train_images.is_some() != data.train_labels.is_some()
            || data.test_images.is_some() != data.test_labels.is_some()
        {
            return Err(config_err("IDX images and labels must be given in pairs"));
        }
        Ok(())
    }

    /// Replaces every seed in the document.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if self.diffusion.seed.is_some() {
            self.diffusion.seed = Some(seed);
        }
    }

    pub fn wiener_config(&self) -> LabResult<WienerConfig> {
        let direction = match self.wiener.direction.as_str() {
            "prediction_as_target" => LossDirection::PredictionAsTarget,
            "prediction_as_source" => LossDirection::PredictionAsSource,
            other => return Err(config_err(format!("unknown wiener.direction `{other}`"))),
        };
        let cfg = WienerConfig {
            lambda: self.wiener.lambda,
            direction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn activation(&self) -> LabResult<Activation> {
        Ok(Activation::from_str(&self.train.activation)?)
    }

    pub fn train_config(&self) -> LabResult<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            loss: LossKind::from_str(&t.loss)?,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            whitening: self.window.spec()?,
            wiener: self.wiener_config()?,
            seed: derive_seed(self.seed, 0x7472_6169),
        };
        cfg.validate()?;
        self.activation()?;
        Ok(cfg)
    }
}

/// Independent sub-seed for the experiment component tagged `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
