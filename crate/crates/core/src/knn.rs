//! Brute-force k-nearest-neighbour classification under Manhattan,
//! Euclidean or translation-invariant Wiener distances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::spectral::{as_rows_cols, Signal};
use crate::wiener::{PreparedSignal, WienerConfig, WienerEngine};

pub const NUM_CLASSES: usize = 10;

/// Signals of one shape with class ids in `0..NUM_CLASSES`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    signals: Vec<Signal>,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(signals: Vec<Signal>, labels: Vec<u8>) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} signals but {} labels",
                signals.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside 0..{NUM_CLASSES}"
            )));
        }
        if let Some(first) = signals.first() {
            if let Some(i) = signals.iter().position(|s| !s.same_layout(first)) {
                return Err(Error::Shape(format!(
                    "signal {i} differs in shape from signal 0"
                )));
            }
        }
        Ok(Self { signals, labels })
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// The first `n` entries.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            signals: self.signals[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Manhattan,
    Euclidean,
    /// Negative peak of the standardized matching filter.
    WienerTi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    /// Only consulted by [`DistanceKind::WienerTi`].
    pub wiener_cfg: WienerConfig,
}

impl DistanceSpec {
    pub fn manhattan() -> Self {
        Self {
            kind: DistanceKind::Manhattan,
            wiener_cfg: WienerConfig::default(),
        }
    }

    pub fn euclidean() -> Self {
        Self {
            kind: DistanceKind::Euclidean,
            wiener_cfg: WienerConfig::default(),
        }
    }

    pub fn wiener_ti(wiener_cfg: WienerConfig) -> Self {
        Self {
            kind: DistanceKind::WienerTi,
            wiener_cfg,
        }
    }
}

/// A training set with any per-sample precomputation the metric needs.
#[derive(Debug, Clone)]
pub struct KnnIndex<'a> {
    train: &'a LabeledSet,
    dist: DistanceSpec,
    wiener: Option<(WienerEngine, Vec<PreparedSignal>)>,
}

impl<'a> KnnIndex<'a> {
    pub fn new(train: &'a LabeledSet, dist: DistanceSpec) -> Result<Self> {
        let first = train
            .signals
            .first()
            .ok_or_else(|| Error::Config("training set is empty".into()))?;
        let wiener = match dist.kind {
            DistanceKind::WienerTi => {
                dist.wiener_cfg.validate()?;
                let engine = WienerEngine::new(first.shape())?;
                let prepared = train
                    .signals
                    .iter()
                    .map(|s| engine.prepare(s))
                    .collect::<Result<Vec<_>>>()?;
                Some((engine, prepared))
            }
            _ => None,
        };
        Ok(Self {
            train,
            dist,
            wiener,
        })
    }

    /// Distance from `query` to every training signal, in training order.
    pub fn distances(&self, query: &Signal) -> Result<Vec<f64>> {
        self.train.signals[0].ensure_same_layout(query)?;
        match (&self.wiener, self.dist.kind) {
            (Some((engine, prepared)), _) => {
                let q = engine.prepare(query)?;
                prepared
                    .iter()
                    .map(|t| Ok(engine.ti_distance(&q, t, &self.dist.wiener_cfg)?.value))
                    .collect()
            }
            (None, DistanceKind::Manhattan) => Ok(self
                .train
                .signals
                .iter()
                .map(|t| {
                    t.data()
                        .iter()
                        .zip(query.data())
                        .map(|(a, b)| (a - b).abs())
                        .sum()
                })
                .collect()),
            (None, _) => Ok(self
                .train
                .signals
                .iter()
                .map(|t| libm::sqrt(t.distance_sq(query)))
                .collect()),
        }
    }

    /// Training indices ordered by (distance, index).
    pub fn ranking(&self, query: &Signal) -> Result<Vec<(usize, f64)>> {
        let d = self.distances(query)?;
        let mut order: Vec<(usize, f64)> = d.into_iter().enumerate().collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(order)
    }

    pub fn classify(&self, query: &Signal, k: usize) -> Result<u8> {
        if k == 0 || k > self.train.len() {
            return Err(Error::Config(format!(
                "k = {k} must lie in 1..={}",
                self.train.len()
            )));
        }
        let ranking = self.ranking(query)?;
        let mut votes = [0usize; NUM_CLASSES];
        let mut summed = [0.0f64; NUM_CLASSES];
        for &(i, d) in &ranking[..k] {
            let label = self.train.labels[i] as usize;
            votes[label] += 1;
            summed[label] += d;
        }
        let mut best = None::<usize>;
        for class in 0..NUM_CLASSES {
            if votes[class] == 0 {
                continue;
            }
            best = match best {
                None => Some(class),
                Some(b) if votes[class] > votes[b] => Some(class),
                Some(b) if votes[class] == votes[b] && summed[class] < summed[b] => Some(class),
                keep => keep,
            };
        }
        Ok(best.expect("k >= 1 casts at least one vote") as u8)
    }
}

/// Majority vote among the `k` nearest training signals. Vote ties go to
/// the class with the smaller summed distance, then to the lower class id.
pub fn knn_classify(
    train: &LabeledSet,
    query: &Signal,
    k: usize,
    dist: &DistanceSpec,
) -> Result<u8> {
    KnnIndex::new(train, *dist)?.classify(query, k)
}

/// Zero-pads each signal by `pad` on every side, then translates it by an
/// independent uniform integer offset in `[-max_shift, max_shift]` per
/// dimension.
pub fn make_translated_set(
    base: &LabeledSet,
    max_shift: usize,
    pad: usize,
    seed: u64,
) -> Result<LabeledSet> {
    if max_shift > pad {
        return Err(Error::Config(format!(
            "shift of {max_shift} exceeds padding of {pad}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = max_shift as isize;
    let mut out = Vec::with_capacity(base.len());
    for s in &base.signals {
        let padded = pad_border(s, pad)?;
        let offsets: Vec<isize> = (0..s.rank())
            .map(|_| {
                if m == 0 {
                    0
                } else {
                    rng.random_range(-(m as i64)..=m as i64) as isize
                }
            })
            .collect();
        out.push(padded.roll(&offsets)?);
    }
    LabeledSet::new(out, base.labels.clone())
}

/// Surrounds every plane with `pad` zeros on each side.
pub fn pad_border(s: &Signal, pad: usize) -> Result<Signal> {
    let (rows, cols) = as_rows_cols(s.shape());
    let two_d = s.rank() == 2;
    let (prows, pcols) = if two_d {
        (rows + 2 * pad, cols + 2 * pad)
    } else {
        (1, cols + 2 * pad)
    };
    let row_off = if two_d { pad } else { 0 };
    let mut data = vec![0.0; s.channels() * prows * pcols];
    for (src, dst) in s.planes().zip(data.chunks_exact_mut(prows * pcols)) {
        for r in 0..rows {
            let start = (r + row_off) * pcols + pad;
            dst[start..start + cols].copy_from_slice(&src[r * cols..(r + 1) * cols]);
        }
    }
    let shape: Vec<usize> = if two_d {
        vec![prows, pcols]
    } else {
        vec![pcols]
    };
    Signal::with_channels(data, &shape, s.channels())
}

/// Accuracy of a classifier together with its confusion matrix
/// (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Vec<[usize; NUM_CLASSES]>,
    pub predictions: Vec<u8>,
}

impl Evaluation {
    pub fn from_predictions(truth: &[u8], predictions: Vec<u8>) -> Self {
        let mut confusion = vec![[0usize; NUM_CLASSES]; NUM_CLASSES];
        let mut correct = 0;
        for (&t, &p) in truth.iter().zip(&predictions) {
            confusion[t as usize][p as usize] += 1;
            if t == p {
                correct += 1;
            }
        }
        Self {
            accuracy: correct as f64 / truth.len().max(1) as f64,
            confusion,
            predictions,
        }
    }
}

/// Classifies every test signal against `train`.
pub fn evaluate_accuracy(
    train: &LabeledSet,
    test: &LabeledSet,
    k: usize,
    dist: &DistanceSpec,
) -> Result<Evaluation> {
    let index = KnnIndex::new(train, *dist)?;
    let predictions = test
        .signals
        .iter()
        .map(|q| index.classify(q, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_predictions(&test.labels, predictions))
}
