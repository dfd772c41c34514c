use rayon::prelude::*;
use serde::Serialize;
use wienerlab_core::knn::{
    make_translated_set, DistanceSpec, Evaluation, KnnIndex, LabeledSet, NUM_CLASSES,
};
use wienerlab_core::wiener::WienerConfig;

use crate::config::{derive_seed, Config};
use crate::digits::{synthetic_digits, DigitStyle};
use crate::error::LabResult;
use crate::formats::idx::ingest;
use crate::run::RunDir;

/// Padded training set and translated queries.
pub struct Inputs {
    pub train: LabeledSet,
    pub test: LabeledSet,
}

pub fn prepare(cfg: &Config) -> LabResult<Inputs> {
    let k = &cfg.knn;
    let style = DigitStyle::default();
    let train = match (&cfg.data.train_images, &cfg.data.train_labels) {
        (Some(i), Some(l)) => ingest(i, l)?.take(k.n_train),
        _ => synthetic_digits(k.n_train, k.size, &style, derive_seed(cfg.seed, 0x6b74))?,
    };
    let test = match (&cfg.data.test_images, &cfg.data.test_labels) {
        (Some(i), Some(l)) => ingest(i, l)?.take(k.n_test),
        _ => synthetic_digits(k.n_test, k.size, &style, derive_seed(cfg.seed, 0x6b65))?,
    };
    Ok(Inputs {
        train: make_translated_set(&train, 0, k.pad, 0)?,
        test: make_translated_set(&test, k.max_shift, k.pad, derive_seed(cfg.seed, 0x6b73))?,
    })
}

/// Classifies every query in parallel; results keep query order.
pub fn evaluate_parallel(
    train: &LabeledSet,
    test: &LabeledSet,
    k: usize,
    dist: DistanceSpec,
) -> LabResult<Evaluation> {
    let index = KnnIndex::new(train, dist)?;
    let predictions = test
        .signals()
        .par_iter()
        .map(|q| index.classify(q, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evaluation::from_predictions(test.labels(), predictions))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub distance: &'static str,
    pub k: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<[usize; NUM_CLASSES]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnReport {
    pub n_train: usize,
    pub n_test: usize,
    pub max_shift: usize,
    pub lambda: f64,
    pub baseline: MethodReport,
    pub wiener_ti: MethodReport,
    pub gap: f64,
}

pub struct KnnOutcome {
    pub report: KnnReport,
    pub truth: Vec<u8>,
    pub baseline: Vec<u8>,
    pub wiener: Vec<u8>,
}

pub fn compute(inputs: &Inputs, cfg: &Config) -> LabResult<KnnOutcome> {
    let k = &cfg.knn;
    let base = evaluate_parallel(
        &inputs.train,
        &inputs.test,
        k.baseline_k,
        DistanceSpec::manhattan(),
    )?;
    let ti = evaluate_parallel(
        &inputs.train,
        &inputs.test,
        k.k,
        DistanceSpec::wiener_ti(WienerConfig::with_lambda(k.lambda)),
    )?;
    let report = KnnReport {
        n_train: inputs.train.len(),
        n_test: inputs.test.len(),
        max_shift: k.max_shift,
        lambda: k.lambda,
        gap: ti.accuracy - base.accuracy,
        baseline: MethodReport {
            distance: "manhattan",
            k: k.baseline_k,
            accuracy: base.accuracy,
            confusion: base.confusion,
        },
        wiener_ti: MethodReport {
            distance: "wiener_ti",
            k: k.k,
            accuracy: ti.accuracy,
            confusion: ti.confusion,
        },
    };
    Ok(KnnOutcome {
        report,
        truth: inputs.test.labels().to_vec(),
        baseline: base.predictions,
        wiener: ti.predictions,
    })
}

pub fn write(out: &KnnOutcome, dir: &RunDir) -> LabResult<()> {
    let rows: Vec<(usize, u8, u8, u8)> = (0..out.truth.len())
        .map(|i| (i, out.truth[i], out.baseline[i], out.wiener[i]))
        .collect();
    dir.write_csv(
        "predictions.csv",
        &["query", "label", "manhattan", "wiener_ti"],
        &rows,
    )?;
    dir.write_json("knn.json", &out.report)
}
