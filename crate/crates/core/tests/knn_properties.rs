mod common;

use common::{uniform, with_margin};
use proptest::prelude::*;
use wienerlab_core::knn::{
    evaluate_accuracy, make_translated_set, DistanceSpec, KnnIndex, LabeledSet,
};
use wienerlab_core::spectral::Signal;
use wienerlab_core::wiener::WienerConfig;

fn random_set(seed: u64, n: usize, shape: &[usize]) -> LabeledSet {
    let mut rng = common::rng(seed);
    let signals = (0..n).map(|_| uniform(&mut rng, shape)).collect();
    LabeledSet::new(signals, (0..n).map(|i| (i % 10) as u8).collect()).unwrap()
}

#[test]
fn training_set_classifies_itself() {
    let set = random_set(40, 30, &[6, 6]);
    for dist in [
        DistanceSpec::manhattan(),
        DistanceSpec::euclidean(),
        DistanceSpec::wiener_ti(WienerConfig::default()),
    ] {
        assert_eq!(
            evaluate_accuracy(&set, &set, 1, &dist).unwrap().accuracy,
            1.0
        );
    }
}

#[test]
fn cyclic_shift_preserves_ranking() {
    let mut rng = common::rng(41);
    let train = random_set(42, 25, &[12, 12]);
    let index = KnnIndex::new(
        &train,
        DistanceSpec::wiener_ti(WienerConfig::with_lambda(0.0)),
    )
    .unwrap();
    for _ in 0..5 {
        let q = with_margin(&mut rng, &[12, 12], 3);
        let base = index.ranking(&q).unwrap();
        let moved = index.ranking(&q.roll(&[2, -3]).unwrap()).unwrap();
        for ((i, d), (j, e)) in base.iter().zip(&moved) {
            assert_eq!(i, j);
            assert!((d - e).abs() < 1e-9);
        }
    }
}

#[test]
fn classification_is_deterministic() {
    let train = random_set(43, 40, &[8, 8]);
    let test = random_set(44, 10, &[8, 8]);
    let dist = DistanceSpec::wiener_ti(WienerConfig::default());
    let a = evaluate_accuracy(&train, &test, 5, &dist).unwrap();
    let b = evaluate_accuracy(&train, &test, 5, &dist).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn padding_and_shift_keep_mass(seed in any::<u64>(), max_shift in 0usize..5, extra in 0usize..3, n in 1usize..6) {
        let base = random_set(seed, n, &[7, 5]);
        let moved = make_translated_set(&base, max_shift, max_shift + extra, seed).unwrap();
        for (a, b) in base.signals().iter().zip(moved.signals()) {
            prop_assert!((a.sum() - b.sum()).abs() < 1e-12);
            prop_assert_eq!(b.shape(), &[7 + 2 * (max_shift + extra), 5 + 2 * (max_shift + extra)][..]);
        }
        prop_assert_eq!(moved.labels(), base.labels());
        prop_assert_eq!(&make_translated_set(&base, max_shift, max_shift + extra, seed).unwrap(), &moved);
    }

    #[test]
    fn unshifted_copies_at_zero_shift(seed in any::<u64>()) {
        let base = random_set(seed, 3, &[4, 4]);
        let padded = make_translated_set(&base, 0, 2, seed).unwrap();
        for (a, b) in base.signals().iter().zip(padded.signals()) {
            let inner: Vec<f64> = (0..4).flat_map(|r| b.data()[(r + 2) * 8 + 2..(r + 2) * 8 + 6].to_vec()).collect();
            prop_assert_eq!(a.data(), &inner[..]);
        }
    }
}

#[test]
fn one_dimensional_sets_pad_too() {
    let s = Signal::new(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let set = LabeledSet::new(vec![s], vec![1]).unwrap();
    let p = make_translated_set(&set, 0, 2, 0).unwrap();
    assert_eq!(p.signals()[0].data(), &[0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 0.0]);
}
