mod common;

use common::{max_abs, max_abs_diff, uniform, with_margin};
use proptest::prelude::*;
use wienerlab_core::spectral::{make_window, LagFilter, LagGrid, Signal, WindowSpec};
use wienerlab_core::wiener::{
    concentration, rayleigh_quotient, ti_distance, wiener_filter, wiener_filter_direct,
    wiener_loss, WienerConfig,
};

fn relative_max_norm(fast: &LagFilter, direct: &LagFilter) -> f64 {
    max_abs_diff(fast.data(), direct.data()) / max_abs(direct.data()).max(1e-300)
}

fn is_delta_at(v: &LagFilter, lag: (isize, isize), tol: f64) -> bool {
    let at = v.grid().flat_of(lag).unwrap();
    v.data()
        .iter()
        .enumerate()
        .all(|(i, &x)| (x - if i == at { 1.0 } else { 0.0 }).abs() < tol)
}

#[test]
fn oracle_agrees_on_random_pairs() {
    let mut rng = common::rng(10);
    for lambda in [1e-3, 1.0, 250.0] {
        for len in (8..=32).step_by(3) {
            let (x, y) = (uniform(&mut rng, &[len]), uniform(&mut rng, &[len]));
            let cfg = WienerConfig::with_lambda(lambda);
            let err = relative_max_norm(
                &wiener_filter(&x, &y, &cfg).unwrap(),
                &wiener_filter_direct(&x, &y, &cfg).unwrap(),
            );
            assert!(err < 1e-8, "1D len {len} lambda {lambda}: {err}");
        }
        for _ in 0..3 {
            let (x, y) = (uniform(&mut rng, &[6, 6]), uniform(&mut rng, &[6, 6]));
            let cfg = WienerConfig::with_lambda(lambda);
            let err = relative_max_norm(
                &wiener_filter(&x, &y, &cfg).unwrap(),
                &wiener_filter_direct(&x, &y, &cfg).unwrap(),
            );
            assert!(err < 1e-8, "2D lambda {lambda}: {err}");
        }
    }
}

#[test]
fn oracle_identity_is_delta() {
    let mut rng = common::rng(11);
    let y = uniform(&mut rng, &[9]);
    let v = wiener_filter_direct(&y, &y, &WienerConfig::with_lambda(0.7)).unwrap();
    assert!(is_delta_at(&v, (0, 0), 1e-10));
}

#[test]
fn shifted_three_bins_under_inverted_laplace() {
    let mut rng = common::rng(12);
    let y = with_margin(&mut rng, &[16], 4);
    let x = y.roll(&[3]).unwrap();
    let grid = LagGrid::for_signal_shape(&[16]).unwrap();
    let w = make_window(&WindowSpec::inverted_laplace(2.0), &grid).unwrap();
    let loss = wiener_loss(&x, &y, &w, &WienerConfig::with_lambda(0.0)).unwrap();
    // translated delta: one unit residual at zero lag (weight 0) and one at lag 3
    let expected = 0.5 * (1.0 - (-1.5f64).exp()).powi(2) + 0.5 * 0.0;
    assert!((loss - expected).abs() < 1e-9, "{loss} vs {expected}");
    assert!((loss - 0.301_77).abs() < 1e-5);
}

#[test]
fn translation_distance_ignores_cyclic_shift() {
    let mut rng = common::rng(13);
    let cfg = WienerConfig::with_lambda(0.0);
    for _ in 0..10 {
        let y = with_margin(&mut rng, &[10, 10], 3);
        let base = ti_distance(&y, &y, &cfg).unwrap().value;
        for k in [(-3isize, 2isize), (1, 1), (3, -3), (0, -2)] {
            let moved = y.roll(&[k.0, k.1]).unwrap();
            let d = ti_distance(&moved, &y, &cfg).unwrap().value;
            assert!((d - base).abs() < 1e-9, "{k:?}: {d} vs {base}");
        }
        // self-distance is the one-hot value -sqrt(n - 1)
        assert!((base + (399f64).sqrt()).abs() < 1e-6);
    }
}

#[test]
fn self_distance_beats_noise() {
    let mut rng = common::rng(14);
    let cfg = WienerConfig::default();
    let wins = (0..100)
        .filter(|_| {
            let y = uniform(&mut rng, &[8, 8]);
            let noise = uniform(&mut rng, &[8, 8]);
            ti_distance(&y, &y, &cfg).unwrap().value <= ti_distance(&noise, &y, &cfg).unwrap().value
        })
        .count();
    assert!(wins >= 99, "{wins}/100");
}

#[test]
fn noise_filters_are_diffuse() {
    let mut rng = common::rng(15);
    for _ in 0..10 {
        let (x, y) = (uniform(&mut rng, &[16, 16]), uniform(&mut rng, &[16, 16]));
        let noise = x
            .with_data(x.data().iter().map(|v| v - 0.5).collect())
            .unwrap();
        let c =
            concentration(&wiener_filter(&noise, &y, &WienerConfig::default()).unwrap()).unwrap();
        assert!(c < 0.1, "{c}");
    }
}

fn signal_1d(len: std::ops::Range<usize>) -> impl Strategy<Value = Signal> {
    len.prop_flat_map(|n| prop::collection::vec(0.0f64..1.0, n))
        .prop_map(|v| {
            let n = v.len();
            Signal::new(v, &[n]).unwrap()
        })
}

fn pair_1d(len: std::ops::Range<usize>) -> impl Strategy<Value = (Signal, Signal)> {
    len.prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
    .prop_map(|(a, b)| {
        let n = a.len();
        (Signal::new(a, &[n]).unwrap(), Signal::new(b, &[n]).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_path_equals_oracle((x, y) in pair_1d(4..24), lambda in prop::sample::select(vec![1e-3, 1.0, 250.0])) {
        let cfg = WienerConfig::with_lambda(lambda);
        let err = relative_max_norm(&wiener_filter(&x, &y, &cfg).unwrap(), &wiener_filter_direct(&x, &y, &cfg).unwrap());
        prop_assert!(err < 1e-8, "{}", err);
    }

    #[test]
    fn identity_gives_delta(y in signal_1d(1..40), lambda in 1e-6f64..500.0) {
        prop_assume!(y.norm_sq() > 0.0 || lambda > 0.0);
        let v = wiener_filter(&y, &y, &WienerConfig::with_lambda(lambda)).unwrap();
        prop_assert!(is_delta_at(&v, (0, 0), 1e-10));
    }

    #[test]
    fn shift_moves_the_delta(seed in any::<u64>(), dr in -3isize..=3, dc in -3isize..=3) {
        let y = with_margin(&mut common::rng(seed), &[11, 11], 3);
        let v = wiener_filter(&y.roll(&[dr, dc]).unwrap(), &y, &WienerConfig::with_lambda(0.0)).unwrap();
        prop_assert!(is_delta_at(&v, (dr, dc), 1e-9));
    }

    #[test]
    fn loss_is_nonnegative((x, y) in pair_1d(2..20), lambda in 0.01f64..10.0, b in 0.5f64..6.0) {
        let grid = LagGrid::for_signal_shape(x.shape()).unwrap();
        let w = make_window(&WindowSpec::laplace(b, 0.1), &grid).unwrap();
        let cfg = WienerConfig::with_lambda(lambda);
        prop_assert!(wiener_loss(&x, &y, &w, &cfg).unwrap() >= 0.0);
        prop_assert_eq!(wiener_loss(&y, &y, &w, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rayleigh_is_scale_invariant((x, y) in pair_1d(2..20), c in prop::num::f64::NORMAL.prop_filter("moderate", |c| c.abs() > 1e-3 && c.abs() < 1e3)) {
        let v = wiener_filter(&x, &y, &WienerConfig::default()).unwrap();
        let t = make_window(&WindowSpec::inverted_laplace(2.0), v.grid()).unwrap();
        let scaled = LagFilter::new(v.grid().clone(), v.data().iter().map(|a| a * c).collect(), 1).unwrap();
        let (r, rs) = (rayleigh_quotient(&v, &t).unwrap(), rayleigh_quotient(&scaled, &t).unwrap());
        prop_assert!((r - rs).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn distance_is_translation_invariant(seed in any::<u64>(), k in -4isize..=4) {
        let mut rng = common::rng(seed);
        let a = with_margin(&mut rng, &[20], 4);
        let b = uniform(&mut rng, &[20]);
        let cfg = WienerConfig::with_lambda(0.0);
        let d0 = ti_distance(&a, &b, &cfg).unwrap().value;
        let d1 = ti_distance(&a.roll(&[k]).unwrap(), &b, &cfg).unwrap().value;
        prop_assert!((d0 - d1).abs() < 1e-9, "{} vs {}", d0, d1);
    }

    #[test]
    fn windows_are_nonnegative_and_finite(b in 0.1f64..20.0, eps in 0.0f64..1.0, rows in 1usize..12, cols in 1usize..12) {
        let grid = LagGrid::for_signal_shape(&[rows, cols]).unwrap();
        for spec in [WindowSpec::laplace(b, eps), WindowSpec::inverted_laplace(b)] {
            let w = make_window(&spec, &grid).unwrap();
            prop_assert!(w.data().iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        let t = make_window(&WindowSpec::inverted_laplace(b), &grid).unwrap();
        prop_assert_eq!(t.zero_lag_value(0), 0.0);
    }
}
