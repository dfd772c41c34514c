#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wienerlab_core::spectral::Signal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Signal {
    let n = shape.iter().product();
    Signal::new((0..n).map(|_| rng.random::<f64>()).collect(), shape).unwrap()
}

/// Random values inside, zeros within `margin` of every border.
pub fn with_margin(rng: &mut ChaCha8Rng, shape: &[usize], margin: usize) -> Signal {
    let mut s = uniform(rng, shape);
    let (rows, cols) = match shape {
        [c] => (1, *c),
        [r, c] => (*r, *c),
        _ => unreachable!(),
    };
    for r in 0..rows {
        for c in 0..cols {
            let edge_r = rows > 1 && (r < margin || r >= rows - margin);
            if edge_r || c < margin || c >= cols - margin {
                s.data_mut()[r * cols + c] = 0.0;
            }
        }
    }
    s
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
