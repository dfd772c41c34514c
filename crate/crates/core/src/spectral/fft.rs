//! Complex FFT for arbitrary lengths.
//!
//! Smooth lengths (all prime factors <= 13) use a recursive mixed-radix
//! Cooley-Tukey decomposition; any other length goes through Bluestein's
//! chirp-z algorithm on top of a power-of-two mixed-radix plan.
//!
//! Convention: the forward transform is unnormalized, the inverse is scaled
//! by `1/n`, so `inverse(forward(x)) == x`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

const MAX_SMOOTH_FACTOR: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone)]
enum Algorithm {
    MixedRadix {
        factors: Vec<usize>,
        // e^{-2 pi i j / n} for j in 0..n
        roots: Vec<Complex64>,
    },
    Bluestein {
        inner: Box<FftPlan>,
        // w_j = e^{-i pi j^2 / n}
        chirp: Vec<Complex64>,
        // forward transform of the zero-padded conjugate chirp
        kernel: Vec<Complex64>,
    },
}

/// A precomputed 1D transform of fixed length. Plans are immutable and can be
/// shared across threads.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    algorithm: Algorithm,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    // radix 4 first keeps the recursion shallow for powers of two
    while n.is_multiple_of(4) {
        factors.push(4);
        n /= 4;
    }
    let mut p = 2;
    while n > 1 {
        while n.is_multiple_of(p) {
            factors.push(p);
            n /= p;
        }
        p += 1;
        if p * p > n && n > 1 {
            factors.push(n);
            break;
        }
    }
    factors
}

fn unit_root(j: usize, n: usize) -> Complex64 {
    // reduce before converting to keep the angle exact for large j
    let angle = -2.0 * PI * ((j % n) as f64) / (n as f64);
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let factors = factorize(len);
        let smooth = factors.iter().all(|&p| p <= MAX_SMOOTH_FACTOR);
        if smooth || len <= 64 {
            let roots = (0..len).map(|j| unit_root(j, len)).collect();
            return Self {
                len,
                algorithm: Algorithm::MixedRadix { factors, roots },
            };
        }

        let m = (2 * len - 1).next_power_of_two();
        let inner = FftPlan::new(m);
        let two_n = 2 * len;
        // j^2 mod 2n keeps the chirp argument small
        let chirp: Vec<Complex64> = (0..len)
            .map(|j| {
                let k = (j * j) % two_n;
                let angle = -PI * (k as f64) / (len as f64);
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..len {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.process(&mut kernel, Direction::Forward);
        Self {
            len,
            algorithm: Algorithm::Bluestein {
                inner: Box::new(inner),
                chirp,
                kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transforms `buf` in place. Panics if `buf.len() != self.len()`.
    pub fn process(&self, buf: &mut [Complex64], direction: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.algorithm {
            Algorithm::MixedRadix { factors, roots } => {
                let input: Vec<Complex64> = buf.to_vec();
                let inverse = direction == Direction::Inverse;
                mixed_radix(&input, 0, 1, buf, self.len, factors, roots, 1, inverse);
            }
            Algorithm::Bluestein {
                inner,
                chirp,
                kernel,
            } => {
                // The inverse is conj(F(conj(x))) / n; the 1/n is applied below.
                let inverse = direction == Direction::Inverse;
                let m = kernel.len();
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..self.len {
                    let x = if inverse { buf[j].conj() } else { buf[j] };
                    work[j] = x * chirp[j];
                }
                inner.process(&mut work, Direction::Forward);
                for (w, k) in work.iter_mut().zip(kernel) {
                    *w *= k;
                }
                inner.process(&mut work, Direction::Inverse);
                for j in 0..self.len {
                    let y = work[j] * chirp[j];
                    buf[j] = if inverse { y.conj() } else { y };
                }
            }
        }
        if direction == Direction::Inverse {
            let scale = 1.0 / self.len as f64;
            for x in buf.iter_mut() {
                *x *= scale;
            }
        }
    }
}

/// Unnormalized recursive decimation-in-time step. Reads `n` samples from
/// `input[offset + j * stride]` and writes their DFT into `out[..n]`.
#[allow(clippy::too_many_arguments)]
fn mixed_radix(
    input: &[Complex64],
    offset: usize,
    stride: usize,
    out: &mut [Complex64],
    n: usize,
    factors: &[usize],
    roots: &[Complex64],
    root_stride: usize,
    inverse: bool,
) {
    if n == 1 {
        out[0] = input[offset];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for r in 0..p {
        mixed_radix(
            input,
            offset + r * stride,
            stride * p,
            &mut out[r * m..(r + 1) * m],
            m,
            &factors[1..],
            roots,
            root_stride * p,
            inverse,
        );
    }

    let total = roots.len();
    let root = |j: usize| {
        let w = roots[(j * root_stride) % total];
        if inverse {
            w.conj()
        } else {
            w
        }
    };
    let mut twiddled = [Complex64::new(0.0, 0.0); MAX_SMOOTH_FACTOR];
    let mut scratch: Vec<Complex64>;
    let tw: &mut [Complex64] = if p <= MAX_SMOOTH_FACTOR {
        &mut twiddled[..p]
    } else {
        scratch = vec![Complex64::new(0.0, 0.0); p];
        &mut scratch
    };

    if p == 2 {
        for k in 0..m {
            let a = out[k];
            let b = out[m + k] * root(k);
            out[k] = a + b;
            out[m + k] = a - b;
        }
        return;
    }
    if p == 4 {
        // W_4 = -i (forward) or +i (inverse)
        for k in 0..m {
            let a0 = out[k];
            let a1 = out[m + k] * root(k);
            let a2 = out[2 * m + k] * root(2 * k);
            let a3 = out[3 * m + k] * root(3 * k);
            let s02 = a0 + a2;
            let d02 = a0 - a2;
            let s13 = a1 + a3;
            let d13 = a1 - a3;
            let rot = if inverse {
                Complex64::new(-d13.im, d13.re)
            } else {
                Complex64::new(d13.im, -d13.re)
            };
            out[k] = s02 + s13;
            out[m + k] = d02 + rot;
            out[2 * m + k] = s02 - s13;
            out[3 * m + k] = d02 - rot;
        }
        return;
    }

    for k in 0..m {
        for r in 0..p {
            tw[r] = out[r * m + k] * root(r * k);
        }
        for q in 0..p {
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, t) in tw.iter().enumerate() {
                // W_p^{rq} = W_n^{rqm}
                acc += *t * root(((r * q) % p) * m);
            }
            out[q * m + k] = acc;
        }
    }
}

/// Row/column plans for a one- or two-dimensional grid.
#[derive(Debug, Clone)]
pub struct FftPlan2d {
    rows: usize,
    cols: usize,
    row_plan: FftPlan,
    col_plan: Option<FftPlan>,
}

impl FftPlan2d {
    /// `rows == 1` describes a 1D transform of length `cols`.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_plan: FftPlan::new(cols),
            col_plan: (rows > 1).then(|| FftPlan::new(rows)),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transforms a row-major plane in place.
    pub fn process(&self, plane: &mut [Complex64], direction: Direction) {
        assert_eq!(plane.len(), self.len(), "plane length does not match plan");
        for row in plane.chunks_exact_mut(self.cols) {
            self.row_plan.process(row, direction);
        }
        if let Some(col_plan) = &self.col_plan {
            let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
            for c in 0..self.cols {
                for r in 0..self.rows {
                    column[r] = plane[r * self.cols + c];
                }
                col_plan.process(&mut column, direction);
                for r in 0..self.rows {
                    plane[r * self.cols + c] = column[r];
                }
            }
        }
    }

    /// Forward transform of a real plane.
    pub fn forward_real(&self, plane: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = plane.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.process(&mut buf, Direction::Forward);
        buf
    }

    /// Inverse transform returning the real part and the largest discarded
    /// imaginary magnitude.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> (Vec<f64>, f64) {
        let mut buf = spectrum.to_vec();
        self.process(&mut buf, Direction::Inverse);
        let residue = buf.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
        (buf.iter().map(|z| z.re).collect(), residue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * unit_root(j * k, n))
                    .sum()
            })
            .collect()
    }

    fn ramp(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                Complex64::new(
                    libm::sin(j as f64 * 0.7) + 0.1 * j as f64,
                    libm::cos(j as f64 * 1.3),
                )
            })
            .collect()
    }

    #[test]
    fn factorization_covers_length() {
        for n in 1..200 {
            assert_eq!(factorize(n).iter().product::<usize>().max(1), n);
        }
    }

    #[test]
    fn matches_naive_dft_on_small_lengths() {
        // includes primes > 13 below the Bluestein cutoff and a few above it
        for n in (1..70).chain([97, 127, 134, 202]) {
            let x = ramp(n);
            let expected = naive_dft(&x);
            let mut got = x.clone();
            FftPlan::new(n).process(&mut got, Direction::Forward);
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-9 * (n as f64), "n = {n}");
            }
        }
    }

    #[test]
    fn bluestein_round_trip() {
        let x = ramp(131);
        let plan = FftPlan::new(131);
        let mut y = x.clone();
        plan.process(&mut y, Direction::Forward);
        plan.process(&mut y, Direction::Inverse);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
