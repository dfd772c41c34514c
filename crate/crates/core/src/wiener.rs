//! Data-matching Wiener filters and the comparison functionals built on them.
//!
//! For a target `x` and a source `y`, both zero-padded to full lag, the
//! filter is
//!
//! ```text
//! v = IFFT[ (conj(Y) X + lambda) / (conj(Y) Y + lambda) ]
//! ```
//!
//! i.e. the least-squares filter that convolves `y` into `x`, with `lambda`
//! entering numerator and denominator so that `v(y, y)` is exactly the
//! zero-lag delta. Filters are returned on the centered lag grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::fft::FftPlan2d;
use crate::spectral::{as_rows_cols, center_plane, check_real, LagFilter, LagGrid, Signal};

/// Largest imaginary residue tolerated on an inverse-transformed filter.
pub const FILTER_RESIDUE_TOL: f64 = 1e-8;

/// Padded plane size accepted by [`wiener_filter_direct`].
pub const DIRECT_ORACLE_CAP: usize = 4096;

/// Relative size below which a denominator bin counts as zero when
/// `lambda == 0`.
const SINGULAR_REL_TOL: f64 = 1e-14;

/// Which side of a loss the varying signal occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossDirection {
    /// The filter convolves the target into the prediction
    /// (`v = wiener_filter(target = prediction, source = target)`).
    #[default]
    PredictionAsTarget,
    /// The filter convolves the prediction into the target.
    PredictionAsSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerConfig {
    /// Pre-whitening scalar added to numerator and denominator.
    pub lambda: f64,
    pub direction: LossDirection,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            direction: LossDirection::PredictionAsTarget,
        }
    }
}

impl WienerConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Spectra of a zero-padded signal, one plane per channel.
#[derive(Debug, Clone)]
pub struct PreparedSignal {
    shape: Vec<usize>,
    channels: usize,
    spectra: Vec<Complex64>,
}

impl PreparedSignal {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub(crate) fn plane(&self, channel: usize, len: usize) -> &[Complex64] {
        &self.spectra[channel * len..(channel + 1) * len]
    }
}

/// Transform plans for one signal shape. Reusing an engine avoids
/// recomputing twiddles when many filters share a shape.
#[derive(Debug, Clone)]
pub struct WienerEngine {
    shape: Vec<usize>,
    grid: LagGrid,
    plan: FftPlan2d,
}

impl WienerEngine {
    pub fn new(signal_shape: &[usize]) -> Result<Self> {
        let grid = LagGrid::for_signal_shape(signal_shape)?;
        let plan = grid.plan();
        Ok(Self {
            shape: signal_shape.to_vec(),
            grid,
            plan,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn grid(&self) -> &LagGrid {
        &self.grid
    }

    pub(crate) fn plan(&self) -> &FftPlan2d {
        &self.plan
    }

    fn ensure_shape(&self, s: &[usize]) -> Result<()> {
        if s != self.shape.as_slice() {
            return Err(Error::Shape(format!(
                "signal shape {s:?} does not match engine shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Pads and transforms every plane of `s`.
    pub fn prepare(&self, s: &Signal) -> Result<PreparedSignal> {
        self.ensure_shape(s.shape())?;
        let (rows, cols) = as_rows_cols(s.shape());
        let (prows, pcols) = self.plan.dims();
        let mut spectra = Vec::with_capacity(s.channels() * prows * pcols);
        let mut buf = vec![Complex64::new(0.0, 0.0); prows * pcols];
        for plane in s.planes() {
            buf.fill(Complex64::new(0.0, 0.0));
            for r in 0..rows {
                for c in 0..cols {
                    buf[r * pcols + c] = Complex64::new(plane[r * cols + c], 0.0);
                }
            }
            self.plan
                .process(&mut buf, crate::spectral::fft::Direction::Forward);
            spectra.extend_from_slice(&buf);
        }
        Ok(PreparedSignal {
            shape: s.shape().to_vec(),
            channels: s.channels(),
            spectra,
        })
    }

    fn ensure_pair(&self, target: &PreparedSignal, source: &PreparedSignal) -> Result<()> {
        self.ensure_shape(&target.shape)?;
        self.ensure_shape(&source.shape)?;
        if target.channels != source.channels {
            return Err(Error::Shape(format!(
                "channel count {} vs {}",
                target.channels, source.channels
            )));
        }
        Ok(())
    }

    /// Filter spectrum of one channel: `(conj(S) T + lambda) / (|S|^2 + lambda)`.
    pub(crate) fn ratio(
        &self,
        target: &[Complex64],
        source: &[Complex64],
        lambda: f64,
    ) -> Result<Vec<Complex64>> {
        if lambda == 0.0 {
            let max = source.iter().fold(0.0f64, |m, s| m.max(s.norm_sqr()));
            if source
                .iter()
                .any(|s| s.norm_sqr() <= SINGULAR_REL_TOL * max)
                || max == 0.0
            {
                return Err(Error::Singular);
            }
        }
        Ok(target
            .iter()
            .zip(source)
            .map(|(t, s)| (s.conj() * t + lambda) / (s.norm_sqr() + lambda))
            .collect())
    }

    /// Inverse transform of a filter spectrum onto the centered lag grid.
    pub(crate) fn centered_from_spectrum(
        &self,
        spectrum: &[Complex64],
        out: &mut [f64],
    ) -> Result<()> {
        // a flat real spectrum is a scaled delta; skip the transform's round-off
        let first = spectrum[0];
        if first.im == 0.0 && spectrum.iter().all(|&z| z == first) {
            out.fill(0.0);
            out[self.grid.zero_lag_flat()] = first.re;
            return Ok(());
        }
        let (raw, residue) = self.plan.inverse_real(spectrum);
        check_real(&raw, residue, FILTER_RESIDUE_TOL)?;
        center_plane(&raw, out, &self.grid);
        Ok(())
    }

    pub fn filter(
        &self,
        target: &PreparedSignal,
        source: &PreparedSignal,
        cfg: &WienerConfig,
    ) -> Result<LagFilter> {
        cfg.validate()?;
        self.ensure_pair(target, source)?;
        let n = self.grid.len();
        let mut data = vec![0.0; target.channels * n];
        for (c, out) in data.chunks_exact_mut(n).enumerate() {
            let spectrum = self.ratio(target.plane(c, n), source.plane(c, n), cfg.lambda)?;
            self.centered_from_spectrum(&spectrum, out)?;
        }
        LagFilter::new(self.grid.clone(), data, target.channels)
    }

    pub fn ti_distance(
        &self,
        a: &PreparedSignal,
        b: &PreparedSignal,
        cfg: &WienerConfig,
    ) -> Result<TiDistance> {
        let v = self.filter(a, b, cfg)?;
        Ok(standardized_peak(&v))
    }
}

/// The least-squares filter that convolves `source` into `target`, computed
/// in the Fourier domain.
pub fn wiener_filter(target: &Signal, source: &Signal, cfg: &WienerConfig) -> Result<LagFilter> {
    target.ensure_same_layout(source)?;
    cfg.validate()?;
    let engine = WienerEngine::new(target.shape())?;
    let t = engine.prepare(target)?;
    let s = engine.prepare(source)?;
    engine.filter(&t, &s, cfg)
}

/// Exact dense solution of the padded circulant least-squares problem
/// `(C^T C + lambda I) v = C^T x + lambda delta`, where `C` is circular
/// convolution with the padded source. Cubic cost; capped at
/// [`DIRECT_ORACLE_CAP`] padded elements.
pub fn wiener_filter_direct(
    target: &Signal,
    source: &Signal,
    cfg: &WienerConfig,
) -> Result<LagFilter> {
    target.ensure_same_layout(source)?;
    cfg.validate()?;
    let grid = LagGrid::for_signal_shape(target.shape())?;
    let size = grid.len();
    if size > DIRECT_ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            size,
            cap: DIRECT_ORACLE_CAP,
        });
    }
    let (rows, cols) = as_rows_cols(target.shape());
    let (prows, pcols) = grid.rows_cols();
    let pad = |plane: &[f64]| {
        let mut out = vec![0.0; size];
        for r in 0..rows {
            out[r * pcols..r * pcols + cols].copy_from_slice(&plane[r * cols..(r + 1) * cols]);
        }
        out
    };

    let mut data = vec![0.0; target.channels() * size];
    for (c, out) in data.chunks_exact_mut(size).enumerate() {
        let x = pad(target.plane(c));
        let y = pad(source.plane(c));
        // (C v)[n] = sum_m y[n - m] v[m], indices taken modulo the padded extents
        let circulant = DMatrix::from_fn(size, size, |n, m| {
            let (nr, nc) = (n / pcols, n % pcols);
            let (mr, mc) = (m / pcols, m % pcols);
            let r = (nr + prows - mr) % prows;
            let cc = (nc + pcols - mc) % pcols;
            y[r * pcols + cc]
        });
        let ct = circulant.transpose();
        let mut normal = &ct * &circulant;
        for i in 0..size {
            normal[(i, i)] += cfg.lambda;
        }
        let mut rhs = &ct * nalgebra::DVector::from_column_slice(&x);
        rhs[0] += cfg.lambda;
        let solution = normal.cholesky().ok_or(Error::Singular)?.solve(&rhs);
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        center_plane(solution.as_slice(), out, &grid);
    }
    LagFilter::new(grid, data, target.channels())
}

/// `|penalty * v|^2 / |v|^2` with the penalty applied elementwise; the mean
/// over channels for multi-channel filters.
pub fn rayleigh_quotient(v: &LagFilter, penalty: &LagFilter) -> Result<f64> {
    penalty.ensure_window_for(v.grid(), v.channels())?;
    let mut total = 0.0;
    for (c, plane) in v.planes().enumerate() {
        let p = penalty.window_plane(c);
        let denom: f64 = plane.iter().map(|x| x * x).sum();
        if denom == 0.0 {
            return Err(Error::UndefinedQuotient);
        }
        let num: f64 = plane.iter().zip(p).map(|(x, w)| (w * x) * (w * x)).sum();
        total += num / denom;
    }
    Ok(total / v.channels() as f64)
}

/// `1/2 |W (v - delta)|^2` summed over channels.
pub fn whitened_residual(v: &LagFilter, whitening: &LagFilter) -> Result<f64> {
    whitening.ensure_window_for(v.grid(), v.channels())?;
    let z = v.grid().zero_lag_flat();
    let mut total = 0.0;
    for (c, plane) in v.planes().enumerate() {
        let w = whitening.window_plane(c);
        for (i, (&x, &wi)) in plane.iter().zip(w).enumerate() {
            let d = if i == z { x - 1.0 } else { x };
            total += 0.5 * wi * wi * d * d;
        }
    }
    Ok(total)
}

/// The filter a loss compares against the delta, honouring the direction.
pub fn loss_filter(prediction: &Signal, target: &Signal, cfg: &WienerConfig) -> Result<LagFilter> {
    match cfg.direction {
        LossDirection::PredictionAsTarget => wiener_filter(prediction, target, cfg),
        LossDirection::PredictionAsSource => wiener_filter(target, prediction, cfg),
    }
}

/// Wiener loss of a single prediction/target pair.
pub fn wiener_loss(
    prediction: &Signal,
    target: &Signal,
    whitening: &LagFilter,
    cfg: &WienerConfig,
) -> Result<f64> {
    prediction.ensure_same_layout(target)?;
    let v = loss_filter(prediction, target, cfg)?;
    whitened_residual(&v, whitening)
}

/// Mean Wiener loss over a batch of pairs.
pub fn wiener_loss_batch(
    predictions: &[Signal],
    targets: &[Signal],
    whitening: &LagFilter,
    cfg: &WienerConfig,
) -> Result<f64> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "batch of {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        total += wiener_loss(p, t, whitening, cfg)?;
    }
    Ok(total / predictions.len() as f64)
}

/// Translation-invariant distance value plus a flag for constant filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiDistance {
    pub value: f64,
    /// Set when some channel's filter had zero spread; that channel
    /// contributed 0.
    pub degenerate: bool,
}

/// Negative peak of the standardized filter matching `b` to `a`.
pub fn ti_distance(a: &Signal, b: &Signal, cfg: &WienerConfig) -> Result<TiDistance> {
    let v = wiener_filter(a, b, cfg)?;
    Ok(standardized_peak(&v))
}

pub(crate) fn standardized_peak(v: &LagFilter) -> TiDistance {
    let mut total = 0.0;
    let mut degenerate = false;
    for plane in v.planes() {
        let n = plane.len() as f64;
        let mean = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        let peak = plane.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let scale = plane.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sd == 0.0 || sd <= 1e-12 * scale {
            degenerate = true;
            continue;
        }
        total += -(peak - mean) / sd;
    }
    TiDistance {
        value: total / v.channels() as f64,
        degenerate,
    }
}

/// Share of squared filter energy sitting at zero lag.
pub fn concentration(v: &LagFilter) -> Result<f64> {
    let energy = v.norm_sq();
    if energy == 0.0 {
        return Err(Error::UndefinedQuotient);
    }
    let zero: f64 = (0..v.channels())
        .map(|c| v.zero_lag_value(c) * v.zero_lag_value(c))
        .sum();
    Ok(zero / energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_window, WindowSpec};

    fn lcg(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn identity_is_delta() {
        let y = Signal::new(lcg(1, 30), &[5, 6]).unwrap();
        for lambda in [1e-3, 1.0, 250.0] {
            let v = wiener_filter(&y, &y, &WienerConfig::with_lambda(lambda)).unwrap();
            let delta = LagFilter::delta(v.grid().clone(), 1);
            for (a, b) in v.data().iter().zip(delta.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_and_singular() {
        let a = Signal::new(vec![1.0; 4], &[4]).unwrap();
        let b = Signal::new(vec![1.0; 4], &[2, 2]).unwrap();
        assert!(matches!(
            wiener_filter(&a, &b, &WienerConfig::default()),
            Err(Error::Shape(_))
        ));
        // a constant source has spectral zeros once padded
        let c = Signal::new(vec![1.0, 1.0], &[2]).unwrap();
        assert_eq!(
            wiener_filter(&c, &c, &WienerConfig::with_lambda(0.0)),
            Err(Error::Singular)
        );
        assert!(matches!(
            wiener_filter(&c, &c, &WienerConfig::with_lambda(-1.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn direct_matches_fast_on_small_pair() {
        let x = Signal::new(lcg(7, 12), &[12]).unwrap();
        let y = Signal::new(lcg(8, 12), &[12]).unwrap();
        let cfg = WienerConfig::with_lambda(0.5);
        let fast = wiener_filter(&x, &y, &cfg).unwrap();
        let direct = wiener_filter_direct(&x, &y, &cfg).unwrap();
        for (a, b) in fast.data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn direct_oracle_cap() {
        let x = Signal::new(vec![0.5; 33 * 33], &[33, 33]).unwrap();
        assert_eq!(
            wiener_filter_direct(&x, &x, &WienerConfig::default()),
            Err(Error::OracleTooLarge {
                size: 4356,
                cap: 4096
            })
        );
    }

    #[test]
    fn rayleigh_examples() {
        let grid = LagGrid::new(&[2]).unwrap();
        let penalty = LagFilter::new(grid.clone(), vec![0.0, 3.0], 1).unwrap();
        // grid [2] has zero lag at index 1; put the zero penalty there instead
        let penalty_zero_lag = LagFilter::new(grid.clone(), vec![3.0, 0.0], 1).unwrap();
        let delta = LagFilter::delta(grid.clone(), 1);
        assert_eq!(rayleigh_quotient(&delta, &penalty_zero_lag).unwrap(), 0.0);
        let one_hot = LagFilter::new(grid.clone(), vec![2.0, 0.0], 1).unwrap();
        assert_eq!(rayleigh_quotient(&one_hot, &penalty_zero_lag).unwrap(), 9.0);
        let pair = LagFilter::new(grid.clone(), vec![1.0, 1.0], 1).unwrap();
        assert_eq!(rayleigh_quotient(&pair, &penalty).unwrap(), 4.5);
        let zero = LagFilter::new(grid, vec![0.0, 0.0], 1).unwrap();
        assert_eq!(
            rayleigh_quotient(&zero, &penalty),
            Err(Error::UndefinedQuotient)
        );
    }

    #[test]
    fn concentration_examples() {
        let grid = LagGrid::new(&[8]).unwrap();
        let delta = LagFilter::delta(grid.clone(), 1);
        assert_eq!(concentration(&delta).unwrap(), 1.0);
        let uniform = LagFilter::new(grid.clone(), vec![0.3; 8], 1).unwrap();
        assert!((concentration(&uniform).unwrap() - 0.125).abs() < 1e-15);
        let mut shifted = vec![0.0; 8];
        shifted[6] = 1.0;
        let shifted = LagFilter::new(grid.clone(), shifted, 1).unwrap();
        assert_eq!(concentration(&shifted).unwrap(), 0.0);
        let zero = LagFilter::new(grid, vec![0.0; 8], 1).unwrap();
        assert_eq!(concentration(&zero), Err(Error::UndefinedQuotient));
    }

    #[test]
    fn standardized_one_hot() {
        for n in [4usize, 9, 64] {
            let grid = LagGrid::new(&[n]).unwrap();
            let mut data = vec![0.0; n];
            data[1] = 2.5;
            let v = LagFilter::new(grid, data, 1).unwrap();
            let d = standardized_peak(&v);
            assert!((d.value + libm::sqrt((n - 1) as f64)).abs() < 1e-12);
            assert!(!d.degenerate);
        }
        let flat = LagFilter::new(LagGrid::new(&[4]).unwrap(), vec![0.7; 4], 1).unwrap();
        let d = standardized_peak(&flat);
        assert_eq!(d.value, 0.0);
        assert!(d.degenerate);
    }

    #[test]
    fn loss_zero_for_identical_pair() {
        let y = Signal::new(lcg(3, 36), &[6, 6]).unwrap();
        let grid = LagGrid::for_signal_shape(y.shape()).unwrap();
        let w = make_window(&WindowSpec::laplace(2.0, 0.1), &grid).unwrap();
        let loss = wiener_loss(&y, &y, &w, &WienerConfig::with_lambda(1.0)).unwrap();
        assert!(loss < 1e-20);
    }
}
