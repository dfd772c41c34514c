use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::fft::FftPlan2d;
use super::signal::{as_rows_cols, check_shape, roll_plane, Signal};
use crate::error::{Error, Result};

/// Largest imaginary residue tolerated when a spectrum is brought back to
/// the real domain, relative to `max(1, max |re|)`.
pub const REAL_RESIDUE_TOL: f64 = 1e-10;

/// Extents of a lag grid. The zero-lag bin sits at `floor(extent / 2)` in
/// every dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagGrid {
    extents: Vec<usize>,
}

impl LagGrid {
    pub fn new(extents: &[usize]) -> Result<Self> {
        check_shape(extents)?;
        Ok(Self {
            extents: extents.to_vec(),
        })
    }

    /// The grid a pair of signals of `shape` produces after full-lag padding.
    pub fn for_signal_shape(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let padded: Vec<usize> = shape.iter().map(|n| 2 * n).collect();
        Self::new(&padded)
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn zero_lag_index(&self) -> Vec<usize> {
        self.extents.iter().map(|n| n / 2).collect()
    }

    pub(crate) fn rows_cols(&self) -> (usize, usize) {
        as_rows_cols(&self.extents)
    }

    /// Flat index of the zero-lag bin within one plane.
    pub fn zero_lag_flat(&self) -> usize {
        let (rows, cols) = self.rows_cols();
        (rows / 2) * cols + cols / 2
    }

    /// Lag offset (row, col) of a flat index, relative to zero lag. For 1D
    /// grids the row offset is always 0.
    pub fn lag_of(&self, flat: usize) -> (isize, isize) {
        let (rows, cols) = self.rows_cols();
        let r = (flat / cols) as isize - (rows / 2) as isize;
        let c = (flat % cols) as isize - (cols / 2) as isize;
        (r, c)
    }

    /// Flat index of a lag offset, if it lies on the grid.
    pub fn flat_of(&self, lag: (isize, isize)) -> Option<usize> {
        let (rows, cols) = self.rows_cols();
        let r = lag.0 + (rows / 2) as isize;
        let c = lag.1 + (cols / 2) as isize;
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            return None;
        }
        Some(r as usize * cols + c as usize)
    }

    pub(crate) fn plan(&self) -> FftPlan2d {
        let (rows, cols) = self.rows_cols();
        FftPlan2d::new(rows, cols)
    }
}

/// Real values over a centered lag grid, one plane per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LagFilter {
    grid: LagGrid,
    data: Vec<f64>,
    channels: usize,
}

impl LagFilter {
    pub fn new(grid: LagGrid, data: Vec<f64>, channels: usize) -> Result<Self> {
        if channels == 0 || data.len() != channels * grid.len() {
            return Err(Error::Shape(format!(
                "filter data length {} does not match {channels} x {:?}",
                data.len(),
                grid.extents()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite filter coefficient".into()));
        }
        Ok(Self {
            grid,
            data,
            channels,
        })
    }

    /// The convolutional identity: 1 at zero lag, 0 elsewhere.
    pub fn delta(grid: LagGrid, channels: usize) -> Self {
        let n = grid.len();
        let mut data = vec![0.0; channels * n];
        let z = grid.zero_lag_flat();
        for c in 0..channels {
            data[c * n + z] = 1.0;
        }
        Self {
            grid,
            data,
            channels,
        }
    }

    pub fn grid(&self) -> &LagGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.grid.len())
    }

    pub fn zero_lag_value(&self, channel: usize) -> f64 {
        self.plane(channel)[self.grid.zero_lag_flat()]
    }

    /// Lag offset of the largest coefficient in a channel (first on ties).
    pub fn argmax_lag(&self, channel: usize) -> (isize, isize) {
        let plane = self.plane(channel);
        let mut best = 0;
        for (i, &v) in plane.iter().enumerate() {
            if v > plane[best] {
                best = i;
            }
        }
        self.grid.lag_of(best)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Plane `channel` of a window that is either single-plane (shared by
    /// all channels) or has one plane per channel.
    pub(crate) fn window_plane(&self, channel: usize) -> &[f64] {
        if self.channels == 1 {
            self.plane(0)
        } else {
            self.plane(channel)
        }
    }

    pub(crate) fn ensure_window_for(&self, grid: &LagGrid, channels: usize) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::Shape(format!(
                "window extents {:?} do not match lag grid {:?}",
                self.grid.extents(),
                grid.extents()
            )));
        }
        if self.channels != 1 && self.channels != channels {
            return Err(Error::Shape(format!(
                "window has {} planes for {channels} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

/// Moves the raw (zero lag at index 0) layout onto the centered lag grid.
pub fn center_zero_lag(raw: &Signal, grid: &LagGrid) -> Result<LagFilter> {
    if raw.shape() != grid.extents() {
        return Err(Error::Shape(format!(
            "raw extents {:?} do not match grid {:?}",
            raw.shape(),
            grid.extents()
        )));
    }
    let (rows, cols) = grid.rows_cols();
    let mut data = vec![0.0; raw.len()];
    for (src, dst) in raw.planes().zip(data.chunks_exact_mut(rows * cols)) {
        center_plane(src, dst, grid);
    }
    LagFilter::new(grid.clone(), data, raw.channels())
}

/// Inverse of [`center_zero_lag`].
pub fn uncenter_zero_lag(filter: &LagFilter) -> Signal {
    let grid = filter.grid();
    let (rows, cols) = grid.rows_cols();
    let mut data = vec![0.0; filter.data().len()];
    for (src, dst) in filter.planes().zip(data.chunks_exact_mut(rows * cols)) {
        uncenter_plane(src, dst, grid);
    }
    Signal::with_channels(data, grid.extents(), filter.channels())
        .expect("filter values are finite by construction")
}

pub(crate) fn center_plane(src: &[f64], dst: &mut [f64], grid: &LagGrid) {
    let (rows, cols) = grid.rows_cols();
    roll_plane(
        src,
        dst,
        rows,
        cols,
        (rows / 2) as isize,
        (cols / 2) as isize,
    );
}

pub(crate) fn uncenter_plane(src: &[f64], dst: &mut [f64], grid: &LagGrid) {
    let (rows, cols) = grid.rows_cols();
    roll_plane(
        src,
        dst,
        rows,
        cols,
        -((rows / 2) as isize),
        -((cols / 2) as isize),
    );
}

/// Complex spectra of every channel plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    data: Vec<Complex64>,
    shape: Vec<usize>,
    channels: usize,
}

impl Spectrum {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn plane(&self, channel: usize) -> &[Complex64] {
        let n: usize = self.shape.iter().product();
        &self.data[channel * n..(channel + 1) * n]
    }
}

/// Unnormalized forward transform of every plane.
pub fn fft_forward(s: &Signal) -> Result<Spectrum> {
    if let Some(i) = s.data().iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value at index {i}"
        )));
    }
    let (rows, cols) = as_rows_cols(s.shape());
    let plan = FftPlan2d::new(rows, cols);
    let mut data = Vec::with_capacity(s.len());
    for plane in s.planes() {
        data.extend(plan.forward_real(plane));
    }
    Ok(Spectrum {
        data,
        shape: s.shape().to_vec(),
        channels: s.channels(),
    })
}

/// Inverse transform scaled by `1/N`. Fails if the result is not real.
pub fn fft_inverse(sp: &Spectrum) -> Result<Signal> {
    if sp
        .data
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::InvalidInput("non-finite spectrum bin".into()));
    }
    let (rows, cols) = as_rows_cols(&sp.shape);
    let plan = FftPlan2d::new(rows, cols);
    let mut data = Vec::with_capacity(sp.data.len());
    for plane in sp.data.chunks_exact(rows * cols) {
        let (re, residue) = plan.inverse_real(plane);
        check_real(&re, residue, REAL_RESIDUE_TOL)?;
        data.extend(re);
    }
    Signal::with_channels(data, &sp.shape, sp.channels)
}

pub(crate) fn check_real(re: &[f64], residue: f64, tol: f64) -> Result<()> {
    let scale = re.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    if residue > tol * scale {
        return Err(Error::Numerical(format!(
            "imaginary residue {residue:e} after inverse transform"
        )));
    }
    Ok(())
}
