use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A real-valued 1D or 2D grid with one or more independent channel planes.
///
/// Planes are stored back to back, each in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: Vec<f64>,
    shape: Vec<usize>,
    channels: usize,
}

pub(crate) fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::UnsupportedRank(shape.len()));
    }
    if shape.contains(&0) {
        return Err(Error::Shape(format!(
            "extents must be positive, got {shape:?}"
        )));
    }
    Ok(())
}

/// `(rows, cols)` view of a rank-1 or rank-2 shape; 1D shapes are a single row.
pub(crate) fn as_rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => unreachable!("rank validated on construction"),
    }
}

impl Signal {
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::with_channels(data, shape, 1)
    }

    pub fn with_channels(data: Vec<f64>, shape: &[usize], channels: usize) -> Result<Self> {
        check_shape(shape)?;
        if channels == 0 {
            return Err(Error::Shape("channel count must be positive".into()));
        }
        let expected = channels * shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} does not match {channels} x {shape:?}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            data,
            shape: shape.to_vec(),
            channels,
        })
    }

    pub fn zeros(shape: &[usize], channels: usize) -> Result<Self> {
        check_shape(shape)?;
        let len = channels * shape.iter().product::<usize>();
        Self::with_channels(vec![0.0; len], shape, channels)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of elements in one channel plane.
    pub fn plane_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the samples. Callers must keep values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.plane_len())
    }

    pub fn same_layout(&self, other: &Signal) -> bool {
        self.shape == other.shape && self.channels == other.channels
    }

    pub(crate) fn ensure_same_layout(&self, other: &Signal) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{:?}x{} vs {:?}x{}",
                self.shape, self.channels, other.shape, other.channels
            )))
        }
    }

    /// Builds a signal with the same layout from new samples.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::with_channels(data, &self.shape, self.channels)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn distance_sq(&self, other: &Signal) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Cyclic shift of every plane by `offsets` (one entry per dimension);
    /// the sample at `i` moves to `i + offset` modulo the extent.
    pub fn roll(&self, offsets: &[isize]) -> Result<Self> {
        if offsets.len() != self.rank() {
            return Err(Error::Shape(format!(
                "{} offsets for a rank-{} signal",
                offsets.len(),
                self.rank()
            )));
        }
        let (rows, cols) = as_rows_cols(&self.shape);
        let (dr, dc) = match offsets {
            [c] => (0, *c),
            [r, c] => (*r, *c),
            _ => unreachable!(),
        };
        let mut out = vec![0.0; self.data.len()];
        for (src, dst) in self.planes().zip(out.chunks_exact_mut(rows * cols)) {
            roll_plane(src, dst, rows, cols, dr, dc);
        }
        Ok(Self {
            data: out,
            shape: self.shape.clone(),
            channels: self.channels,
        })
    }
}

pub(crate) fn roll_plane(
    src: &[f64],
    dst: &mut [f64],
    rows: usize,
    cols: usize,
    dr: isize,
    dc: isize,
) {
    let sr = dr.rem_euclid(rows as isize) as usize;
    let sc = dc.rem_euclid(cols as isize) as usize;
    for r in 0..rows {
        let tr = (r + sr) % rows;
        for c in 0..cols {
            dst[tr * cols + (c + sc) % cols] = src[r * cols + c];
        }
    }
}

/// Zero-pads every plane to twice its extent in each dimension, keeping the
/// original samples in the leading corner.
pub fn pad_to_full_lag(s: &Signal) -> Result<Signal> {
    check_shape(s.shape())?;
    let padded: Vec<usize> = s.shape().iter().map(|n| 2 * n).collect();
    let (rows, cols) = as_rows_cols(s.shape());
    let (prows, pcols) = as_rows_cols(&padded);
    let mut data = vec![0.0; s.channels() * prows * pcols];
    for (src, dst) in s.planes().zip(data.chunks_exact_mut(prows * pcols)) {
        for r in 0..rows {
            dst[r * pcols..r * pcols + cols].copy_from_slice(&src[r * cols..(r + 1) * cols]);
        }
    }
    Signal::with_channels(data, &padded, s.channels())
}

/// Adjoint of [`pad_to_full_lag`] for a single plane: copies the leading
/// `shape` block out of a padded plane.
pub(crate) fn crop_plane(padded: &[f64], shape: &[usize], out: &mut [f64]) {
    let (rows, cols) = as_rows_cols(shape);
    let pcols = 2 * cols;
    for r in 0..rows {
        out[r * cols..(r + 1) * cols].copy_from_slice(&padded[r * pcols..r * pcols + cols]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert_eq!(
            Signal::new(vec![0.0; 8], &[2, 2, 2]),
            Err(Error::UnsupportedRank(3))
        );
        assert!(matches!(
            Signal::new(vec![0.0; 3], &[4]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Signal::new(vec![0.0, f64::NAN], &[2]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            Signal::with_channels(vec![], &[2], 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pad_smallest_case() {
        let s = Signal::new(vec![5.0], &[1]).unwrap();
        let p = pad_to_full_lag(&s).unwrap();
        assert_eq!(p.shape(), &[2]);
        assert_eq!(p.data(), &[5.0, 0.0]);
    }

    #[test]
    fn pad_28_by_28_keeps_top_left_block() {
        let data: Vec<f64> = (0..784).map(|i| (i % 17) as f64 / 17.0).collect();
        let s = Signal::new(data, &[28, 28]).unwrap();
        let p = pad_to_full_lag(&s).unwrap();
        assert_eq!(p.shape(), &[56, 56]);
        for r in 0..56 {
            for c in 0..56 {
                let v = p.data()[r * 56 + c];
                if r < 28 && c < 28 {
                    assert_eq!(v, s.data()[r * 28 + c]);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        let mut back = vec![0.0; 784];
        crop_plane(p.data(), s.shape(), &mut back);
        assert_eq!(back, s.data());
    }

    #[test]
    fn pad_multichannel_per_plane() {
        let s = Signal::with_channels(vec![1.0, 2.0, 3.0, 4.0], &[2], 2).unwrap();
        let p = pad_to_full_lag(&s).unwrap();
        assert_eq!(p.data(), &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn roll_wraps() {
        let s = Signal::new(vec![1.0, 2.0, 3.0, 4.0], &[4]).unwrap();
        assert_eq!(s.roll(&[1]).unwrap().data(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.roll(&[-1]).unwrap().data(), &[2.0, 3.0, 4.0, 1.0]);
        let m = Signal::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        assert_eq!(m.roll(&[1, 0]).unwrap().data(), &[3.0, 4.0, 1.0, 2.0]);
    }
}
