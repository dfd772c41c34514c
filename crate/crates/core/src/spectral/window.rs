use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use super::lag::{LagFilter, LagGrid};
use crate::error::{Error, Result};

/// Shape of a diagonal lag-domain weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFamily {
    /// `epsilon + exp(-|tau|_1 / b)`: peaked at zero lag.
    Laplace,
    /// `1 - exp(-|tau|_1 / b)`: zero at zero lag, rising with lag distance.
    InvertedLaplace,
}

impl FromStr for WindowFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Self::Laplace),
            "inverted_laplace" => Ok(Self::InvertedLaplace),
            other => Err(Error::Config(format!("unknown window family `{other}`"))),
        }
    }
}

impl WindowFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Laplace => "laplace",
            Self::InvertedLaplace => "inverted_laplace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub family: WindowFamily,
    /// Decay scale in lag bins; must be positive.
    pub scale: f64,
    /// Floor added to the `laplace` family; ignored by `inverted_laplace`.
    pub epsilon: f64,
}

impl WindowSpec {
    pub fn laplace(scale: f64, epsilon: f64) -> Self {
        Self {
            family: WindowFamily::Laplace,
            scale,
            epsilon,
        }
    }

    pub fn inverted_laplace(scale: f64) -> Self {
        Self {
            family: WindowFamily::InvertedLaplace,
            scale,
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!(
                "window scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "window floor must be nonnegative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Weight at Manhattan lag distance `l1`.
    pub fn weight(&self, l1: f64) -> f64 {
        let decay = libm::exp(-l1 / self.scale);
        match self.family {
            WindowFamily::Laplace => self.epsilon + decay,
            WindowFamily::InvertedLaplace => 1.0 - decay,
        }
    }
}

/// Evaluates a window over every bin of `grid` (single plane).
pub fn make_window(spec: &WindowSpec, grid: &LagGrid) -> Result<LagFilter> {
    spec.validate()?;
    let data: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (r, c) = grid.lag_of(i);
            spec.weight((r.unsigned_abs() + c.unsigned_abs()) as f64)
        })
        .collect();
    LagFilter::new(grid.clone(), data, 1)
}
