#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod error;
pub mod spectral;

pub use error::{Error, Result};
pub mod diffusion;
pub mod gradients;
pub mod knn;
pub mod trainer;
pub mod wiener;
