//! Real grids, the Fourier transform contract, full-lag padding and the
//! centered lag layout shared by every filter computation.

pub mod fft;
mod lag;
mod signal;
mod window;

pub(crate) use lag::{center_plane, check_real, uncenter_plane};
pub use lag::{
    center_zero_lag, fft_forward, fft_inverse, uncenter_zero_lag, LagFilter, LagGrid, Spectrum,
    REAL_RESIDUE_TOL,
};
pub(crate) use signal::{as_rows_cols, crop_plane};
pub use signal::{pad_to_full_lag, Signal};
pub use window::{make_window, WindowFamily, WindowSpec};
