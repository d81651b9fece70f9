//! Dense 2-D array arithmetic, circular convolution, frequency-domain
//! diagonal solves, finite-difference filters, error metrics and PGM I/O.

mod conv;
mod fft;
mod grid;
mod kernel;
mod metrics;
pub mod pgm;

pub use conv::{adjoint_conv2_circ, conv2_circ, gradient_filters};
pub use fft::{fft2, ifft2_real, kernel_spectrum, solve_diag_freq, DiagSolver, Spectrum};
pub use grid::Grid;
pub use kernel::Kernel;
pub use metrics::{psnr, rel_error, rel_error_flagged, Metrics, PSNR_CAP_DB};
