//! Proximal alternating direction solvers with pluggable built-in
//! direction networks, proximal error correction and theorem-derived
//! runtime convergence monitors, alongside classical ADMM and
//! half-quadratic-splitting baselines over the same energies.
//!
//! The crate splits into five layers:
//! - [`tensor`]: dense 2-D grids, circular convolution, frequency-domain
//!   diagonal solves, metrics and PGM I/O;
//! - [`energy`]: fidelity + prior energy models, Moreau-regularized
//!   gradients and scalar proximal operators with a brute-force oracle;
//! - [`unroll`]: residual direction-unit stacks, the architecture
//!   condition, greedy stage-wise training and a binary network
//!   container;
//! - [`solver`]: the alternating direction iteration engine (inference
//!   and learning), schedules, error correction and monitors;
//! - [`baselines`]: ADMM and HQS reference solvers.

pub mod baselines;
pub mod energy;
pub mod error;
pub mod solver;
pub mod tensor;
pub mod unroll;

pub use error::{Error, Result};
