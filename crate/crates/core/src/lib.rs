//! Numerical laboratory for the one-dimensional nonlinear Schrödinger
//! equation with gauge-invariant polynomial nonlinearity,
//! `i u_t + u_xx / 2 = sum_n lambda_n |u|^(2n) u`, posed from `t = 1`.
//!
//! The crate integrates the equation over long times, tracks the profile
//! `f = exp(-i t Delta / 2) u` and the phase-corrected (modified) profile,
//! extracts scattering data, and checks the measured long-time expansion of
//! the solution against explicit second-order coefficient formulas, with an
//! independent oscillatory-integral oracle for the stationary-phase layer.

pub mod acceptance;
pub mod expansion;
pub mod fit;
pub mod grid;
pub mod io;
pub mod norms;
pub mod oracle;
pub mod profile;
pub mod solver;

pub use grid::{GridSpec, SpatialField, SpectralField};
pub use solver::{NonlinearitySpec, Snapshot, Trajectory};
