//! Pseudo-spectral laboratory for the stochastic Camassa–Holm equation on the
//! circle and the stochastic Euler–Poincaré equations on the 2-torus.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: fields stored as Fourier coefficients, Sobolev norms,
//!   Bessel potentials, mollifiers and the periodic Helmholtz Green function.
//! - [`dynamics`]: the deterministic drifts (CH, EP, the β-scaled v-equation).
//! - [`noise`]: Brownian paths, the exponential martingale β and the
//!   multiplicative noise coefficients.
//! - [`stepper`]: Euler–Maruyama, the random-coefficient RK4 route and the
//!   guarded trajectory driver.
//! - [`detectors`]: exiting times, slope diagnostics, breaking threshold and
//!   blow-up rate fits.
//! - [`ensemble`]: seeded Monte Carlo over many trajectories.
//! - [`experiments`]: canned runs that emit a machine-checkable report.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod dynamics;
pub mod ensemble;
pub mod experiments;
pub mod noise;
pub mod spectral;
pub mod stats;
pub mod stepper;

pub use num_complex::Complex64;
pub use spectral::SpectralField;

/// Errors raised by the numerical operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("resolution {0} rejected: N must be even and at least 8")]
    Resolution(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
