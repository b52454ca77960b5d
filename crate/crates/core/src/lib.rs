//! Plug-and-play expectation-consistent recovery of wavelet coefficients from
//! undersampled multi-coil Fourier measurements, with ADMM / primal-dual / AMP
//! baselines and the diagnostics needed to audit denoiser-input error statistics.

pub mod baselines;
pub mod denoise;
pub mod error;
pub mod gec;
pub mod io;
pub mod linalg;
pub mod linop;
pub mod metrics;
pub mod model;
pub mod par;
pub mod phantom;
pub mod trace;
pub mod wavelet;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
