//! Expectation-consistent recovery with two alternating estimators: a
//! quadratic measurement-fidelity step solved by conjugate gradients and a
//! pluggable denoiser, exchanging extrapolated estimates with per-subband
//! precisions learned from Monte-Carlo divergence estimates.
//!
//! Precisions are plain per-band `Vec<f64>` in canonical band order;
//! [`crate::wavelet::SubbandLayout::expand`] maps them to coefficient
//! length.

mod cg;
mod damping;
mod divergence;
mod halfstep;
mod quadratic;
mod run;

pub use cg::{solve_hpd, CgOutcome};
pub use damping::{damp_precisions, damp_vector, validate_rho};
pub use divergence::{estimate_band_divergences, ProbeMode, ProbeOptions};
pub use halfstep::{extrapolate, gec_half_step, HalfStep, PrecisionBounds};
pub use quadratic::{
    effective_noise_precision, solve_f1, WaveletizedOp, NOISELESS_PRECISION,
};
pub use run::{run_dgec, run_gec, GecOptions, GecState, PrecisionSchedule};
