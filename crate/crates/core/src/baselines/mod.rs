//! Reference solvers the adaptive method is compared against: proximal ADMM,
//! a two-block primal-dual iteration, and AMP with an Onsager correction.
//!
//! All three run over the same pieces as the main solver (a measurement
//! operator on wavelet coefficients, a band-aware denoiser, a shared trace
//! schema), so comparisons differ only in the algorithm.

mod admm;
mod amp;
mod pds;

pub use admm::{lasso_stationarity_residual, run_admm, run_pnp_admm, AdmmOptions, AdmmState};
pub use amp::{
    amp_error_recursion_diagnostics, run_amp, run_amp_mri, AmpErrorRecord, AmpOptions, AmpState,
};
pub use pds::{run_pds, run_pnp_pds, tune_pds_scale, PdsOptions};

use num_complex::Complex64;

use crate::linop::LinearOperator;
use crate::model::{ForwardOp, Image};
use crate::Result;

/// Adjoint ("zero-filled") reconstruction `A^H y`, the floor every iterative
/// method is expected to beat.
pub fn zero_filled(op: &ForwardOp, y: &[Complex64]) -> Result<Image> {
    Image::new(op.height(), op.width(), op.apply_adjoint(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{measure, CoilOptions, MaskOptions};
    use crate::phantom;

    #[test]
    fn zero_filled_is_the_adjoint_image() {
        let x0 = phantom::by_name("gaussian-blobs", 16).unwrap();
        let op = ForwardOp::build(
            16,
            16,
            2,
            &MaskOptions {
                reduction: 2.0,
                ..MaskOptions::default()
            },
            &CoilOptions::default(),
        )
        .unwrap();
        let m = measure(&x0, &op, 40.0, 5).unwrap();
        let img = zero_filled(&op, &m.y).unwrap();
        assert_eq!(img.data(), op.apply_adjoint(&m.y).as_slice());
    }
}
