//! The measurement-fidelity half of the splitting: a regularized
//! least-squares solve in wavelet coordinates.

use num_complex::Complex64;

use super::cg::{solve_hpd, CgOutcome};
use crate::linop::LinearOperator;
use crate::wavelet::{dwt, idwt, SubbandLayout};
use crate::{Error, Result};

/// A measurement operator conjugated with the wavelet synthesis: maps
/// coefficient vectors `c` to measurements of the image they synthesize.
/// The transform is orthonormal, so adjoint and Frobenius norm carry over
/// from the inner operator unchanged.
pub struct WaveletizedOp<'a, Op: LinearOperator + ?Sized> {
    pub inner: &'a Op,
    pub layout: &'a SubbandLayout,
}

impl<Op: LinearOperator + ?Sized> LinearOperator for WaveletizedOp<'_, Op> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        let image = idwt(c, self.layout).expect("layout fixed at construction");
        self.inner.apply(&image)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let image = self.inner.apply_adjoint(y);
        dwt(&image, self.layout).expect("layout fixed at construction")
    }

    fn frobenius_norm_sq(&self) -> f64 {
        self.inner.frobenius_norm_sq()
    }
}

/// Substitute for an infinite noise precision (noiseless data): large enough
/// that the data term dominates any plausible coefficient precision, small
/// enough that `gamma_w * B^H B + Diag(gamma)` stays well conditioned in f64.
pub const NOISELESS_PRECISION: f64 = 1e12;

pub fn effective_noise_precision(gamma_w: f64) -> f64 {
    if gamma_w.is_finite() {
        gamma_w
    } else {
        NOISELESS_PRECISION
    }
}

/// Solves `(gamma_w B^H B + Diag(gamma)) x = gamma_w B^H y + Diag(gamma) r`
/// by conjugate gradients, i.e. the proximal step of the quadratic data
/// fidelity at `r` under per-band precisions `gamma`.
///
/// `gamma` has one entry per band; `warm_start` should carry the previous
/// solution when there is one.
pub fn solve_f1<Op: LinearOperator + ?Sized>(
    b_op: &Op,
    y: &[Complex64],
    gamma_w: f64,
    layout: &SubbandLayout,
    gamma: &[f64],
    r: &[Complex64],
    warm_start: Option<&[Complex64]>,
    cg_tolerance: f64,
    cg_max_iterations: usize,
) -> Result<CgOutcome> {
    let n = layout.len();
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            what: "f1 input vector",
            expected: n,
            got: r.len(),
        });
    }
    if y.len() != b_op.rows() {
        return Err(Error::DimensionMismatch {
            what: "f1 measurement vector",
            expected: b_op.rows(),
            got: y.len(),
        });
    }
    if !gamma.iter().all(|g| g.is_finite() && *g > 0.0) {
        return Err(Error::InvalidParameter(
            "f1 precisions must be finite and strictly positive".into(),
        ));
    }
    let gamma_w = effective_noise_precision(gamma_w);
    if gamma_w < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise precision must be nonnegative, got {gamma_w}"
        )));
    }
    let gamma_full = layout.expand(gamma)?;

    let mut rhs = b_op.apply_adjoint(y);
    for (b, (gi, ri)) in rhs.iter_mut().zip(gamma_full.iter().zip(r)) {
        *b = *b * gamma_w + ri * gi;
    }

    let apply = |x: &[Complex64]| {
        let mut out = b_op.apply_adjoint(&b_op.apply(x));
        for (o, (gi, xi)) in out.iter_mut().zip(gamma_full.iter().zip(x)) {
            *o = *o * gamma_w + xi * gi;
        }
        out
    };
    solve_hpd(apply, &rhs, warm_start, cg_tolerance, cg_max_iterations)
}
