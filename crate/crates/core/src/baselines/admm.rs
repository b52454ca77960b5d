//! Proximal ADMM with a plugged denoiser in the regularizer slot.
//!
//! The iteration alternates the proximal step of the data fidelity (a
//! regularized least squares solved by CG, the same machinery as the main
//! solver's measurement half), the denoiser, and a dual ascent on the
//! consensus gap:
//!
//! ```text
//! x1 <- prox_{g1/gamma}(x2 - u)
//! x2 <- f2(x1 + u)          (prox of g2, or a plugged denoiser)
//! u  <- u + x1 - x2
//! ```
//!
//! The stepsize `gamma` changes the convergence speed but, in convex mode,
//! not the fixed point; the stepsize-invariance test below pins that down.

use std::cell::RefCell;

use num_complex::Complex64;

use crate::denoise::{Denoiser, DenoiserRequest};
use crate::gec::{effective_noise_precision, solve_f1, WaveletizedOp};
use crate::linalg;
use crate::linop::LinearOperator;
use crate::metrics::{excess_kurtosis, psnr};
use crate::model::{ForwardOp, Image};
use crate::trace::{BandRow, IterationRecord, RunTrace};
use crate::wavelet::{dwt, idwt, subband_stats, SubbandLayout};
use crate::{Error, Result};

/// Splitting variables: `x1` tracks the data-fidelity prox, `x2` the
/// denoised estimate, `u` the scaled dual. All three share one length.
pub struct AdmmState {
    pub x1: Vec<Complex64>,
    pub x2: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub gamma: f64,
}

impl AdmmState {
    pub fn new(n: usize, gamma: f64) -> Self {
        Self {
            x1: vec![Complex64::ZERO; n],
            x2: vec![Complex64::ZERO; n],
            u: vec![Complex64::ZERO; n],
            gamma,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdmmOptions {
    /// Splitting stepsize; the denoiser sees noise SD `gamma^{-1/2}`.
    pub gamma: f64,
    pub max_iterations: usize,
    /// Stop when the consensus gap `||x1 - x2|| / ||x1||` drops below this.
    pub stop_tolerance: f64,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            max_iterations: 100,
            stop_tolerance: 1e-6,
            cg_tolerance: 1e-8,
            cg_max_iterations: 200,
        }
    }
}

impl AdmmOptions {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stepsize must be positive and finite, got {}",
                self.gamma
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Runs ADMM on a measurement operator acting on wavelet coefficients.
///
/// In convex mode the denoiser is the exact prox of the regularizer and the
/// run solves the corresponding optimization problem; with a plugged
/// denoiser this is PnP-ADMM and the stepsize does shape the fixed point.
/// `oracle` enables per-iteration PSNR and denoiser-input error diagnostics.
pub fn run_admm(
    b_op: &dyn LinearOperator,
    y: &[Complex64],
    gamma_w: f64,
    layout: &SubbandLayout,
    denoiser: &dyn Denoiser,
    opts: &AdmmOptions,
    oracle: Option<&[Complex64]>,
) -> Result<(Vec<Complex64>, RunTrace)> {
    opts.validate()?;
    if y.len() != b_op.rows() {
        return Err(Error::DimensionMismatch {
            what: "measurement vector",
            expected: b_op.rows(),
            got: y.len(),
        });
    }
    let n = layout.len();
    if let Some(c0) = oracle {
        if c0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "oracle coefficients",
                expected: n,
                got: c0.len(),
            });
        }
    }
    let gamma_w_eff = effective_noise_precision(gamma_w);
    let num_bands = layout.num_bands();
    let gamma_bands = vec![opts.gamma; num_bands];
    let band_sds = vec![1.0 / opts.gamma.sqrt(); num_bands];

    let mut state = AdmmState::new(n, opts.gamma);
    let mut trace = RunTrace::new("admm");
    trace.band_sizes = layout.band_sizes();
    trace.notes.insert("denoiser".into(), denoiser.name().into());
    trace.notes.insert("gamma".into(), format!("{}", opts.gamma));
    trace
        .notes
        .insert("gamma_w_eff".into(), format!("{gamma_w_eff:.6e}"));

    let oracle_image = oracle
        .map(|c0| -> Result<Vec<Complex64>> { idwt(c0, layout) })
        .transpose()?;
    let warm: RefCell<Option<Vec<Complex64>>> = RefCell::new(None);
    let mut prev_x2: Option<Vec<Complex64>> = None;

    for it in 1..=opts.max_iterations {
        let r1: Vec<Complex64> = state.x2.iter().zip(&state.u).map(|(x, u)| x - u).collect();
        let out = solve_f1(
            b_op,
            y,
            gamma_w_eff,
            layout,
            &gamma_bands,
            &r1,
            warm.borrow().as_deref(),
            opts.cg_tolerance,
            opts.cg_max_iterations,
        )?;
        let cg_iters = out.iterations;
        state.x1 = out.solution;
        *warm.borrow_mut() = Some(state.x1.clone());

        let r2: Vec<Complex64> = state.x1.iter().zip(&state.u).map(|(x, u)| x + u).collect();
        state.x2 = denoiser.denoise(&DenoiserRequest {
            pyramid: &r2,
            band_sds: &band_sds,
            layout,
        })?;
        for ((u, x1), x2) in state.u.iter_mut().zip(&state.x1).zip(&state.x2) {
            *u += x1 - x2;
        }

        let x1_norm = linalg::norm(&state.x1);
        let gap = linalg::norm(&linalg::sub(&state.x1, &state.x2));
        let consensus = if x1_norm > 0.0 { gap / x1_norm } else { gap };

        let mut record = IterationRecord::new(it);
        record.cg_iters = cg_iters;
        record.extras.insert("consensus", consensus);
        if let Some(img) = &oracle_image {
            let est = idwt(&state.x2, layout)?;
            let (h, w) = (layout.height(), layout.width());
            record.psnr = Some(psnr(
                &Image::new(h, w, est)?,
                &Image::new(h, w, img.clone())?,
            )?);
        }
        let error_stats = match oracle {
            Some(c0) => {
                let err = linalg::sub(&r2, c0);
                Some((subband_stats(&err, layout)?, err))
            }
            None => None,
        };
        for l in 0..num_bands {
            let (empirical_sd, kurtosis) = match &error_stats {
                Some((stats, err)) => {
                    let reals: Vec<f64> =
                        err[layout.band(l).range()].iter().map(|v| v.re).collect();
                    (Some(stats[l].sd), Some(excess_kurtosis(&reals)))
                }
                None => (None, None),
            };
            record.bands.push(BandRow {
                band: l,
                gamma2: Some(opts.gamma),
                predicted_sd: Some(band_sds[l]),
                empirical_sd,
                kurtosis,
                clipped: false,
            });
        }
        record.rel_change = prev_x2.as_ref().map(|prev| {
            let denom = linalg::norm(&state.x2);
            let num = linalg::norm(&linalg::sub(&state.x2, prev));
            if denom > 0.0 {
                num / denom
            } else {
                num
            }
        });
        prev_x2 = Some(state.x2.clone());
        trace.records.push(record);
        if consensus < opts.stop_tolerance {
            break;
        }
    }

    Ok((state.x2.clone(), trace))
}

/// Image-domain wrapper mirroring the main solver's: conjugate the forward
/// operator with the wavelet transform, run, synthesize.
pub fn run_pnp_admm(
    op: &ForwardOp,
    y: &[Complex64],
    gamma_w: f64,
    depth: usize,
    denoiser: &dyn Denoiser,
    opts: &AdmmOptions,
    oracle: Option<&Image>,
) -> Result<(Image, RunTrace)> {
    let layout = SubbandLayout::new(op.height(), op.width(), depth)?;
    let b_op = WaveletizedOp {
        inner: op,
        layout: &layout,
    };
    let c0 = oracle
        .map(|img| -> Result<Vec<Complex64>> { dwt(img.data(), &layout) })
        .transpose()?;
    let (coeffs, trace) = run_admm(&b_op, y, gamma_w, &layout, denoiser, opts, c0.as_deref())?;
    let image = Image::new(op.height(), op.width(), idwt(&coeffs, &layout)?)?;
    Ok((image, trace))
}

/// Normalized distance of zero from the subdifferential of
/// `gamma_w/2 ||y - Bx||^2 + lambda ||x||_1` at `x` (complex modulus l1).
///
/// Per coefficient: `g_i + lambda * x_i/|x_i|` where `g = gamma_w B^H(Bx-y)`
/// on the support, `max(|g_i| - lambda, 0)` off it. Returns the l2 norm of
/// that vector divided by `lambda sqrt(N)`, so a true minimizer scores 0 and
/// "within 1e-6" is scale-free.
pub fn lasso_stationarity_residual(
    b_op: &dyn LinearOperator,
    y: &[Complex64],
    gamma_w: f64,
    lambda: f64,
    x: &[Complex64],
) -> f64 {
    let mut residual = b_op.apply(x);
    for (r, yi) in residual.iter_mut().zip(y) {
        *r -= yi;
    }
    let g: Vec<Complex64> = b_op
        .apply_adjoint(&residual)
        .into_iter()
        .map(|v| v * gamma_w)
        .collect();
    let mut sq = 0.0;
    for (gi, xi) in g.iter().zip(x) {
        let mag = xi.norm();
        if mag > 0.0 {
            sq += (gi + lambda * xi / mag).norm_sqr();
        } else {
            sq += (gi.norm() - lambda).max(0.0).powi(2);
        }
    }
    sq.sqrt() / (lambda * (x.len() as f64).sqrt())
}
