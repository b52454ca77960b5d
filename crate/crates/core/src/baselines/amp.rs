//! AMP with an Onsager-corrected residual and a Monte-Carlo trace estimate.
//!
//! From `v^0 = 0 = x^0` the iteration is
//!
//! ```text
//! v+  <- beta (y - A x + tr{grad f2(r)} / M * v)     beta = N / ||A||_F^2
//! tau <- ||v+||^2 / M
//! r+  <- x + A^H v+
//! x+  <- f2(r+)                    (denoiser at noise SD sqrt(tau))
//! ```
//!
//! where `r` is the denoiser input that produced the current `x`, and the
//! Jacobian trace comes from a single full random probe. The Onsager term
//! decorrelates successive residuals when `A` is i.i.d., which is exactly
//! what makes `tau` track the true per-coefficient input MSE; structured
//! operators break that mechanism, so the runner watches the residual norm
//! and flags the run as diverged instead of failing.

use num_complex::Complex64;

use crate::denoise::{Denoiser, DenoiserRequest};
use crate::gec::{estimate_band_divergences, ProbeMode, ProbeOptions, WaveletizedOp};
use crate::linalg;
use crate::linop::LinearOperator;
use crate::metrics::{excess_kurtosis, psnr};
use crate::model::{ForwardOp, Image};
use crate::trace::{BandRow, IterationRecord, RunTrace};
use crate::wavelet::{dwt, idwt, subband_stats, SubbandLayout};
use crate::{Error, Result};

/// Running variables: `v` is the corrected residual in measurement space,
/// `tau = ||v||^2 / M` its energy per measurement, `x` the current estimate,
/// `beta = N / ||A||_F^2` the residual gain.
pub struct AmpState {
    pub v: Vec<Complex64>,
    pub tau: f64,
    pub x: Vec<Complex64>,
    pub beta: f64,
}

impl AmpState {
    pub fn new(rows: usize, cols: usize, beta: f64) -> Self {
        Self {
            v: vec![Complex64::ZERO; rows],
            tau: 0.0,
            x: vec![Complex64::ZERO; cols],
            beta,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AmpOptions {
    pub max_iterations: usize,
    /// Stop when the relative change of the estimate drops below this;
    /// zero disables early stopping.
    pub stop_tolerance: f64,
    /// Probe settings for the Jacobian-trace estimate; `seed` and `context`
    /// are overridden per iteration from `seed` below.
    pub probe: ProbeOptions,
    /// Flag the run as diverged when the residual norm grows by more than
    /// this factor across `divergence_window` iterations.
    pub divergence_factor: f64,
    pub divergence_window: usize,
    pub seed: u64,
    /// Keep every denoiser input and output in the trace, for the error
    /// recursion diagnostics.
    pub record_denoiser_io: bool,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            stop_tolerance: 1e-6,
            probe: ProbeOptions {
                mode: ProbeMode::Shared,
                probes_per_band: 1,
                ..ProbeOptions::default()
            },
            divergence_factor: 10.0,
            divergence_window: 5,
            seed: 0,
            record_denoiser_io: false,
        }
    }
}

impl AmpOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_iterations >= 1 << 30 {
            return Err(Error::InvalidParameter(
                "max_iterations must be in [1, 2^30)".into(),
            ));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "divergence factor must exceed 1, got {}",
                self.divergence_factor
            )));
        }
        if self.divergence_window == 0 {
            return Err(Error::InvalidParameter(
                "divergence window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn at(iteration: usize) -> impl Fn(Error) -> Error {
    move |source| Error::At {
        iteration,
        source: Box::new(source),
    }
}

/// Runs AMP on an operator acting on the layout's coefficient space.
///
/// A divergent run (the expected outcome on structured operators) returns
/// `Ok` with `trace.diverged` set; hard numeric failure is still an error.
pub fn run_amp(
    op: &dyn LinearOperator,
    y: &[Complex64],
    layout: &SubbandLayout,
    denoiser: &dyn Denoiser,
    opts: &AmpOptions,
    oracle: Option<&[Complex64]>,
) -> Result<(Vec<Complex64>, RunTrace)> {
    opts.validate()?;
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement vector",
            expected: m,
            got: y.len(),
        });
    }
    if layout.len() != n {
        return Err(Error::DimensionMismatch {
            what: "operator input space",
            expected: layout.len(),
            got: n,
        });
    }
    if let Some(c0) = oracle {
        if c0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "oracle coefficients",
                expected: n,
                got: c0.len(),
            });
        }
    }
    let frob = op.frobenius_norm_sq();
    if !(frob > 0.0) || !frob.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "operator Frobenius norm {frob} is unusable"
        )));
    }
    let beta = n as f64 / frob;
    let num_bands = layout.num_bands();
    let band_sizes = layout.band_sizes();

    let mut trace = RunTrace::new("amp");
    trace.band_sizes = band_sizes.clone();
    trace.notes.insert("denoiser".into(), denoiser.name().into());
    trace.notes.insert("beta".into(), format!("{beta:.6e}"));
    trace.notes.insert("seed".into(), format!("{}", opts.seed));

    let oracle_image = oracle
        .map(|c0| -> Result<Vec<Complex64>> { idwt(c0, layout) })
        .transpose()?;

    let mut state = AmpState::new(m, n, beta);
    // Input and noise level of the denoiser call that produced `state.x`;
    // the Onsager trace is evaluated there, not at the new input.
    let mut prev_input: Option<(Vec<Complex64>, Vec<f64>)> = None;
    let mut v_norms: Vec<f64> = Vec::new();

    for it in 1..=opts.max_iterations {
        let onsager_scale = match &prev_input {
            Some((r_prev, sds_prev)) => {
                let f2 = |r: &[Complex64]| -> Result<Vec<Complex64>> {
                    denoiser.denoise(&DenoiserRequest {
                        pyramid: r,
                        band_sds: sds_prev,
                        layout,
                    })
                };
                let probe = ProbeOptions {
                    seed: opts.seed,
                    context: it as u64,
                    ..opts.probe.clone()
                };
                let d = estimate_band_divergences(&f2, r_prev, &state.x, layout, &probe)
                    .map_err(at(it))?;
                let jacobian_trace: f64 = d
                    .iter()
                    .zip(&band_sizes)
                    .map(|(dl, nl)| dl * *nl as f64)
                    .sum();
                jacobian_trace / m as f64
            }
            None => 0.0,
        };

        let forward = op.apply(&state.x);
        let v_new: Vec<Complex64> = y
            .iter()
            .zip(&forward)
            .zip(&state.v)
            .map(|((yi, fi), vi)| beta * (yi - fi + onsager_scale * vi))
            .collect();
        if !linalg::all_finite(&v_new) {
            return Err(Error::NonFinite {
                iteration: it,
                what: "corrected residual".into(),
            });
        }
        state.tau = linalg::norm_sq(&v_new) / m as f64;
        let mut r = op.apply_adjoint(&v_new);
        for (ri, xi) in r.iter_mut().zip(&state.x) {
            *ri += xi;
        }
        state.v = v_new;

        // Exact recovery drives tau to zero; keep the request valid.
        let band_sds = vec![state.tau.sqrt().max(1e-150); num_bands];
        let x_new = denoiser
            .denoise(&DenoiserRequest {
                pyramid: &r,
                band_sds: &band_sds,
                layout,
            })
            .map_err(at(it))?;
        if !linalg::all_finite(&x_new) {
            return Err(Error::NonFinite {
                iteration: it,
                what: "denoised estimate".into(),
            });
        }

        let mut record = IterationRecord::new(it);
        record.tau = Some(state.tau);
        if let Some(img) = &oracle_image {
            let est = idwt(&x_new, layout)?;
            let (h, w) = (layout.height(), layout.width());
            record.psnr = Some(psnr(
                &Image::new(h, w, est)?,
                &Image::new(h, w, img.clone())?,
            )?);
        }
        let error_stats = match oracle {
            Some(c0) => {
                let err = linalg::sub(&r, c0);
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
                gamma2: None,
                predicted_sd: Some(state.tau.sqrt()),
                empirical_sd,
                kurtosis,
                clipped: false,
            });
        }
        let denom = linalg::norm(&x_new);
        let change = linalg::norm(&linalg::sub(&x_new, &state.x));
        let rel_change = if denom > 0.0 { change / denom } else { change };
        record.rel_change = Some(rel_change);
        trace.records.push(record);

        if opts.record_denoiser_io {
            trace.denoiser_inputs.push(r.clone());
            trace.denoiser_outputs.push(x_new.clone());
        }
        prev_input = Some((r, band_sds));
        state.x = x_new;

        v_norms.push(linalg::norm(&state.v));
        if v_norms.len() > opts.divergence_window {
            let base = v_norms[v_norms.len() - 1 - opts.divergence_window];
            let last = *v_norms.last().unwrap();
            if base > 0.0 && last > opts.divergence_factor * base {
                trace.diverged = true;
                trace.notes.insert(
                    "divergence".into(),
                    format!(
                        "residual norm grew over {}x within {} iterations at iteration {it}",
                        opts.divergence_factor, opts.divergence_window
                    ),
                );
                break;
            }
        }
        if opts.stop_tolerance > 0.0 && rel_change < opts.stop_tolerance {
            break;
        }
    }

    Ok((state.x.clone(), trace))
}

/// Image-domain wrapper: conjugate the forward operator with the wavelet
/// transform, run, synthesize. No noise precision enters; the residual
/// energy estimate plays that role.
pub fn run_amp_mri(
    op: &ForwardOp,
    y: &[Complex64],
    depth: usize,
    denoiser: &dyn Denoiser,
    opts: &AmpOptions,
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
    let (coeffs, trace) = run_amp(&b_op, y, &layout, denoiser, opts, c0.as_deref())?;
    let image = Image::new(op.height(), op.width(), idwt(&coeffs, &layout)?)?;
    Ok((image, trace))
}

/// Per-iteration error-recursion diagnostics of a run recorded with
/// `record_denoiser_io`: `e` is the denoiser input error, `eps` the output
/// error, and the band SDs of `e` are what the whiteness comparison between
/// i.i.d. and structured operators looks at.
#[derive(Clone, Debug)]
pub struct AmpErrorRecord {
    pub iteration: usize,
    /// `||e||` for `e =` denoiser input minus ground truth.
    pub input_error_norm: f64,
    /// `||eps||` for `eps =` denoiser output minus ground truth.
    pub output_error_norm: f64,
    /// Per-band SD of the input error, canonical band order.
    pub input_band_sds: Vec<f64>,
}

pub fn amp_error_recursion_diagnostics(
    trace: &RunTrace,
    x0: &[Complex64],
    layout: &SubbandLayout,
) -> Result<Vec<AmpErrorRecord>> {
    if x0.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "ground truth coefficients",
            expected: layout.len(),
            got: x0.len(),
        });
    }
    if trace.denoiser_inputs.is_empty()
        || trace.denoiser_inputs.len() != trace.denoiser_outputs.len()
    {
        return Err(Error::InvalidParameter(
            "trace carries no paired denoiser inputs and outputs; run with record_denoiser_io"
                .into(),
        ));
    }
    let mut out = Vec::with_capacity(trace.denoiser_inputs.len());
    for (i, (input, output)) in trace
        .denoiser_inputs
        .iter()
        .zip(&trace.denoiser_outputs)
        .enumerate()
    {
        let e = linalg::sub(input, x0);
        let eps = linalg::sub(output, x0);
        let stats = subband_stats(&e, layout)?;
        out.push(AmpErrorRecord {
            iteration: trace.records.get(i).map(|r| r.iteration).unwrap_or(i + 1),
            input_error_norm: linalg::norm(&e),
            output_error_norm: linalg::norm(&eps),
            input_band_sds: stats.iter().map(|s| s.sd).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{ShrinkPhase, SubbandSoftThreshold, ThresholdMode};
    use crate::linop::{standard_complex_normal, DenseOp};
    use crate::model::{measure, CoilOptions, MaskOptions};
    use crate::phantom;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    struct ZeroDenoiser;
    impl Denoiser for ZeroDenoiser {
        fn denoise(&self, req: &DenoiserRequest) -> Result<Vec<Complex64>> {
            Ok(vec![Complex64::ZERO; req.pyramid.len()])
        }
        fn name(&self) -> &str {
            "zero"
        }
    }

    struct OracleDenoiser(Vec<Complex64>);
    impl Denoiser for OracleDenoiser {
        fn denoise(&self, _: &DenoiserRequest) -> Result<Vec<Complex64>> {
            Ok(self.0.clone())
        }
        fn name(&self) -> &str {
            "oracle"
        }
    }

    /// With f2 = 0 the Onsager term vanishes (the probe sees a constant
    /// map), so every residual equals beta y and the estimate stays zero.
    #[test]
    fn zero_denoiser_pins_the_residual_at_beta_y() {
        let a = DenseOp::gaussian(32, 64, 1);
        let layout = SubbandLayout::new(1, 64, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let y: Vec<Complex64> = (0..32).map(|_| standard_complex_normal(&mut rng)).collect();
        let opts = AmpOptions {
            max_iterations: 6,
            stop_tolerance: 0.0,
            ..AmpOptions::default()
        };
        let (x, trace) = run_amp(&a, &y, &layout, &ZeroDenoiser, &opts, None).unwrap();
        assert!(x.iter().all(|v| *v == Complex64::ZERO));

        let beta = 64.0 / a.frobenius_norm_sq();
        // Entry variance 1/rows makes columns unit norm on average.
        assert!((beta - 1.0).abs() < 0.15, "beta {beta}");
        let expected_tau = beta * beta * linalg::norm_sq(&y) / 32.0;
        assert_eq!(trace.iterations(), 6);
        for record in &trace.records {
            let tau = record.tau.unwrap();
            assert!(
                (tau - expected_tau).abs() <= 1e-12 * expected_tau,
                "tau {tau} vs {expected_tau} at iteration {}",
                record.iteration
            );
        }
    }

    #[test]
    fn perfect_denoiser_has_zero_output_error() {
        let a = DenseOp::gaussian(48, 64, 3);
        let layout = SubbandLayout::new(1, 64, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x0: Vec<Complex64> = (0..64).map(|_| standard_complex_normal(&mut rng)).collect();
        let y = a.apply(&x0);
        let opts = AmpOptions {
            max_iterations: 4,
            record_denoiser_io: true,
            ..AmpOptions::default()
        };
        let den = OracleDenoiser(x0.clone());
        let (x, trace) = run_amp(&a, &y, &layout, &den, &opts, Some(&x0)).unwrap();
        assert_eq!(x, x0);
        let diags = amp_error_recursion_diagnostics(&trace, &x0, &layout).unwrap();
        assert!(!diags.is_empty());
        for d in &diags {
            assert_eq!(d.output_error_norm, 0.0, "iteration {}", d.iteration);
        }
        // Noiseless + exact estimate: the second residual is exactly zero.
        if let Some(second) = diags.get(1) {
            assert_eq!(second.input_error_norm, 0.0);
        }
    }

    /// The residual-energy estimate must match the true per-coefficient
    /// input MSE once the iteration settles; that is the whole point of the
    /// Onsager correction on an i.i.d. operator.
    #[test]
    fn tau_tracks_the_oracle_input_mse_on_iid_ensembles() {
        let (m, n) = (512, 1024);
        let iters = 15;
        let seeds = [1u64, 2, 3];
        let mut tau_sum = vec![0.0; iters];
        let mut mse_sum = vec![0.0; iters];
        for &seed in &seeds {
            let a = DenseOp::gaussian(m, n, 100 + seed);
            let mut rng = ChaCha12Rng::seed_from_u64(200 + seed);
            let mut x0 = vec![Complex64::ZERO; n];
            for idx in rand::seq::index::sample(&mut rng, n, n / 20) {
                x0[idx] = standard_complex_normal(&mut rng);
            }
            let y: Vec<Complex64> = a
                .apply(&x0)
                .into_iter()
                .map(|v| v + 0.05 * standard_complex_normal(&mut rng))
                .collect();
            let layout = SubbandLayout::new(1, n, 0).unwrap();
            let den = SubbandSoftThreshold::new(
                2.0,
                ThresholdMode::SdScaled,
                ShrinkPhase::Complex,
            )
            .unwrap();
            let opts = AmpOptions {
                max_iterations: iters,
                stop_tolerance: 0.0,
                record_denoiser_io: true,
                seed,
                ..AmpOptions::default()
            };
            let (_, trace) = run_amp(&a, &y, &layout, &den, &opts, Some(&x0)).unwrap();
            assert!(!trace.diverged);
            assert_eq!(trace.iterations(), iters);
            for t in 0..iters {
                tau_sum[t] += trace.records[t].tau.unwrap();
                let e = linalg::sub(&trace.denoiser_inputs[t], &x0);
                mse_sum[t] += linalg::norm_sq(&e) / n as f64;
            }
        }
        for t in 1..iters {
            let ratio = tau_sum[t] / mse_sum[t];
            assert!(
                (ratio - 1.0).abs() < 0.15,
                "iteration {}: tau/mse ratio {ratio}",
                t + 1
            );
        }
    }

    #[test]
    fn structured_operator_trips_the_divergence_flag() {
        let n = 64;
        let x0 = phantom::by_name("gaussian-blobs", n).unwrap();
        let op = ForwardOp::build(
            n,
            n,
            1,
            &MaskOptions {
                reduction: 4.0,
                ..MaskOptions::default()
            },
            &CoilOptions::default(),
        )
        .unwrap();
        let m = measure(&x0, &op, 30.0, 8).unwrap();
        let den =
            SubbandSoftThreshold::new(2.0, ThresholdMode::SdScaled, ShrinkPhase::Complex).unwrap();
        let opts = AmpOptions {
            max_iterations: 30,
            stop_tolerance: 0.0,
            ..AmpOptions::default()
        };
        let (_, trace) = run_amp_mri(&op, &m.y, 2, &den, &opts, Some(&x0)).unwrap();
        assert!(trace.diverged, "expected the divergence flag on a masked DFT");
        assert!(trace.notes.contains_key("divergence"));
        assert!(trace.iterations() < 30);
    }

    /// Max/min of per-band input-error SDs, averaged over the recorded
    /// iterations to damp the finite-sample jitter of each SD estimate.
    fn band_spread(diags: &[AmpErrorRecord]) -> f64 {
        let bands = diags[0].input_band_sds.len();
        let mut means = vec![0.0; bands];
        for d in diags {
            for (m, s) in means.iter_mut().zip(&d.input_band_sds) {
                *m += s / diags.len() as f64;
            }
        }
        means.iter().cloned().fold(0.0, f64::max)
            / means.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// An i.i.d. operator mixes the denoiser output error across all bands,
    /// so the input error is close to white; a masked DFT does not mix, and
    /// the band SDs spread far apart.
    #[test]
    fn iid_mixing_whitens_the_input_error_where_fourier_does_not() {
        let n = 32;
        let x0 = phantom::by_name("gaussian-blobs", n).unwrap();
        let layout = SubbandLayout::new(n, n, 1).unwrap();
        let c0 = dwt(x0.data(), &layout).unwrap();
        let den =
            SubbandSoftThreshold::new(1.0, ThresholdMode::SdScaled, ShrinkPhase::Complex).unwrap();
        let opts = AmpOptions {
            max_iterations: 3,
            stop_tolerance: 0.0,
            record_denoiser_io: true,
            ..AmpOptions::default()
        };

        let a = DenseOp::gaussian(512, n * n, 21);
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let y_iid: Vec<Complex64> = a
            .apply(&c0)
            .into_iter()
            .map(|v| v + 0.02 * standard_complex_normal(&mut rng))
            .collect();
        let (_, trace_iid) = run_amp(&a, &y_iid, &layout, &den, &opts, Some(&c0)).unwrap();
        let diag_iid = amp_error_recursion_diagnostics(&trace_iid, &c0, &layout).unwrap();
        let ratio_iid = band_spread(&diag_iid);
        assert!(ratio_iid < 1.10, "iid band SD ratio {ratio_iid}");

        let op = ForwardOp::build(
            n,
            n,
            1,
            &MaskOptions {
                reduction: 4.0,
                ..MaskOptions::default()
            },
            &CoilOptions::default(),
        )
        .unwrap();
        let m = measure(&x0, &op, 30.0, 23).unwrap();
        let b_op = WaveletizedOp {
            inner: &op,
            layout: &layout,
        };
        let (_, trace_f) = run_amp(&b_op, &m.y, &layout, &den, &opts, Some(&c0)).unwrap();
        let diag_f = amp_error_recursion_diagnostics(&trace_f, &c0, &layout).unwrap();
        let ratio_fourier = band_spread(&diag_f);
        assert!(
            ratio_fourier > ratio_iid,
            "fourier ratio {ratio_fourier} vs iid {ratio_iid}"
        );
    }

    #[test]
    fn diagnostics_require_recorded_io() {
        let a = DenseOp::gaussian(16, 32, 5);
        let layout = SubbandLayout::new(1, 32, 0).unwrap();
        let y = vec![Complex64::ONE; 16];
        let (_, trace) =
            run_amp(&a, &y, &layout, &ZeroDenoiser, &AmpOptions::default(), None).unwrap();
        let x0 = vec![Complex64::ZERO; 32];
        assert!(amp_error_recursion_diagnostics(&trace, &x0, &layout).is_err());
    }

    #[test]
    fn rejects_bad_options_and_shapes() {
        let a = DenseOp::gaussian(16, 32, 6);
        let layout = SubbandLayout::new(1, 32, 0).unwrap();
        let y = vec![Complex64::ONE; 16];
        for opts in [
            AmpOptions {
                max_iterations: 0,
                ..AmpOptions::default()
            },
            AmpOptions {
                divergence_factor: 1.0,
                ..AmpOptions::default()
            },
            AmpOptions {
                divergence_window: 0,
                ..AmpOptions::default()
            },
        ] {
            assert!(run_amp(&a, &y, &layout, &ZeroDenoiser, &opts, None).is_err());
        }
        let short = vec![Complex64::ONE; 15];
        assert!(
            run_amp(&a, &short, &layout, &ZeroDenoiser, &AmpOptions::default(), None).is_err()
        );
    }
}
