//! The full solver loop: alternate the measurement-fidelity half-step and
//! the denoising half-step, extrapolating and damping the exchanged
//! messages, until the denoised estimate stops moving.

use std::cell::{Cell, RefCell};

use num_complex::Complex64;

use super::damping::{damp_precisions, damp_vector, validate_rho};
use super::divergence::ProbeOptions;
use super::halfstep::{gec_half_step, HalfStep, PrecisionBounds};
use super::quadratic::{effective_noise_precision, solve_f1, WaveletizedOp};
use crate::denoise::{Denoiser, DenoiserRequest};
use crate::linalg;
use crate::linop::LinearOperator;
use crate::metrics::{excess_kurtosis, psnr};
use crate::model::{ForwardOp, Image};
use crate::trace::{BandRow, IterationRecord, RunTrace};
use crate::wavelet::{dwt, idwt, subband_stats, SubbandLayout};
use crate::{Error, Result};

/// How the per-band precisions evolve across iterations.
#[derive(Clone, Copy, Debug)]
pub enum PrecisionSchedule {
    /// Learn both precision vectors from the estimated divergences.
    Adaptive,
    /// Pin both precisions to one scalar and skip divergence estimation;
    /// the extrapolations become plain reflections `2 xhat - r`. With
    /// damping 0.5 this is the classical operator-splitting iteration, kept
    /// for equivalence tests against ADMM.
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct GecOptions {
    pub max_iterations: usize,
    /// Stop when the relative change of the denoised estimate drops below
    /// this.
    pub stop_tolerance: f64,
    pub damping_rho: f64,
    pub schedule: PrecisionSchedule,
    /// Probe settings for the divergence estimates; `seed` and `context`
    /// are overridden per call site from `seed` below.
    pub probe: ProbeOptions,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    pub bounds: PrecisionBounds,
    pub seed: u64,
    /// Keep a copy of every denoiser input in the trace (memory-heavy;
    /// enables SD and quantile diagnostics without ground truth).
    pub record_denoiser_inputs: bool,
}

impl Default for GecOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            stop_tolerance: 1e-6,
            damping_rho: 0.4,
            schedule: PrecisionSchedule::Adaptive,
            probe: ProbeOptions::default(),
            cg_tolerance: 1e-8,
            cg_max_iterations: 200,
            bounds: PrecisionBounds::default(),
            seed: 0,
            record_denoiser_inputs: false,
        }
    }
}

impl GecOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_iterations >= 1 << 30 {
            return Err(Error::InvalidParameter(
                "max_iterations must be in [1, 2^30)".into(),
            ));
        }
        validate_rho(self.damping_rho)?;
        self.bounds.validate()?;
        if let PrecisionSchedule::Fixed(g) = self.schedule {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "fixed precision must be positive and finite, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// The evolving messages. `r1, gamma1` feed the measurement half, `r2,
/// gamma2` feed the denoising half; after a full iteration `eta1` and `eta2`
/// hold the posterior precisions `gamma / d` of each half.
pub struct GecState {
    pub r1: Vec<Complex64>,
    pub gamma1: Vec<f64>,
    pub r2: Vec<Complex64>,
    pub gamma2: Vec<f64>,
    pub xhat1: Vec<Complex64>,
    pub xhat2: Vec<Complex64>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub iteration: usize,
}

impl GecState {
    /// Start from the adjoint image: `r1 = B^H y`, `gamma1` the inverse
    /// per-band second moment of that start (scale-aware without ground
    /// truth), everything else empty until the first iteration fills it.
    pub fn init(
        b_op: &dyn LinearOperator,
        y: &[Complex64],
        layout: &SubbandLayout,
        bounds: &PrecisionBounds,
    ) -> Result<Self> {
        let r1 = b_op.apply_adjoint(y);
        let gamma1 = subband_stats(&r1, layout)?
            .iter()
            .map(|s| {
                if s.sd > 0.0 {
                    bounds.clip(1.0 / (s.sd * s.sd))
                } else {
                    bounds.max
                }
            })
            .collect();
        let n = layout.len();
        Ok(Self {
            r1,
            gamma1,
            r2: vec![Complex64::ZERO; n],
            gamma2: Vec::new(),
            xhat1: Vec::new(),
            xhat2: Vec::new(),
            eta1: Vec::new(),
            eta2: Vec::new(),
            iteration: 0,
        })
    }
}

fn finite_or_abort(v: &[Complex64], iteration: usize, what: &str) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            iteration,
            what: what.into(),
        })
    }
}

fn at(iteration: usize) -> impl Fn(Error) -> Error {
    move |source| Error::At {
        iteration,
        source: Box::new(source),
    }
}

/// Runs the solver on a measurement operator acting on wavelet coefficients.
///
/// `oracle` is the true coefficient vector; when present, every iteration
/// records image-domain PSNR plus per-band empirical error SDs and excess
/// kurtosis of the denoiser input, which is what the predicted-vs-actual
/// noise diagnostics consume.
pub fn run_gec(
    b_op: &dyn LinearOperator,
    y: &[Complex64],
    gamma_w: f64,
    layout: &SubbandLayout,
    denoiser: &dyn Denoiser,
    opts: &GecOptions,
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
    if let Some(c0) = oracle {
        if c0.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                what: "oracle coefficients",
                expected: layout.len(),
                got: c0.len(),
            });
        }
    }
    let gamma_w_eff = effective_noise_precision(gamma_w);
    let num_bands = layout.num_bands();

    let mut state = GecState::init(b_op, y, layout, &opts.bounds)?;
    if let PrecisionSchedule::Fixed(g) = opts.schedule {
        state.gamma1 = vec![g; num_bands];
        state.gamma2 = vec![g; num_bands];
    }

    let mut trace = RunTrace::new("dgec");
    trace.band_sizes = layout.band_sizes();
    trace.notes.insert("denoiser".into(), denoiser.name().into());
    trace
        .notes
        .insert("gamma_w_eff".into(), format!("{gamma_w_eff:.6e}"));
    trace
        .notes
        .insert("damping_rho".into(), format!("{}", opts.damping_rho));
    trace.notes.insert(
        "schedule".into(),
        match opts.schedule {
            PrecisionSchedule::Adaptive => "adaptive".into(),
            PrecisionSchedule::Fixed(g) => format!("fixed({g})"),
        },
    );
    trace.notes.insert("seed".into(), format!("{}", opts.seed));

    let oracle_image = oracle
        .map(|c0| -> Result<Vec<Complex64>> { idwt(c0, layout) })
        .transpose()?;

    // Warm start shared by the main f1 solve and its probe solves; the
    // perturbed systems sit within a probe step of the unperturbed one.
    let warm: RefCell<Option<Vec<Complex64>>> = RefCell::new(None);
    let rho = opts.damping_rho;
    let mut have_half2 = false;
    let mut prev_xhat2: Option<Vec<Complex64>> = None;

    for it in 1..=opts.max_iterations {
        state.iteration = it;
        let cg_spent = Cell::new(0usize);

        // Measurement half: proximal step of the data fidelity.
        let gamma1 = state.gamma1.clone();
        let f1 = |r: &[Complex64]| -> Result<Vec<Complex64>> {
            let out = solve_f1(
                b_op,
                y,
                gamma_w_eff,
                layout,
                &gamma1,
                r,
                warm.borrow().as_deref(),
                opts.cg_tolerance,
                opts.cg_max_iterations,
            )?;
            cg_spent.set(cg_spent.get() + out.iterations);
            *warm.borrow_mut() = Some(out.solution.clone());
            Ok(out.solution)
        };

        let (gamma2_new, r2_new, clipped1) = match opts.schedule {
            PrecisionSchedule::Adaptive => {
                let probe = ProbeOptions {
                    seed: opts.seed,
                    context: 2 * it as u64,
                    ..opts.probe.clone()
                };
                let half: HalfStep =
                    gec_half_step(&f1, &state.r1, &state.gamma1, layout, &probe, &opts.bounds)
                        .map_err(at(it))?;
                state.xhat1 = half.xhat;
                state.eta1 = half.eta;
                (half.gamma_next, half.r_next, half.clipped)
            }
            PrecisionSchedule::Fixed(g) => {
                state.xhat1 = f1(&state.r1).map_err(at(it))?;
                state.eta1 = vec![2.0 * g; num_bands];
                let reflected: Vec<Complex64> = state
                    .xhat1
                    .iter()
                    .zip(&state.r1)
                    .map(|(xh, r)| 2.0 * xh - r)
                    .collect();
                (vec![g; num_bands], reflected, vec![false; num_bands])
            }
        };

        if have_half2 {
            state.gamma2 = damp_precisions(&gamma2_new, &state.gamma2, rho);
            state.r2 = damp_vector(&r2_new, &state.r2, rho);
        } else {
            state.gamma2 = gamma2_new;
            state.r2 = r2_new;
            have_half2 = true;
        }
        finite_or_abort(&state.r2, it, "denoiser input r2")?;

        if opts.record_denoiser_inputs {
            trace.denoiser_inputs.push(state.r2.clone());
        }

        // Denoising half.
        let band_sds: Vec<f64> = state.gamma2.iter().map(|g| 1.0 / g.sqrt()).collect();
        let f2 = |r: &[Complex64]| -> Result<Vec<Complex64>> {
            denoiser.denoise(&DenoiserRequest {
                pyramid: r,
                band_sds: &band_sds,
                layout,
            })
        };

        let (gamma1_new, r1_new, clipped2) = match opts.schedule {
            PrecisionSchedule::Adaptive => {
                let probe = ProbeOptions {
                    seed: opts.seed,
                    context: 2 * it as u64 + 1,
                    ..opts.probe.clone()
                };
                let half: HalfStep =
                    gec_half_step(&f2, &state.r2, &state.gamma2, layout, &probe, &opts.bounds)
                        .map_err(at(it))?;
                state.xhat2 = half.xhat;
                state.eta2 = half.eta;
                (half.gamma_next, half.r_next, half.clipped)
            }
            PrecisionSchedule::Fixed(g) => {
                state.xhat2 = f2(&state.r2).map_err(at(it))?;
                state.eta2 = vec![2.0 * g; num_bands];
                let reflected: Vec<Complex64> = state
                    .xhat2
                    .iter()
                    .zip(&state.r2)
                    .map(|(xh, r)| 2.0 * xh - r)
                    .collect();
                (vec![g; num_bands], reflected, vec![false; num_bands])
            }
        };

        state.gamma1 = damp_precisions(&gamma1_new, &state.gamma1, rho);
        state.r1 = damp_vector(&r1_new, &state.r1, rho);
        finite_or_abort(&state.r1, it, "measurement input r1")?;
        finite_or_abort(&state.xhat2, it, "denoised estimate")?;

        // Record the iteration.
        let mut record = IterationRecord::new(it);
        record.cg_iters = cg_spent.get();
        if let Some(img) = &oracle_image {
            let est = idwt(&state.xhat2, layout)?;
            let h = layout.height();
            let w = layout.width();
            record.psnr = Some(psnr(
                &Image::new(h, w, est)?,
                &Image::new(h, w, img.clone())?,
            )?);
        }
        let error_stats = match oracle {
            Some(c0) => {
                let err = linalg::sub(&state.r2, c0);
                Some((subband_stats(&err, layout)?, err))
            }
            None => None,
        };
        for l in 0..num_bands {
            let (empirical_sd, kurtosis) = match &error_stats {
                Some((stats, err)) => {
                    let band = layout.band(l);
                    let s = &stats[l];
                    let reals: Vec<f64> = err[band.range()].iter().map(|v| v.re).collect();
                    (Some(s.sd), Some(excess_kurtosis(&reals)))
                }
                None => (None, None),
            };
            record.bands.push(BandRow {
                band: l,
                gamma2: Some(state.gamma2[l]),
                predicted_sd: Some(1.0 / state.gamma2[l].sqrt()),
                empirical_sd,
                kurtosis,
                clipped: clipped1[l] || clipped2[l],
            });
        }

        record.rel_change = prev_xhat2.as_ref().map(|prev| {
            let denom = linalg::norm(&state.xhat2);
            let num = linalg::norm(&linalg::sub(&state.xhat2, prev));
            if denom > 0.0 {
                num / denom
            } else {
                num
            }
        });
        prev_xhat2 = Some(state.xhat2.clone());
        let stop = record
            .rel_change
            .map(|c| c < opts.stop_tolerance)
            .unwrap_or(false);
        trace.records.push(record);
        if stop {
            break;
        }
    }

    Ok((state.xhat2.clone(), trace))
}

/// Image-domain wrapper: conjugates the measurement operator with the
/// wavelet transform at the given depth, runs the solver, and synthesizes
/// the reconstruction.
pub fn run_dgec(
    op: &ForwardOp,
    y: &[Complex64],
    gamma_w: f64,
    depth: usize,
    denoiser: &dyn Denoiser,
    opts: &GecOptions,
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
    let (coeffs, trace) = run_gec(
        &b_op,
        y,
        gamma_w,
        &layout,
        denoiser,
        opts,
        c0.as_deref(),
    )?;
    let image = Image::new(op.height(), op.width(), idwt(&coeffs, &layout)?)?;
    Ok((image, trace))
}
