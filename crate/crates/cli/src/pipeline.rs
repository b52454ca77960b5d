//! Shared plumbing between the subcommands: assembling the measurement
//! problem (fresh or from a simulate directory) and dispatching a solver.

use std::path::Path;

use dgec_core::baselines::{run_amp_mri, run_pnp_admm, run_pnp_pds};
use dgec_core::gec::run_dgec;
use dgec_core::metrics::{self, QualityReport};
use dgec_core::model::{measure, CoilMaps, ForwardOp, Image, Measurement, SamplingMask};
use dgec_core::trace::RunTrace;
use dgec_core::wavelet::SubbandLayout;
use dgec_core::io;

use crate::config::{ExperimentConfig, SolverKind};
use crate::manifest::Manifest;
use crate::{CliError, CliResult};

// Artifact file names shared by `simulate` (writer) and `reconstruct`
// (reader). Complex-valued data uses the raw format; PNG copies are for
// eyeballs only and never read back.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.cplx";
pub const MASK_CSV_FILE: &str = "mask.csv";
pub const MASK_PNG_FILE: &str = "mask.png";
pub const COILS_FILE: &str = "coils.cplx";
pub const MEASUREMENTS_FILE: &str = "measurements.cplx";

/// A fully assembled inverse problem.
pub struct Problem {
    pub op: ForwardOp,
    pub measurement: Measurement,
    pub ground_truth: Image,
}

/// Builds the problem from scratch: phantom or image file, sampling mask,
/// coil maps, and noisy measurements, all from the config's seeds.
pub fn simulate_problem(config: &ExperimentConfig) -> CliResult<Problem> {
    let ground_truth = config.ground_truth()?;
    let (h, w) = (ground_truth.height(), ground_truth.width());
    // Fail here, before any expensive work, if the grid cannot support the
    // requested decomposition depth.
    SubbandLayout::new(h, w, config.wavelet.depth)?;
    let op = ForwardOp::build(
        h,
        w,
        config.model.coils,
        &config.mask_options(),
        &config.coil_options(),
    )?;
    let measurement = measure(&ground_truth, &op, config.model.snr_db, config.noise_seed())?;
    Ok(Problem {
        op,
        measurement,
        ground_truth,
    })
}

/// Reloads the problem a previous `simulate` run left behind. The directory
/// must carry a simulate manifest whose measurement identity matches
/// `config`; every artifact consumed is re-hashed against the manifest
/// before use.
pub fn load_problem(config: &ExperimentConfig, dir: &Path) -> CliResult<Problem> {
    let manifest = Manifest::read(dir)?;
    let expected = config.measurement_sha256()?;
    if manifest.measurement_sha256 != expected {
        return Err(CliError::validation(format!(
            "{} holds data for a different measurement setup \
             (manifest {}, config {expected})",
            dir.display(),
            manifest.measurement_sha256
        )));
    }
    manifest.verify_artifacts(dir)?;

    let ground_truth = io::read_raw_image_file(dir.join(GROUND_TRUTH_FILE))?;
    let (h, w) = (ground_truth.height(), ground_truth.width());
    if manifest.grid.height != h || manifest.grid.width != w {
        return Err(CliError::validation(format!(
            "{}: manifest grid {}x{} does not match the stored ground truth {h}x{w}",
            dir.display(),
            manifest.grid.height,
            manifest.grid.width
        )));
    }

    let mask = SamplingMask::from_flags(h, w, read_mask_csv(&dir.join(MASK_CSV_FILE), h * w)?)?;
    let coils_img = io::read_raw_image_file(dir.join(COILS_FILE))?;
    let coils = manifest.grid.coils;
    if coils_img.height() != coils * h || coils_img.width() != w {
        return Err(CliError::validation(format!(
            "{}: coil stack is {}x{}, expected {}x{w}",
            dir.display(),
            coils_img.height(),
            coils_img.width(),
            coils * h
        )));
    }
    let coil_maps = CoilMaps::from_maps(coils, h, w, coils_img.into_data())?;
    let op = ForwardOp::new(mask, coil_maps)?;

    let y_img = io::read_raw_image_file(dir.join(MEASUREMENTS_FILE))?;
    let y = y_img.into_data();
    let expected_rows = op.num_coils() * op.num_samples();
    if y.len() != expected_rows {
        return Err(CliError::validation(format!(
            "{}: {} samples stored, operator expects {expected_rows}",
            dir.display(),
            y.len()
        )));
    }

    Ok(Problem {
        op,
        measurement: Measurement {
            y,
            gamma_w: manifest.gamma_w_value(),
            snr_db: manifest.snr_db_value(),
            seed: manifest.seeds.noise,
        },
        ground_truth,
    })
}

fn read_mask_csv(path: &Path, n: usize) -> CliResult<Vec<bool>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut flags = vec![false; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line == "index") {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| {
            CliError::validation(format!("{}:{}: not an index", path.display(), lineno + 1))
        })?;
        if idx >= n {
            return Err(CliError::validation(format!(
                "{}:{}: index {idx} out of range for {n} grid points",
                path.display(),
                lineno + 1
            )));
        }
        flags[idx] = true;
    }
    Ok(flags)
}

/// Runs the configured solver. `oracle` feeds per-iteration diagnostics
/// (PSNR, per-band error SDs); passing `None` leaves those columns empty.
pub fn run_solver(
    config: &ExperimentConfig,
    op: &ForwardOp,
    measurement: &Measurement,
    oracle: Option<&Image>,
) -> CliResult<(Image, RunTrace)> {
    let denoiser = config.denoise.build()?;
    let depth = config.wavelet.depth;
    let y = measurement.y.as_slice();
    let gamma_w = measurement.gamma_w;
    let result = match config.solver {
        SolverKind::Dgec => {
            // Denoiser-input snapshots back the error-statistics exports;
            // only worth the memory when an oracle is tracked.
            let opts = config.gec_options(oracle.is_some());
            run_dgec(op, y, gamma_w, depth, denoiser.as_ref(), &opts, oracle)
        }
        SolverKind::Admm => run_pnp_admm(
            op,
            y,
            gamma_w,
            depth,
            denoiser.as_ref(),
            &config.admm_options(),
            oracle,
        ),
        SolverKind::PnpPds => run_pnp_pds(
            op,
            y,
            gamma_w,
            depth,
            denoiser.as_ref(),
            &config.pds_options(),
            oracle,
        ),
        SolverKind::Amp => run_amp_mri(
            op,
            y,
            depth,
            denoiser.as_ref(),
            &config.amp_options(),
            oracle,
        ),
    };
    Ok(result?)
}

/// Final quality numbers, computed against the truth whenever one exists
/// (simulated data always has one; the oracle flag only governs the
/// per-iteration diagnostics).
pub fn quality_report(trace: &RunTrace, recon: &Image, truth: Option<&Image>) -> QualityReport {
    let (psnr, ssim) = match truth {
        Some(t) => (
            metrics::psnr(recon, t).ok(),
            metrics::ssim(recon, t).ok(),
        ),
        None => (None, None),
    };
    QualityReport {
        solver: trace.solver.clone(),
        iterations: trace.iterations(),
        psnr,
        ssim,
        diverged: trace.diverged,
    }
}
