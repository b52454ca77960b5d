//! The `reconstruct` subcommand: solve the inverse problem and write the
//! image, the per-iteration trace, and the quality report.
//!
//! Data comes either from a simulate directory (`--input`, hash-checked
//! against the config) or from an in-process simulation. With `oracle`
//! enabled and the default solver, the per-band error diagnostics are
//! exported as well.

use std::fs::File;
use std::path::{Path, PathBuf};

use dgec_core::io;
use dgec_core::metrics;
use dgec_core::trace::RunTrace;
use dgec_core::wavelet::{self, SubbandLayout};

use crate::config::{resolve_output_dir, ExperimentConfig, SolverKind};
use crate::manifest::{Grid, Manifest, RunKind, SolverOutcome};
use crate::pipeline::{self, Problem};
use crate::{CliError, CliResult};

pub const RECON_FILE: &str = "recon.cplx";
pub const TRACE_CSV_FILE: &str = "trace.csv";
pub const TRACE_JSON_FILE: &str = "trace.json";
pub const REPORT_FILE: &str = "report.json";

pub struct ReconstructArgs<'a> {
    pub config_path: &'a Path,
    pub output: Option<&'a Path>,
    /// Simulate directory to reuse instead of simulating in process.
    pub input: Option<&'a Path>,
    pub seed_override: Option<u64>,
    pub oracle_override: bool,
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<PathBuf> {
    let mut config = ExperimentConfig::from_path(args.config_path)?;
    config.apply_overrides(args.seed_override, args.oracle_override);
    let dir = resolve_output_dir(args.output, &config, args.config_path);
    std::fs::create_dir_all(&dir)?;

    let problem = match args.input {
        Some(input) => pipeline::load_problem(&config, input)?,
        None => pipeline::simulate_problem(&config)?,
    };

    let mut manifest = Manifest::new(RunKind::Reconstruct, &config)?;
    manifest.grid = Grid {
        height: problem.op.height(),
        width: problem.op.width(),
        coils: problem.op.num_coils(),
    };
    manifest.samples_selected = problem.op.num_samples();
    manifest.acceleration_actual = problem.op.mask().acceleration();
    manifest.set_gamma_w(problem.measurement.gamma_w);

    let oracle = config.oracle.then_some(&problem.ground_truth);
    let (recon, trace) =
        match pipeline::run_solver(&config, &problem.op, &problem.measurement, oracle) {
            Ok(pair) => pair,
            Err(err) => {
                // A failed solve still leaves a manifest behind so the run
                // directory explains itself.
                manifest.solver = Some(SolverOutcome {
                    solver: config.solver.name().to_string(),
                    iterations: 0,
                    diverged: false,
                    psnr: None,
                    ssim: None,
                    error: Some(err.to_string()),
                });
                manifest.write(&dir)?;
                return Err(err);
            }
        };

    io::write_raw_image_file(dir.join(RECON_FILE), &recon)?;
    io::write_image_png8(dir.join("recon.png"), &recon)?;
    trace.write_csv_file(dir.join(TRACE_CSV_FILE))?;
    std::fs::write(dir.join(TRACE_JSON_FILE), trace.to_json()? + "\n")?;

    let report = pipeline::quality_report(&trace, &recon, Some(&problem.ground_truth));
    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("report encoding: {e}")))?;
    std::fs::write(dir.join(REPORT_FILE), report_json + "\n")?;

    let mut artifacts = vec![
        RECON_FILE,
        "recon.png",
        TRACE_CSV_FILE,
        TRACE_JSON_FILE,
        REPORT_FILE,
    ];
    if config.oracle {
        metrics::write_error_map(
            dir.join("error_map.png"),
            &recon,
            &problem.ground_truth,
            None,
        )?;
        artifacts.push("error_map.png");
        artifacts.push("error_map.scale.json");
        if config.solver == SolverKind::Dgec {
            write_error_statistics(&dir, &config, &problem, &trace, &mut artifacts)?;
        }
    }

    manifest.solver = Some(SolverOutcome {
        solver: trace.solver.clone(),
        iterations: trace.iterations(),
        diverged: trace.diverged,
        psnr: report.psnr.filter(|p| p.is_finite()),
        ssim: report.ssim,
        error: None,
    });
    for name in &artifacts {
        manifest.record_artifact(&dir, name)?;
    }
    manifest.write(&dir)?;

    log::info!(
        "reconstruct: {} finished after {} iterations{}",
        trace.solver,
        trace.iterations(),
        match report.psnr {
            Some(p) => format!(", psnr {p:.2} dB"),
            None => String::new(),
        }
    );
    Ok(dir)
}

pub const SD_EVOLUTION_FILE: &str = "sd_evolution.csv";
pub const QQ_FILE: &str = "qq.json";

/// Oracle-only exports: predicted vs realized per-band error SDs across
/// iterations, and normal quantile pairs of the final denoiser-input error.
fn write_error_statistics(
    dir: &Path,
    config: &ExperimentConfig,
    problem: &Problem,
    trace: &RunTrace,
    artifacts: &mut Vec<&'static str>,
) -> CliResult<()> {
    let layout = SubbandLayout::new(
        problem.op.height(),
        problem.op.width(),
        config.wavelet.depth,
    )?;
    let c0 = wavelet::dwt(problem.ground_truth.data(), &layout)?;

    let rows = metrics::sd_evolution(trace, Some((&c0, &layout)))?;
    metrics::write_sd_evolution_csv(File::create(dir.join(SD_EVOLUTION_FILE))?, &rows)?;
    artifacts.push(SD_EVOLUTION_FILE);

    if let Some(last_input) = trace.denoiser_inputs.last() {
        let errors: Vec<_> = last_input.iter().zip(&c0).map(|(r, c)| r - c).collect();
        let qq = metrics::qq_export(&errors, &layout, 64)?;
        let json = serde_json::to_string_pretty(&qq)
            .map_err(|e| CliError::runtime(format!("qq encoding: {e}")))?;
        std::fs::write(dir.join(QQ_FILE), json + "\n")?;
        artifacts.push(QQ_FILE);
    }
    Ok(())
}
