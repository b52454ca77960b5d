//! The `simulate` subcommand: build the measurement problem and write every
//! piece to disk with a manifest.

use std::path::{Path, PathBuf};

use dgec_core::io;
use dgec_core::model::Image;

use crate::config::{resolve_output_dir, ExperimentConfig};
use crate::manifest::{Grid, Manifest, RunKind};
use crate::pipeline::{
    self, Problem, COILS_FILE, GROUND_TRUTH_FILE, MASK_CSV_FILE, MASK_PNG_FILE, MEASUREMENTS_FILE,
};
use crate::CliResult;

pub struct SimulateArgs<'a> {
    pub config_path: &'a Path,
    pub output: Option<&'a Path>,
    pub seed_override: Option<u64>,
}

/// Runs the simulation and returns the populated run directory. Rerunning
/// with the same config produces byte-identical artifacts.
pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<PathBuf> {
    let mut config = ExperimentConfig::from_path(args.config_path)?;
    config.apply_overrides(args.seed_override, false);
    let dir = resolve_output_dir(args.output, &config, args.config_path);
    std::fs::create_dir_all(&dir)?;

    let problem = pipeline::simulate_problem(&config)?;
    let mut manifest = Manifest::new(RunKind::Simulate, &config)?;
    write_problem(&dir, &problem, &mut manifest)?;
    manifest.write(&dir)?;

    log::info!(
        "simulate: {} samples at R = {:.2}, gamma_w = {:e}",
        problem.op.num_samples(),
        problem.op.mask().acceleration(),
        problem.measurement.gamma_w
    );
    Ok(dir)
}

/// Writes ground truth, mask, coil maps, and measurements into `dir` and
/// records their hashes and summary facts in `manifest`.
pub fn write_problem(dir: &Path, problem: &Problem, manifest: &mut Manifest) -> CliResult<()> {
    let op = &problem.op;
    let (h, w) = (op.height(), op.width());
    let coils = op.num_coils();

    io::write_raw_image_file(dir.join(GROUND_TRUTH_FILE), &problem.ground_truth)?;
    io::write_image_png8(dir.join("ground_truth.png"), &problem.ground_truth)?;
    io::write_mask_csv_file(dir.join(MASK_CSV_FILE), op.mask())?;
    io::write_mask_png(dir.join(MASK_PNG_FILE), op.mask())?;

    // Coil maps as one vertically stacked complex image, coil-major.
    let mut stacked = Vec::with_capacity(coils * h * w);
    for c in 0..coils {
        stacked.extend_from_slice(op.coil_maps().map(c));
    }
    io::write_raw_image_file(dir.join(COILS_FILE), &Image::new(coils * h, w, stacked)?)?;

    // Measurements as a coils x samples complex image, matching the
    // operator's row order.
    let y_img = Image::new(coils, op.num_samples(), problem.measurement.y.clone())?;
    io::write_raw_image_file(dir.join(MEASUREMENTS_FILE), &y_img)?;

    manifest.grid = Grid {
        height: h,
        width: w,
        coils,
    };
    manifest.samples_selected = op.num_samples();
    manifest.acceleration_actual = op.mask().acceleration();
    manifest.set_gamma_w(problem.measurement.gamma_w);
    for name in [
        GROUND_TRUTH_FILE,
        "ground_truth.png",
        MASK_CSV_FILE,
        MASK_PNG_FILE,
        COILS_FILE,
        MEASUREMENTS_FILE,
    ] {
        manifest.record_artifact(dir, name)?;
    }
    Ok(())
}
