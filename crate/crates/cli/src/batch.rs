//! The `batch` subcommand: run many reconstructions, one per config file,
//! and aggregate the results.
//!
//! Every run gets its own subdirectory (named after the config file stem)
//! and its own RNG streams from its own config, so runs never interact. A
//! failing run becomes a failed row; the batch always finishes and always
//! writes the summary CSV and the comparison JSON.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::manifest::Manifest;
use crate::reconstruct::{cmd_reconstruct, ReconstructArgs};
use crate::{CliError, CliResult};

pub const BATCH_CSV_FILE: &str = "batch.csv";
pub const COMPARISON_FILE: &str = "comparison.json";

pub struct BatchArgs<'a> {
    /// Config paths or glob patterns, processed in the order given.
    pub patterns: &'a [String],
    pub output: Option<&'a Path>,
    /// Worker count; 0 or absent picks the thread-pool default.
    pub jobs: Option<usize>,
    pub seed_override: Option<u64>,
    pub oracle_override: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRow {
    pub config: String,
    pub dir: String,
    pub solver: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub iterations: usize,
    pub diverged: bool,
    /// "ok" or the error message.
    pub status: String,
}

impl RunRow {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Serialize)]
pub struct BatchSummary {
    pub runs: Vec<RunRow>,
    pub succeeded: usize,
    pub failed: usize,
}

/// Runs the batch and writes `batch.csv` and `comparison.json` into the
/// batch directory. Partial failures do not abort: they are reported as
/// rows and through the `failed` count.
pub fn cmd_batch(args: &BatchArgs) -> CliResult<(PathBuf, BatchSummary)> {
    let configs = expand_patterns(args.patterns)?;
    let dir = batch_dir(args.output);
    std::fs::create_dir_all(&dir)?;

    let rows = run_all(&configs, &dir, args);
    let succeeded = rows.iter().filter(|r| r.succeeded()).count();
    let summary = BatchSummary {
        failed: rows.len() - succeeded,
        succeeded,
        runs: rows,
    };

    std::fs::write(dir.join(BATCH_CSV_FILE), render_csv(&summary.runs))?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::runtime(format!("comparison encoding: {e}")))?;
    std::fs::write(dir.join(COMPARISON_FILE), json + "\n")?;
    Ok((dir, summary))
}

fn batch_dir(explicit: Option<&Path>) -> PathBuf {
    let chosen = explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("runs/batch"));
    if chosen.is_relative() {
        if let Some(root) = std::env::var_os(crate::OUTPUT_ROOT_ENV) {
            return PathBuf::from(root).join(chosen);
        }
    }
    chosen
}

/// Expands glob patterns (literal paths pass through), keeps the argument
/// order, and rejects duplicate stems since those would share a
/// subdirectory.
fn expand_patterns(patterns: &[String]) -> CliResult<Vec<PathBuf>> {
    if patterns.is_empty() {
        return Err(CliError::validation("batch needs at least one config"));
    }
    let mut paths = Vec::new();
    for pattern in patterns {
        if pattern.contains(['*', '?', '[']) {
            let matches: Vec<PathBuf> = glob::glob(pattern)
                .map_err(|e| CliError::validation(format!("bad pattern {pattern:?}: {e}")))?
                .filter_map(|entry| entry.ok())
                .collect();
            if matches.is_empty() {
                return Err(CliError::validation(format!(
                    "pattern {pattern:?} matches no files"
                )));
            }
            paths.extend(matches);
        } else {
            let path = PathBuf::from(pattern);
            if !path.is_file() {
                return Err(CliError::validation(format!(
                    "config {pattern:?} does not exist"
                )));
            }
            paths.push(path);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for path in &paths {
        if !seen.insert(stem_of(path)) {
            return Err(CliError::validation(format!(
                "duplicate config stem {:?}: each batch entry needs a distinct file name",
                stem_of(path)
            )));
        }
    }
    Ok(paths)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn run_all(configs: &[PathBuf], dir: &Path, args: &BatchArgs) -> Vec<RunRow> {
    // The batch directory is resolved once; run directories are passed
    // explicitly so the output-root env var is not applied twice.
    let run_one = |path: &PathBuf| -> RunRow {
        let stem = stem_of(path);
        let run_dir = dir.join(&stem);
        let result = cmd_reconstruct(&ReconstructArgs {
            config_path: path,
            output: Some(&run_dir),
            input: None,
            seed_override: args.seed_override,
            oracle_override: args.oracle_override,
        });
        match result {
            Ok(out) => match Manifest::read(&out) {
                Ok(manifest) => {
                    let outcome = manifest.solver.unwrap_or(crate::manifest::SolverOutcome {
                        solver: String::new(),
                        iterations: 0,
                        diverged: false,
                        psnr: None,
                        ssim: None,
                        error: Some("manifest carries no solver outcome".into()),
                    });
                    RunRow {
                        config: stem,
                        dir: out.display().to_string(),
                        solver: outcome.solver,
                        psnr: outcome.psnr,
                        ssim: outcome.ssim,
                        iterations: outcome.iterations,
                        diverged: outcome.diverged,
                        status: outcome
                            .error
                            .map_or_else(|| "ok".into(), |e| format!("error: {e}")),
                    }
                }
                Err(e) => failed_row(stem, &run_dir, e.to_string()),
            },
            Err(e) => failed_row(stem, &run_dir, e.to_string()),
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs.unwrap_or(0))
            .build();
        match pool {
            Ok(pool) => pool.install(|| configs.par_iter().map(run_one).collect()),
            // A broken pool is no reason to drop the batch.
            Err(_) => configs.iter().map(run_one).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        configs.iter().map(run_one).collect()
    }
}

fn failed_row(config: String, dir: &Path, message: String) -> RunRow {
    RunRow {
        config,
        dir: dir.display().to_string(),
        solver: String::new(),
        psnr: None,
        ssim: None,
        iterations: 0,
        diverged: false,
        status: message,
    }
}

/// Per-run rows plus a `mean` row over the successful ones. Numeric cells
/// use full-precision formatting, so a single-run mean reproduces its row
/// exactly.
fn render_csv(rows: &[RunRow]) -> String {
    let mut out = String::from("config,solver,psnr_db,ssim,iterations,diverged,status\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_cell(&row.config),
            row.solver,
            opt(row.psnr),
            opt(row.ssim),
            row.iterations,
            row.diverged,
            csv_cell(&row.status)
        ));
    }
    let ok: Vec<&RunRow> = rows.iter().filter(|r| r.succeeded()).collect();
    if !ok.is_empty() {
        let mean = |field: fn(&RunRow) -> Option<f64>| -> Option<f64> {
            let values: Vec<f64> = ok.iter().filter_map(|r| field(r)).collect();
            (values.len() == ok.len())
                .then(|| values.iter().sum::<f64>() / values.len() as f64)
        };
        out.push_str(&format!(
            "mean,,{},{},{},,{}/{} ok\n",
            opt(mean(|r| r.psnr)),
            opt(mean(|r| r.ssim)),
            ok.iter().map(|r| r.iterations).sum::<usize>() as f64 / ok.len() as f64,
            ok.len(),
            rows.len()
        ));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    fn small_body(seed: u64, solver: &str) -> String {
        format!(
            "seed = {seed}\nsolver = \"{solver}\"\n[model]\nphantom = \"shepp-logan\"\n\
             size = 32\nsnr_db = 30.0\n[wavelet]\ndepth = 2\n[gec]\nmax_iterations = 3\ncg_max_iterations = 2000\n\
             [baselines]\nmax_iterations = 3\n"
        )
    }

    fn run_batch(patterns: &[String], out: &Path, jobs: Option<usize>) -> (PathBuf, BatchSummary) {
        cmd_batch(&BatchArgs {
            patterns,
            output: Some(out),
            jobs,
            seed_override: None,
            oracle_override: false,
        })
        .unwrap()
    }

    fn csv_lines(dir: &Path) -> Vec<String> {
        std::fs::read_to_string(dir.join(BATCH_CSV_FILE))
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn single_run_aggregate_equals_its_row() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), "only.toml", &small_body(0, "dgec"));
        let (dir, summary) = run_batch(
            &[cfg.display().to_string()],
            &tmp.path().join("batch"),
            None,
        );
        assert_eq!(summary.succeeded, 1);
        let lines = csv_lines(&dir);
        assert_eq!(lines.len(), 3, "header, one row, mean:\n{}", lines.join("\n"));
        let row: Vec<&str> = lines[1].split(',').collect();
        let mean: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row[0], "only");
        assert_eq!(mean[0], "mean");
        // psnr, ssim, iterations agree exactly.
        assert_eq!(row[2], mean[2]);
        assert_eq!(row[3], mean[3]);
        assert_eq!(row[4], mean[4]);
    }

    #[test]
    fn mean_sits_between_two_seeded_rows() {
        let tmp = tempfile::tempdir().unwrap();
        let a = write_config(tmp.path(), "seed0.toml", &small_body(0, "dgec"));
        let b = write_config(tmp.path(), "seed1.toml", &small_body(1, "dgec"));
        let (dir, summary) = run_batch(
            &[a.display().to_string(), b.display().to_string()],
            &tmp.path().join("batch"),
            Some(2),
        );
        assert_eq!(summary.succeeded, 2);
        let psnr_a = summary.runs[0].psnr.unwrap();
        let psnr_b = summary.runs[1].psnr.unwrap();
        assert_ne!(psnr_a, psnr_b, "different seeds must give different data");

        let lines = csv_lines(&dir);
        let mean_psnr: f64 = lines[3].split(',').nth(2).unwrap().parse().unwrap();
        let (lo, hi) = (psnr_a.min(psnr_b), psnr_a.max(psnr_b));
        assert!(lo <= mean_psnr && mean_psnr <= hi);
        assert!((mean_psnr - (psnr_a + psnr_b) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rows_keep_input_order_and_separate_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let a = write_config(tmp.path(), "zeta.toml", &small_body(0, "dgec"));
        let b = write_config(tmp.path(), "alpha.toml", &small_body(0, "admm"));
        let (dir, summary) = run_batch(
            &[a.display().to_string(), b.display().to_string()],
            &tmp.path().join("batch"),
            Some(2),
        );
        assert_eq!(summary.runs[0].config, "zeta");
        assert_eq!(summary.runs[1].config, "alpha");
        assert!(dir.join("zeta").join("recon.cplx").is_file());
        assert!(dir.join("alpha").join("recon.cplx").is_file());
        assert_eq!(summary.runs[1].solver, "admm");
    }

    #[test]
    fn a_failing_run_does_not_stop_the_batch() {
        let tmp = tempfile::tempdir().unwrap();
        let good = write_config(tmp.path(), "good.toml", &small_body(0, "dgec"));
        let bad = write_config(
            tmp.path(),
            "bad.toml",
            "[model]\npath = \"missing-image.png\"\n",
        );
        let result = cmd_batch(&BatchArgs {
            patterns: &[good.display().to_string(), bad.display().to_string()],
            output: Some(&tmp.path().join("batch")),
            jobs: None,
            seed_override: None,
            oracle_override: false,
        });
        let (dir, summary) = result.unwrap();
        assert_eq!(summary.succeeded, 1);
        assert_eq!(summary.failed, 1);
        assert!(summary.runs[1].status.contains("does not exist"));

        let lines = csv_lines(&dir);
        assert_eq!(lines.len(), 4, "{}", lines.join("\n"));
        assert!(lines[3].starts_with("mean,"));
        assert!(lines[3].ends_with("1/2 ok"));
        let comparison: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(COMPARISON_FILE)).unwrap())
                .unwrap();
        assert_eq!(comparison["runs"].as_array().unwrap().len(), 2);
        assert_eq!(comparison["failed"], 1);
    }

    #[test]
    fn glob_patterns_expand_and_duplicates_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_config(tmp.path(), "g1.toml", &small_body(0, "dgec"));
        write_config(tmp.path(), "g2.toml", &small_body(1, "dgec"));
        let pattern = tmp.path().join("g*.toml").display().to_string();
        let paths = expand_patterns(&[pattern]).unwrap();
        assert_eq!(paths.len(), 2);

        let sub = tmp.path().join("sub");
        std::fs::create_dir(&sub).unwrap();
        let dupe = write_config(&sub, "g1.toml", &small_body(2, "dgec"));
        let err = expand_patterns(&[
            tmp.path().join("g1.toml").display().to_string(),
            dupe.display().to_string(),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));

        assert!(expand_patterns(&[tmp.path().join("none-*.toml").display().to_string()])
            .is_err());
    }

    #[test]
    fn comparison_json_covers_both_solvers() {
        let tmp = tempfile::tempdir().unwrap();
        let a = write_config(tmp.path(), "run-dgec.toml", &small_body(0, "dgec"));
        let b = write_config(tmp.path(), "run-pds.toml", &small_body(0, "pnp-pds"));
        let (dir, summary) = run_batch(
            &[a.display().to_string(), b.display().to_string()],
            &tmp.path().join("batch"),
            Some(2),
        );
        assert_eq!(summary.succeeded, 2);
        let solvers: Vec<&str> = summary.runs.iter().map(|r| r.solver.as_str()).collect();
        assert_eq!(solvers, ["dgec", "pnp-pds"]);
        // Both runs left complete traces behind.
        for row in &summary.runs {
            let trace = std::fs::read_to_string(dir.join(&row.config).join("trace.csv")).unwrap();
            assert!(trace.lines().count() > 1, "{}: empty trace", row.config);
        }
    }
}
