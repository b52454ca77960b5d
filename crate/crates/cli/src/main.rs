use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use dgec_cli::batch::{cmd_batch, BatchArgs};
use dgec_cli::config;
use dgec_cli::protocol::{
    cmd_denoise_endpoint, cmd_denoise_test, DenoiseTestArgs, EndpointArgs, EndpointKind,
};
use dgec_cli::reconstruct::{cmd_reconstruct, ReconstructArgs};
use dgec_cli::selftest::{cmd_selftest, SelftestArgs};
use dgec_cli::simulate::{cmd_simulate, SimulateArgs};
use dgec_cli::{CliResult, EXIT_RUNTIME, EXIT_VALIDATION, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(
    name = "dgec",
    version,
    about = "Compressed-sensing MRI reconstruction with per-band noise tracking",
    after_long_help = format!(
        "Output directories default to runs/<config-stem>; relative paths resolve \
         under ${OUTPUT_ROOT_ENV} when it is set.\n\n\
         Configuration file (TOML), every key at its default:\n\n{}",
        config::EXAMPLE_CONFIG
    )
)]
struct Cli {
    /// Override the config's master seed (mask, noise, and probe streams
    /// derive from it).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Emit log records as JSON lines on stderr.
    #[arg(long, global = true)]
    json_logs: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate measurements and write them to a run directory with a
    /// manifest.
    Simulate {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Run directory (default: runs/<config-stem>).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Reconstruct an image; writes the result, a per-iteration trace, and
    /// a quality report.
    Reconstruct {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Run directory (default: runs/<config-stem>).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Reuse a simulate directory instead of simulating in process.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Track the ground truth: per-iteration PSNR, per-band error SDs,
        /// and the error-statistics exports.
        #[arg(long)]
        oracle: bool,
    },
    /// Run one reconstruction per config and aggregate the results.
    Batch {
        /// Config files or glob patterns, one run each.
        #[arg(required = true)]
        configs: Vec<String>,
        /// Batch directory (default: runs/batch); runs use subdirectories.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Worker threads (default: one per CPU).
        #[arg(long, short)]
        jobs: Option<usize>,
        /// Enable oracle diagnostics for every run.
        #[arg(long)]
        oracle: bool,
    },
    /// Check the numerical core against independent oracles.
    Selftest {
        /// Negative control: corrupt the DFT scaling through a test hook;
        /// the dense-operator suite must then fail.
        #[arg(long)]
        corrupt_dft: bool,
    },
    /// Drive the denoiser wire protocol end to end and check the answers.
    DenoiseTest {
        /// External endpoint to test, as a command line.
        #[arg(long, num_args = 1.., conflicts_with = "url")]
        command: Option<Vec<String>>,
        /// External endpoint to test, as an HTTP URL.
        #[arg(long)]
        url: Option<String>,
        /// Self-test over HTTP instead of pipes.
        #[arg(long, conflicts_with_all = ["command", "url"])]
        http: bool,
        /// Response deadline per request.
        #[arg(long, default_value_t = 30.0)]
        timeout_secs: f64,
    },
    /// Serve a built-in denoiser over the wire protocol (stdin/stdout, or
    /// HTTP with --listen).
    DenoiseEndpoint {
        #[arg(long, value_enum, default_value_t = EndpointKind::Echo)]
        kind: EndpointKind,
        /// Threshold weight (soft-threshold only).
        #[arg(long, default_value_t = 1.2)]
        lambda: f64,
        /// How the per-band SD sets the threshold.
        #[arg(long, value_enum, default_value_t = config::ThresholdRule::Variance)]
        mode: config::ThresholdRule,
        /// Shrink the complex magnitude or the real part.
        #[arg(long, value_enum, default_value_t = config::PhaseRule::Complex)]
        phase: config::PhaseRule,
        /// TCP address for HTTP serving, e.g. 127.0.0.1:0.
        #[arg(long)]
        listen: Option<String>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation failures (exit 1); help and
            // version requests are successes.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging(cli.json_logs);
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Cmd::Simulate { config, output } => {
            let dir = cmd_simulate(&SimulateArgs {
                config_path: &config,
                output: output.as_deref(),
                seed_override: cli.seed,
            })?;
            println!("{}", dir.display());
            Ok(0)
        }
        Cmd::Reconstruct {
            config,
            output,
            input,
            oracle,
        } => {
            let dir = cmd_reconstruct(&ReconstructArgs {
                config_path: &config,
                output: output.as_deref(),
                input: input.as_deref(),
                seed_override: cli.seed,
                oracle_override: oracle,
            })?;
            println!("{}", dir.display());
            Ok(0)
        }
        Cmd::Batch {
            configs,
            output,
            jobs,
            oracle,
        } => {
            let (dir, summary) = cmd_batch(&BatchArgs {
                patterns: &configs,
                output: output.as_deref(),
                jobs,
                seed_override: cli.seed,
                oracle_override: oracle,
            })?;
            for row in &summary.runs {
                println!(
                    "{:<24} {:<8} psnr={:<8} {}",
                    row.config,
                    row.solver,
                    row.psnr.map(|p| format!("{p:.2}")).unwrap_or_default(),
                    row.status
                );
            }
            println!("{}", dir.display());
            // Partial failures: everything is written, the code says look.
            Ok(if summary.failed > 0 { EXIT_RUNTIME } else { 0 })
        }
        Cmd::Selftest { corrupt_dft } => {
            let results = cmd_selftest(&SelftestArgs { corrupt_dft })?;
            let mut all_passed = true;
            for r in &results {
                println!(
                    "{:<24} {} {:>9.1} ms",
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.millis
                );
                if !r.passed {
                    all_passed = false;
                    println!("    {}", r.detail);
                }
            }
            Ok(if all_passed { 0 } else { EXIT_RUNTIME })
        }
        Cmd::DenoiseTest {
            command,
            url,
            http,
            timeout_secs,
        } => {
            let checks = cmd_denoise_test(&DenoiseTestArgs {
                command,
                url,
                http,
                timeout_secs,
            })?;
            let mut all_passed = true;
            for c in &checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
                if !c.passed {
                    all_passed = false;
                    println!("    {}", c.detail);
                }
            }
            Ok(if all_passed { 0 } else { EXIT_RUNTIME })
        }
        Cmd::DenoiseEndpoint {
            kind,
            lambda,
            mode,
            phase,
            listen,
        } => {
            cmd_denoise_endpoint(&EndpointArgs {
                kind,
                lambda,
                mode,
                phase,
                listen,
            })?;
            Ok(0)
        }
    }
}

fn init_logging(json: bool) {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if json {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().to_string().to_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    let _ = builder.try_init();
}
