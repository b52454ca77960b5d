//! Experiment configuration: one TOML file drives simulation and recovery.
//!
//! Section names mirror the library modules that consume them (`[model]`,
//! `[wavelet]`, `[denoise]`, `[gec]`, `[baselines]`); top-level keys select
//! the solver, the master seed, the output directory, and the oracle flag.
//! Every omitted key falls back to the library default, so the minimal valid
//! config is a `[model]` table naming an image source.
//!
//! Seed policy: `seed` is the master; the mask draws with `model.mask_seed`
//! (default `seed`), the measurement noise with `model.noise_seed` (default
//! `seed + 1`), and the solver's probe streams with `seed` itself. The
//! manifest records all three resolved values.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dgec_core::baselines::{AdmmOptions, AmpOptions, PdsOptions};
use dgec_core::denoise::{
    Denoiser, EchoDenoiser, ExternalDenoiser, ShrinkPhase, SubbandSoftThreshold, ThresholdMode,
    Transport,
};
use dgec_core::gec::{GecOptions, PrecisionSchedule, ProbeMode, ProbeOptions};
use dgec_core::model::{CoilOptions, Image, MaskOptions};
use dgec_core::{io, phantom};

use crate::{CliError, CliResult};

/// Annotated configuration with every key at its default value, shown by
/// `--help`. A unit test parses it and checks it resolves exactly to the
/// defaults, so the text cannot drift from the code.
pub const EXAMPLE_CONFIG: &str = r#"# Master seed; mask uses model.mask_seed (default: seed), noise uses
# model.noise_seed (default: seed + 1), solver probes use seed itself.
seed = 0
# One of: dgec, pnp-pds, admm, amp.
solver = "dgec"
# Output directory (CLI --output wins; relative paths resolve under
# $DGEC_OUTPUT_ROOT when set). Default: runs/<config-stem>.
# output = "runs/demo"
# Track the ground truth through the run: per-iteration PSNR, per-band
# error SDs, and the error-statistics exports.
oracle = false

[model]
phantom = "shepp-logan"   # or: path = "image.png" (PNG/PGM/raw complex)
size = 128                # grid size for a built-in phantom
acceleration = 4.0        # acceleration R; keeps round(N / R) k-space points
center_fraction = 0.08    # fully sampled central square, fraction of min(H, W)
exponent = 8.0            # polynomial decay of the sampling density
coils = 1                 # receive coils (Biot-Savart loop maps)
loop_radius = 0.25        # coil loop radius, field-of-view units
loop_distance = 0.7       # loop center distance from image center
snr_db = 40.0             # pre-masking SNR; `inf` for noiseless
# mask_seed = 0
# noise_seed = 1

[wavelet]
depth = 4                 # decomposition depth D; 3D+1 subbands

[denoise]
kind = "soft-threshold"   # soft-threshold | echo | external
lambda = 1.2              # threshold weight
mode = "variance"         # variance: tau = lambda sd^2; sd: tau = lambda sd
phase = "complex"         # complex: shrink magnitude; real: shrink real part
timeout_secs = 30.0       # external endpoint deadline
# command = ["my-denoiser", "--flag"]   # external over stdin/stdout
# url = "http://127.0.0.1:8080/"        # external over HTTP POST

[gec]
max_iterations = 50
stop_tolerance = 1e-6
damping = 0.4             # convex weight on new messages (precisions in log domain)
probes_per_band = 1       # Monte-Carlo probes per band and half-step
probe_mode = "per-band"   # per-band | shared
cg_tolerance = 1e-8
cg_max_iterations = 200
# fixed_gamma = 1.0       # pin both precisions, skip divergence estimation

[baselines]
admm_gamma = 1.0          # ADMM splitting stepsize
pds_stepsize_scale = 1.0  # sigma tau ||B||^2 for the primal-dual solver, in (0, 1]
amp_divergence_factor = 10.0
amp_divergence_window = 5
# max_iterations = 100    # override the per-solver default budget
# stop_tolerance = 1e-6
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Dgec,
    PnpPds,
    Admm,
    Amp,
}

impl Default for SolverKind {
    fn default() -> Self {
        Self::Dgec
    }
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dgec => "dgec",
            Self::PnpPds => "pnp-pds",
            Self::Admm => "admm",
            Self::Amp => "amp",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverKind,
    /// Output location; never part of the experiment identity hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub oracle: bool,
    pub model: ModelConfig,
    #[serde(default)]
    pub wavelet: WaveletConfig,
    #[serde(default)]
    pub denoise: DenoiseConfig,
    #[serde(default)]
    pub gec: GecSection,
    #[serde(default)]
    pub baselines: BaselinesSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Built-in phantom name; exclusive with `path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<String>,
    /// Grid size for a built-in phantom.
    #[serde(default = "d_size")]
    pub size: usize,
    /// Ground-truth image file; exclusive with `phantom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "d_acceleration")]
    pub acceleration: f64,
    #[serde(default = "d_center_fraction")]
    pub center_fraction: f64,
    #[serde(default = "d_exponent")]
    pub exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_seed: Option<u64>,
    #[serde(default = "d_coils")]
    pub coils: usize,
    #[serde(default = "d_loop_radius")]
    pub loop_radius: f64,
    #[serde(default = "d_loop_distance")]
    pub loop_distance: f64,
    /// Pre-masking SNR in dB; `inf` requests noiseless measurements.
    #[serde(default = "d_snr_db")]
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletConfig {
    #[serde(default = "d_depth")]
    pub depth: usize,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self { depth: d_depth() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiserKind {
    SoftThreshold,
    Echo,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    Variance,
    Sd,
}

impl ThresholdRule {
    fn to_core(self) -> ThresholdMode {
        match self {
            Self::Variance => ThresholdMode::VarianceScaled,
            Self::Sd => ThresholdMode::SdScaled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRule {
    Complex,
    Real,
}

impl PhaseRule {
    fn to_core(self) -> ShrinkPhase {
        match self {
            Self::Complex => ShrinkPhase::Complex,
            Self::Real => ShrinkPhase::RealPart,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseConfig {
    #[serde(default = "d_denoiser_kind")]
    pub kind: DenoiserKind,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_threshold_rule")]
    pub mode: ThresholdRule,
    #[serde(default = "d_phase_rule")]
    pub phase: PhaseRule,
    /// External endpoint as a command line, framed messages over its
    /// standard input/output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    /// External endpoint as an HTTP URL, one POST per request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default = "d_timeout_secs")]
    pub timeout_secs: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            kind: d_denoiser_kind(),
            lambda: d_lambda(),
            mode: d_threshold_rule(),
            phase: d_phase_rule(),
            command: None,
            url: None,
            timeout_secs: d_timeout_secs(),
        }
    }
}

impl DenoiseConfig {
    fn validate(&self) -> CliResult<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(CliError::validation(format!(
                "denoise.lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return Err(CliError::validation(format!(
                "denoise.timeout_secs must be positive and finite, got {}",
                self.timeout_secs
            )));
        }
        let transports = usize::from(self.command.is_some()) + usize::from(self.url.is_some());
        match self.kind {
            DenoiserKind::External if transports != 1 => Err(CliError::validation(
                "denoise.kind = \"external\" needs exactly one of denoise.command or denoise.url",
            )),
            DenoiserKind::External => Ok(()),
            _ if transports != 0 => Err(CliError::validation(
                "denoise.command / denoise.url only apply to denoise.kind = \"external\"",
            )),
            _ => Ok(()),
        }
    }

    /// Instantiates the denoiser; external kinds connect (and spawn) here.
    pub fn build(&self) -> CliResult<Box<dyn Denoiser>> {
        match self.kind {
            DenoiserKind::Echo => Ok(Box::new(EchoDenoiser)),
            DenoiserKind::SoftThreshold => Ok(Box::new(SubbandSoftThreshold::new(
                self.lambda,
                self.mode.to_core(),
                self.phase.to_core(),
            )?)),
            DenoiserKind::External => {
                let transport = match (&self.command, &self.url) {
                    (Some(argv), None) => Transport::Subprocess { argv: argv.clone() },
                    (None, Some(url)) => Transport::Http { url: url.clone() },
                    _ => {
                        return Err(CliError::validation(
                            "external denoiser needs exactly one of command or url",
                        ))
                    }
                };
                let timeout = Duration::from_secs_f64(self.timeout_secs);
                Ok(Box::new(ExternalDenoiser::connect(&transport, timeout)?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeModeRule {
    PerBand,
    Shared,
}

impl ProbeModeRule {
    fn to_core(self) -> ProbeMode {
        match self {
            Self::PerBand => ProbeMode::PerBand,
            Self::Shared => ProbeMode::Shared,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GecSection {
    #[serde(default = "d_gec_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "d_gec_stop_tolerance")]
    pub stop_tolerance: f64,
    #[serde(default = "d_damping")]
    pub damping: f64,
    #[serde(default = "d_probes_per_band")]
    pub probes_per_band: usize,
    #[serde(default = "d_probe_mode")]
    pub probe_mode: ProbeModeRule,
    #[serde(default = "d_cg_tolerance")]
    pub cg_tolerance: f64,
    #[serde(default = "d_cg_max_iterations")]
    pub cg_max_iterations: usize,
    /// Pins both precision vectors to this scalar and skips divergence
    /// estimation (the plain operator-splitting mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_gamma: Option<f64>,
}

impl Default for GecSection {
    fn default() -> Self {
        Self {
            max_iterations: d_gec_max_iterations(),
            stop_tolerance: d_gec_stop_tolerance(),
            damping: d_damping(),
            probes_per_band: d_probes_per_band(),
            probe_mode: d_probe_mode(),
            cg_tolerance: d_cg_tolerance(),
            cg_max_iterations: d_cg_max_iterations(),
            fixed_gamma: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesSection {
    /// Iteration budget override; each solver keeps its own default when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tolerance: Option<f64>,
    #[serde(default = "d_admm_gamma")]
    pub admm_gamma: f64,
    #[serde(default = "d_pds_scale")]
    pub pds_stepsize_scale: f64,
    #[serde(default = "d_amp_factor")]
    pub amp_divergence_factor: f64,
    #[serde(default = "d_amp_window")]
    pub amp_divergence_window: usize,
}

impl Default for BaselinesSection {
    fn default() -> Self {
        Self {
            max_iterations: None,
            stop_tolerance: None,
            admm_gamma: d_admm_gamma(),
            pds_stepsize_scale: d_pds_scale(),
            amp_divergence_factor: d_amp_factor(),
            amp_divergence_window: d_amp_window(),
        }
    }
}

// Defaults delegate to the library types so the two can never disagree.
fn d_size() -> usize {
    128
}
fn d_acceleration() -> f64 {
    MaskOptions::default().reduction
}
fn d_center_fraction() -> f64 {
    MaskOptions::default().center_fraction
}
fn d_exponent() -> f64 {
    MaskOptions::default().exponent
}
fn d_coils() -> usize {
    1
}
fn d_loop_radius() -> f64 {
    CoilOptions::default().loop_radius
}
fn d_loop_distance() -> f64 {
    CoilOptions::default().loop_distance
}
fn d_snr_db() -> f64 {
    40.0
}
fn d_depth() -> usize {
    4
}
fn d_denoiser_kind() -> DenoiserKind {
    DenoiserKind::SoftThreshold
}
fn d_lambda() -> f64 {
    SubbandSoftThreshold::default().lambda
}
fn d_threshold_rule() -> ThresholdRule {
    ThresholdRule::Variance
}
fn d_phase_rule() -> PhaseRule {
    PhaseRule::Complex
}
fn d_timeout_secs() -> f64 {
    30.0
}
fn d_gec_max_iterations() -> usize {
    GecOptions::default().max_iterations
}
fn d_gec_stop_tolerance() -> f64 {
    GecOptions::default().stop_tolerance
}
fn d_damping() -> f64 {
    GecOptions::default().damping_rho
}
fn d_probes_per_band() -> usize {
    ProbeOptions::default().probes_per_band
}
fn d_probe_mode() -> ProbeModeRule {
    ProbeModeRule::PerBand
}
fn d_cg_tolerance() -> f64 {
    GecOptions::default().cg_tolerance
}
fn d_cg_max_iterations() -> usize {
    GecOptions::default().cg_max_iterations
}
fn d_admm_gamma() -> f64 {
    AdmmOptions::default().gamma
}
fn d_pds_scale() -> f64 {
    PdsOptions::default().stepsize_scale
}
fn d_amp_factor() -> f64 {
    AmpOptions::default().divergence_factor
}
fn d_amp_window() -> usize {
    AmpOptions::default().divergence_window
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text)
            .map_err(|e| CliError::validation(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides before the config is resolved or
    /// hashed, so manifests record the effective run.
    pub fn apply_overrides(&mut self, seed: Option<u64>, oracle: bool) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if oracle {
            self.oracle = true;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        match (&self.model.phantom, &self.model.path) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation(
                    "model.phantom and model.path are mutually exclusive",
                ))
            }
            (None, None) => {
                return Err(CliError::validation(
                    "model needs an image source: set model.phantom or model.path",
                ))
            }
            (Some(name), None) => {
                phantom::by_name(name, 16).map_err(|_| {
                    CliError::validation(format!(
                        "unknown phantom {name:?}; built-ins: shepp-logan, gaussian-blobs"
                    ))
                })?;
                let block = 1usize << self.wavelet.depth;
                if self.model.size % block != 0 {
                    return Err(CliError::validation(format!(
                        "model.size {} is not divisible by 2^depth = {block}",
                        self.model.size
                    )));
                }
            }
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(CliError::validation(format!(
                        "model.path {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        if self.model.coils == 0 {
            return Err(CliError::validation("model.coils must be at least 1"));
        }
        if self.model.snr_db.is_nan() {
            return Err(CliError::validation("model.snr_db must not be NaN"));
        }
        if self.wavelet.depth > 12 {
            return Err(CliError::validation(format!(
                "wavelet.depth {} is out of range (max 12)",
                self.wavelet.depth
            )));
        }
        self.denoise.validate()?;
        Ok(())
    }

    pub fn mask_seed(&self) -> u64 {
        self.model.mask_seed.unwrap_or(self.seed)
    }

    pub fn noise_seed(&self) -> u64 {
        self.model.noise_seed.unwrap_or_else(|| self.seed.wrapping_add(1))
    }

    /// Loads the ground-truth image (0-255 scale).
    pub fn ground_truth(&self) -> CliResult<Image> {
        match (&self.model.phantom, &self.model.path) {
            (Some(name), None) => Ok(phantom::by_name(name, self.model.size)?),
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(CliError::validation(format!(
                        "model.path {} does not exist",
                        path.display()
                    )));
                }
                Ok(io::load_image_file(path)?)
            }
            _ => Err(CliError::validation(
                "model needs exactly one image source (phantom or path)",
            )),
        }
    }

    pub fn mask_options(&self) -> MaskOptions {
        MaskOptions {
            reduction: self.model.acceleration,
            center_fraction: self.model.center_fraction,
            exponent: self.model.exponent,
            seed: self.mask_seed(),
        }
    }

    pub fn coil_options(&self) -> CoilOptions {
        CoilOptions {
            loop_radius: self.model.loop_radius,
            loop_distance: self.model.loop_distance,
        }
    }

    pub fn gec_options(&self, record_denoiser_inputs: bool) -> GecOptions {
        let g = &self.gec;
        GecOptions {
            max_iterations: g.max_iterations,
            stop_tolerance: g.stop_tolerance,
            damping_rho: g.damping,
            schedule: match g.fixed_gamma {
                Some(gamma) => PrecisionSchedule::Fixed(gamma),
                None => PrecisionSchedule::Adaptive,
            },
            probe: ProbeOptions {
                probes_per_band: g.probes_per_band,
                mode: g.probe_mode.to_core(),
                ..ProbeOptions::default()
            },
            cg_tolerance: g.cg_tolerance,
            cg_max_iterations: g.cg_max_iterations,
            seed: self.seed,
            record_denoiser_inputs,
            ..GecOptions::default()
        }
    }

    pub fn admm_options(&self) -> AdmmOptions {
        let mut opts = AdmmOptions {
            gamma: self.baselines.admm_gamma,
            ..AdmmOptions::default()
        };
        if let Some(n) = self.baselines.max_iterations {
            opts.max_iterations = n;
        }
        if let Some(t) = self.baselines.stop_tolerance {
            opts.stop_tolerance = t;
        }
        opts
    }

    pub fn pds_options(&self) -> PdsOptions {
        let mut opts = PdsOptions {
            stepsize_scale: self.baselines.pds_stepsize_scale,
            seed: self.seed,
            ..PdsOptions::default()
        };
        if let Some(n) = self.baselines.max_iterations {
            opts.max_iterations = n;
        }
        if let Some(t) = self.baselines.stop_tolerance {
            opts.stop_tolerance = t;
        }
        opts
    }

    pub fn amp_options(&self) -> AmpOptions {
        let mut opts = AmpOptions {
            divergence_factor: self.baselines.amp_divergence_factor,
            divergence_window: self.baselines.amp_divergence_window,
            seed: self.seed,
            ..AmpOptions::default()
        };
        if let Some(n) = self.baselines.max_iterations {
            opts.max_iterations = n;
        }
        if let Some(t) = self.baselines.stop_tolerance {
            opts.stop_tolerance = t;
        }
        opts
    }

    /// Canonical serialization (fixed key order, `output` excluded): the
    /// byte string the identity hash is computed over, embedded in every
    /// manifest.
    pub fn canonical_toml(&self) -> CliResult<String> {
        toml::to_string(self)
            .map_err(|e| CliError::runtime(format!("config serialization: {e}")))
    }

    /// Hash of the full resolved config (everything except output location).
    pub fn sha256(&self) -> CliResult<String> {
        Ok(sha256_hex(self.canonical_toml()?.as_bytes()))
    }

    /// Hash over only the fields that determine the measurement data, so
    /// runs that differ in solver settings can share simulate artifacts.
    pub fn measurement_sha256(&self) -> CliResult<String> {
        #[derive(Serialize)]
        struct MeasurementIdentity<'a> {
            phantom: &'a Option<String>,
            size: usize,
            path: Option<String>,
            acceleration: f64,
            center_fraction: f64,
            exponent: f64,
            mask_seed: u64,
            coils: usize,
            loop_radius: f64,
            loop_distance: f64,
            snr_db: f64,
            noise_seed: u64,
        }
        let identity = MeasurementIdentity {
            phantom: &self.model.phantom,
            size: self.model.size,
            path: self.model.path.as_ref().map(|p| p.display().to_string()),
            acceleration: self.model.acceleration,
            center_fraction: self.model.center_fraction,
            exponent: self.model.exponent,
            mask_seed: self.mask_seed(),
            coils: self.model.coils,
            loop_radius: self.model.loop_radius,
            loop_distance: self.model.loop_distance,
            snr_db: self.model.snr_db,
            noise_seed: self.noise_seed(),
        };
        let json = serde_json::to_string(&identity)
            .map_err(|e| CliError::runtime(format!("measurement identity: {e}")))?;
        Ok(sha256_hex(json.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory resolution: explicit flag, then `output` in the config,
/// then `runs/<config-stem>`; relative results land under `$DGEC_OUTPUT_ROOT`
/// when that is set.
pub fn resolve_output_dir(
    explicit: Option<&Path>,
    config: &ExperimentConfig,
    config_path: &Path,
) -> PathBuf {
    let chosen: PathBuf = match (explicit, &config.output) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            PathBuf::from("runs").join(stem)
        }
    };
    if chosen.is_relative() {
        if let Some(root) = std::env::var_os(crate::OUTPUT_ROOT_ENV) {
            return PathBuf::from(root).join(chosen);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nphantom = \"shepp-logan\"\n";

    #[test]
    fn minimal_config_gets_library_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.solver, SolverKind::Dgec);
        assert!(!c.oracle);
        assert_eq!(c.model.size, 128);
        assert_eq!(c.model.acceleration, 4.0);
        assert_eq!(c.model.coils, 1);
        assert_eq!(c.model.snr_db, 40.0);
        assert_eq!(c.wavelet.depth, 4);
        assert_eq!(c.denoise.lambda, SubbandSoftThreshold::default().lambda);
        assert_eq!(c.gec.max_iterations, GecOptions::default().max_iterations);
        assert_eq!(c.mask_seed(), 0);
        assert_eq!(c.noise_seed(), 1);
    }

    #[test]
    fn example_config_resolves_to_the_defaults() {
        let example = ExperimentConfig::from_toml_str(EXAMPLE_CONFIG).unwrap();
        let minimal = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        // Identical canonical form = every commented default in the help
        // text matches the code.
        assert_eq!(
            example.canonical_toml().unwrap(),
            minimal.canonical_toml().unwrap()
        );
    }

    #[test]
    fn solver_names_parse() {
        for (name, kind) in [
            ("dgec", SolverKind::Dgec),
            ("pnp-pds", SolverKind::PnpPds),
            ("admm", SolverKind::Admm),
            ("amp", SolverKind::Amp),
        ] {
            let text = format!("solver = \"{name}\"\n{MINIMAL}");
            let c = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(c.solver, kind);
            assert_eq!(c.solver.name(), name);
        }
        assert!(ExperimentConfig::from_toml_str(&format!(
            "solver = \"vamp\"\n{MINIMAL}"
        ))
        .is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[model]\nphantom = \"shepp-logan\"\nacceleraton = 4.0\n";
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)), "{err}");
        assert!(err.to_string().contains("acceleraton"));
    }

    #[test]
    fn image_source_must_be_exactly_one() {
        let both = "[model]\nphantom = \"shepp-logan\"\npath = \"x.png\"\n";
        assert!(ExperimentConfig::from_toml_str(both).is_err());
        let neither = "[model]\nsize = 64\n";
        assert!(ExperimentConfig::from_toml_str(neither).is_err());
        let missing_file = "[model]\npath = \"does-not-exist-anywhere.png\"\n";
        let err = ExperimentConfig::from_toml_str(missing_file).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn phantom_size_must_match_the_depth() {
        let text = "[model]\nphantom = \"shepp-logan\"\nsize = 72\n";
        // 72 is not divisible by 2^4.
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("divisible"));
        let shallow = format!("{text}[wavelet]\ndepth = 3\n");
        assert!(ExperimentConfig::from_toml_str(&shallow).is_ok());
    }

    #[test]
    fn external_denoiser_needs_exactly_one_transport() {
        let none = format!("{MINIMAL}[denoise]\nkind = \"external\"\n");
        assert!(ExperimentConfig::from_toml_str(&none).is_err());
        let with_url = format!(
            "{MINIMAL}[denoise]\nkind = \"external\"\nurl = \"http://127.0.0.1:1/\"\n"
        );
        assert!(ExperimentConfig::from_toml_str(&with_url).is_ok());
        let on_builtin = format!("{MINIMAL}[denoise]\nurl = \"http://127.0.0.1:1/\"\n");
        assert!(ExperimentConfig::from_toml_str(&on_builtin).is_err());
    }

    #[test]
    fn noiseless_snr_parses_from_inf() {
        let text = "[model]\nphantom = \"gaussian-blobs\"\nsnr_db = inf\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.model.snr_db, f64::INFINITY);
        // And survives the canonical round trip.
        let again = ExperimentConfig::from_toml_str(&c.canonical_toml().unwrap()).unwrap();
        assert_eq!(again.model.snr_db, f64::INFINITY);
    }

    #[test]
    fn hash_ignores_output_but_not_solver_settings() {
        let a = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml_str(&format!("output = \"elsewhere\"\n{MINIMAL}"))
            .unwrap();
        assert_eq!(a.sha256().unwrap(), b.sha256().unwrap());

        let c =
            ExperimentConfig::from_toml_str(&format!("{MINIMAL}[gec]\nmax_iterations = 7\n"))
                .unwrap();
        assert_ne!(a.sha256().unwrap(), c.sha256().unwrap());
        // Solver settings do not touch the measurement identity.
        assert_eq!(
            a.measurement_sha256().unwrap(),
            c.measurement_sha256().unwrap()
        );
        let d = ExperimentConfig::from_toml_str(&format!("seed = 5\n{MINIMAL}")).unwrap();
        assert_ne!(
            a.measurement_sha256().unwrap(),
            d.measurement_sha256().unwrap()
        );
    }

    #[test]
    fn overrides_apply_before_hashing() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let base = c.sha256().unwrap();
        c.apply_overrides(Some(9), true);
        assert_eq!(c.seed, 9);
        assert!(c.oracle);
        assert_ne!(c.sha256().unwrap(), base);
    }

    #[test]
    fn option_builders_carry_the_seed() {
        let text = format!("seed = 11\n{MINIMAL}[gec]\nfixed_gamma = 2.5\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let gec = c.gec_options(false);
        assert_eq!(gec.seed, 11);
        assert!(matches!(gec.schedule, PrecisionSchedule::Fixed(g) if g == 2.5));
        assert_eq!(c.pds_options().seed, 11);
        assert_eq!(c.amp_options().seed, 11);
        assert_eq!(c.mask_options().seed, 11);
        assert_eq!(c.mask_options().reduction, 4.0);
    }

    #[test]
    fn output_dir_resolution_order() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let cfg_path = Path::new("configs/demo.toml");
        assert_eq!(
            resolve_output_dir(None, &c, cfg_path),
            PathBuf::from("runs/demo")
        );
        let with_output =
            ExperimentConfig::from_toml_str(&format!("output = \"out/a\"\n{MINIMAL}")).unwrap();
        assert_eq!(
            resolve_output_dir(None, &with_output, cfg_path),
            PathBuf::from("out/a")
        );
        assert_eq!(
            resolve_output_dir(Some(Path::new("/abs")), &with_output, cfg_path),
            PathBuf::from("/abs")
        );
    }
}
