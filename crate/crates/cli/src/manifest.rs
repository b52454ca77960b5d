//! Run manifests: the single JSON file that makes a run directory
//! self-describing and bit-exactly reproducible.
//!
//! A manifest embeds the canonical config text, every resolved seed, the
//! format version, and a SHA-256 per artifact file. It deliberately carries
//! no timestamps or host details: rerunning the same config must produce a
//! byte-identical manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, ExperimentConfig};
use crate::{CliError, CliResult};

/// Bumped whenever the manifest schema or any artifact encoding changes.
pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    Reconstruct,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub mask: u64,
    pub noise: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub coils: usize,
}

/// What the solver reported; `error` set means the run failed after
/// validation and the process exited with the runtime code.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub solver: String,
    pub iterations: usize,
    pub diverged: bool,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: RunKind,
    /// Hash of `config_toml`, the full experiment identity.
    pub config_sha256: String,
    /// Hash over only the measurement-determining fields; reconstruction
    /// from a simulate directory checks this before trusting its data.
    pub measurement_sha256: String,
    pub seeds: Seeds,
    pub grid: Grid,
    pub samples_selected: usize,
    pub acceleration_actual: f64,
    /// `None` marks noiseless data (the values are infinite).
    pub snr_db: Option<f64>,
    pub gamma_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOutcome>,
    /// Artifact file name -> SHA-256 of its bytes, sorted by name.
    pub artifacts: BTreeMap<String, String>,
    /// Canonical config text; parsing it reproduces the run.
    pub config_toml: String,
}

impl Manifest {
    pub fn new(kind: RunKind, config: &ExperimentConfig) -> CliResult<Self> {
        let config_toml = config.canonical_toml()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            kind,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            measurement_sha256: config.measurement_sha256()?,
            seeds: Seeds {
                master: config.seed,
                mask: config.mask_seed(),
                noise: config.noise_seed(),
            },
            grid: Grid {
                height: 0,
                width: 0,
                coils: config.model.coils,
            },
            samples_selected: 0,
            acceleration_actual: 0.0,
            snr_db: config.model.snr_db.is_finite().then_some(config.model.snr_db),
            gamma_w: None,
            solver: None,
            artifacts: BTreeMap::new(),
            config_toml,
        })
    }

    /// Records `gamma_w`, mapping the infinite (noiseless) value to `None`
    /// so the JSON stays lossless.
    pub fn set_gamma_w(&mut self, gamma_w: f64) {
        self.gamma_w = gamma_w.is_finite().then_some(gamma_w);
    }

    pub fn gamma_w_value(&self) -> f64 {
        self.gamma_w.unwrap_or(f64::INFINITY)
    }

    pub fn snr_db_value(&self) -> f64 {
        self.snr_db.unwrap_or(f64::INFINITY)
    }

    /// Hashes an artifact already written into `dir` and records it. The
    /// bytes are read back from disk so the hash covers what is actually
    /// there.
    pub fn record_artifact(&mut self, dir: &Path, name: &str) -> CliResult<()> {
        let bytes = std::fs::read(dir.join(name)).map_err(|e| {
            CliError::runtime(format!("hashing artifact {name}: {e}"))
        })?;
        self.artifacts.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("manifest encoding: {e}")))?;
        std::fs::write(dir.join(MANIFEST_NAME), json + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::validation(format!("cannot read {}: {e}", path.display()))
        })?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("{} is not a valid manifest: {e}", path.display()))
        })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(CliError::validation(format!(
                "{}: format version {} (this build reads {})",
                path.display(),
                manifest.format_version,
                FORMAT_VERSION
            )));
        }
        Ok(manifest)
    }

    /// Re-parses the embedded config; the result hashes back to
    /// `config_sha256` by construction.
    pub fn config(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_toml_str(&self.config_toml)
    }

    /// Checks every recorded artifact hash against the directory contents.
    pub fn verify_artifacts(&self, dir: &Path) -> CliResult<()> {
        for (name, expected) in &self.artifacts {
            let bytes = std::fs::read(dir.join(name)).map_err(|e| {
                CliError::validation(format!("artifact {name} missing: {e}"))
            })?;
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(CliError::validation(format!(
                    "artifact {name} does not match its recorded hash"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_toml_str("[model]\nphantom = \"shepp-logan\"\nsize = 32\n")
            .unwrap()
    }

    #[test]
    fn manifest_round_trips_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config();
        let mut m = Manifest::new(RunKind::Simulate, &cfg).unwrap();
        m.grid = Grid { height: 32, width: 32, coils: 1 };
        m.samples_selected = 256;
        m.acceleration_actual = 4.0;
        m.set_gamma_w(2.5);
        std::fs::write(dir.path().join("mask.csv"), b"index\n3\n").unwrap();
        m.record_artifact(dir.path(), "mask.csv").unwrap();
        m.write(dir.path()).unwrap();
        let first = std::fs::read(dir.path().join(MANIFEST_NAME)).unwrap();
        m.write(dir.path()).unwrap();
        let second = std::fs::read(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(first, second);

        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back.config_sha256, m.config_sha256);
        assert_eq!(back.gamma_w_value(), 2.5);
        back.verify_artifacts(dir.path()).unwrap();
        assert_eq!(back.config().unwrap().sha256().unwrap(), back.config_sha256);
    }

    #[test]
    fn infinite_noise_precision_survives_json() {
        let mut m = Manifest::new(RunKind::Simulate, &config()).unwrap();
        m.set_gamma_w(f64::INFINITY);
        let json = serde_json::to_string(&m).unwrap();
        let back: Manifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.gamma_w_value(), f64::INFINITY);
    }

    #[test]
    fn corrupted_artifact_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(RunKind::Simulate, &config()).unwrap();
        std::fs::write(dir.path().join("a.bin"), b"one").unwrap();
        m.record_artifact(dir.path(), "a.bin").unwrap();
        std::fs::write(dir.path().join("a.bin"), b"two").unwrap();
        assert!(m.verify_artifacts(dir.path()).is_err());
    }

    #[test]
    fn version_gate_rejects_future_formats() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(RunKind::Simulate, &config()).unwrap();
        m.format_version = FORMAT_VERSION + 1;
        m.write(dir.path()).unwrap();
        assert!(Manifest::read(dir.path()).is_err());
    }
}
