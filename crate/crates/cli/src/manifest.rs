//! Run manifests: everything needed to reproduce a run's outputs.

use std::path::{Path, PathBuf};

use permci::simulate::SimConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::IngestOptions;
use crate::error::CliError;
use crate::output::{Format, SCHEMA_VERSION};

pub const TOOL_NAME: &str = "permci";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings shared by `ci`, `joint` and `bootstrap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub ingest: IngestOptions,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    pub threshold: f64,
    pub bootstrap: usize,
    pub bootstrap_level: f64,
    pub format: Format,
    pub export_plan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub sim: SimConfig,
    pub rhos: Vec<f64>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Ci(AnalysisConfig),
    Joint(AnalysisConfig),
    Bootstrap(AnalysisConfig),
    Simulate(SimulateConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Ci(_) => "ci",
            RunConfig::Joint(_) => "joint",
            RunConfig::Bootstrap(_) => "bootstrap",
            RunConfig::Simulate(_) => "simulate",
        }
    }

    pub fn input(&self) -> Option<&Path> {
        match self {
            RunConfig::Ci(a) | RunConfig::Joint(a) | RunConfig::Bootstrap(a) => Some(&a.input),
            RunConfig::Simulate(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub input_sha256: Option<String>,
    pub threads: Option<usize>,
}

impl RunManifest {
    pub fn new(config: RunConfig, input_sha256: Option<String>, threads: Option<usize>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config,
            input_sha256,
            threads,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))
    }

    /// Refuses manifests this build cannot reproduce, and inputs whose
    /// contents changed since the recorded run.
    pub fn verify(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Replay(format!(
                "manifest schema {} is not {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.tool != TOOL_NAME || self.tool_version != TOOL_VERSION {
            return Err(CliError::Replay(format!(
                "manifest written by {} {}, this is {TOOL_NAME} {TOOL_VERSION}",
                self.tool, self.tool_version
            )));
        }
        if let Some(input) = self.config.input() {
            let actual = sha256_file(input)?;
            if self.input_sha256.as_deref() != Some(actual.as_str()) {
                return Err(CliError::Replay(format!(
                    "{} has digest {actual}, manifest records {}",
                    input.display(),
                    self.input_sha256.as_deref().unwrap_or("none")
                )));
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
