//! TOML run configuration. Every key is optional and mirrors
//! [`ExperimentConfig`]; unknown keys are rejected.
//!
//! ```toml
//! n = 1024
//! trials = 200
//! rates = [0.05, 0.10, 0.15]
//! solvers = ["omp", "cosamp"]
//! snr_db = 25.0
//!
//! [device]
//! tmr = 1.0
//! mz_mode = "uniform_resample"
//!
//! [policy]
//! kappa = 4.0
//! ```

use std::path::Path;

use aqurate_core::ExperimentConfig;

use crate::{CliError, CliResult};

/// Parsed configuration together with the text it came from, so manifests
/// can embed it verbatim.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub source: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let experiment: ExperimentConfig = toml::from_str(text).map_err(CliError::config)?;
        Ok(Self {
            experiment,
            source: Some(text.to_string()),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
