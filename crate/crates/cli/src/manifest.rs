//! `manifest.toml`, written next to every output set. It records the
//! command line and embeds the configuration text, so `aqurate replay`
//! needs nothing else to regenerate the CSVs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub out_dir: String,
    /// Path given with `--config`, for reference only.
    pub config_path: Option<String>,
    /// Arguments after the program name, as originally given.
    pub args: Vec<String>,
    /// Verbatim configuration text, if any.
    pub config: Option<String>,
    /// Output files relative to `out_dir`.
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(CliError::runtime)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(CliError::config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
