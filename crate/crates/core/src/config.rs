//! TOML run configuration: the mixing parameters plus the artifact paths a
//! `mix` run reads.
//!
//! ```toml
//! [mix]
//! gamma = 0.2
//! seed = 7
//!
//! [paths]
//! source_dir = "data/source"
//! target_dir = "data/target"
//! source_bank = "banks/source"
//! target_bank = "banks/target"
//! ```
//!
//! Omitted keys take their defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};
use crate::io::read_bytes;
use crate::types::MixConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub source_dir: Option<PathBuf>,
    pub target_dir: Option<PathBuf>,
    pub source_bank: Option<PathBuf>,
    pub target_bank: Option<PathBuf>,
    /// Source-domain stats document. Computed from `source_dir` when absent.
    pub stats: Option<PathBuf>,
    /// Spatial prior document. Built from `source_dir` when absent.
    pub prior: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mix: MixConfig,
    pub paths: DataPaths,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BdmError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| BdmError::config(format!("{} is not UTF-8", path.display())))?;
        Self::from_toml_str(text).map_err(|e| BdmError::config(format!("{}: {e}", path.display())))
    }

    /// The fully resolved document, defaults included.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| BdmError::config(e.to_string()))
    }
}

/// Unwraps a required path, naming the missing key on failure.
pub fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| BdmError::config(format!("missing required path `{key}`")))
}
