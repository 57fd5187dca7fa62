//! Optional TOML configuration file mirroring the command-line flags.
//!
//! Keys use the flag names with `-` replaced by `_`; flags given on the
//! command line take precedence over the file.
//!
//! ```toml
//! trials = 20
//! seed = 7
//! out = "results"
//! profile = "desk"
//! workers = 4
//! sparsity_rule = "floor_sqrt_N"
//! grid = [100, 316, 1000]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CsdlError, Result};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub profile: Option<String>,
    pub workers: Option<usize>,
    pub sparsity_rule: Option<String>,
    pub noise: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub iterations: Option<usize>,
    pub step_scale: Option<f64>,
    pub timing: Option<bool>,
    // fit
    pub input: Option<PathBuf>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_prime: Option<f64>,
    pub delta: Option<f64>,
    pub truth: Option<PathBuf>,
    pub lambda_prime_rule: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CsdlError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CsdlError::Input(msg) => CsdlError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CsdlError::Input(e.to_string()))
    }
}
