use std::path::Path;

use celebbasis::backends::{BackendConfig, SamplerParams};
use celebbasis::io::read_file;
use celebbasis::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Optional JSON config file. Command-line flags override its values, which
/// override the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub backend: BackendConfig,
    pub train: TrainConfig,
    pub sampler: SamplerParams,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let bytes = read_file(path)?;
        serde_json::from_slice(&bytes).map_err(|e| {
            celebbasis::Error::InvalidArgument(format!("config {}: {e}", path.display())).into()
        })
    }
}
