use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use celebbasis::io::{read_file, sha256_file, write_atomic};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub adapters: BTreeMap<String, String>,
    pub basis_fingerprint: Option<String>,
    /// Path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv: argv.to_vec(),
            cwd: std::env::current_dir().unwrap_or_default(),
            config: Value::Null,
            seeds: BTreeMap::new(),
            adapters: BTreeMap::new(),
            basis_fingerprint: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(celebbasis::Error::from)?;
        write_atomic(path, text.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = read_file(path)?;
        let manifest: RunManifest =
            serde_json::from_slice(&bytes).map_err(celebbasis::Error::from)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(celebbasis::Error::Format(format!(
                "unsupported manifest schema version {}",
                manifest.schema_version
            ))
            .into());
        }
        Ok(manifest)
    }

    /// Outputs whose current bytes differ from the recorded hashes.
    pub fn changed_outputs(&self, base: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|(path, hash)| {
                sha256_file(&base.join(path)).map_or(true, |h| &h != *hash)
            })
            .map(|(path, _)| path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn changed_outputs_flags_edits_and_deletions() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
        std::fs::write(&a, "one").unwrap();
        std::fs::write(&b, "two").unwrap();
        let mut m = RunManifest::new("fit", &[]);
        m.output(&a).unwrap();
        m.output(&b).unwrap();
        assert!(m.changed_outputs(Path::new("")).is_empty());
        std::fs::write(&a, "uno").unwrap();
        std::fs::remove_file(&b).unwrap();
        assert_eq!(m.changed_outputs(Path::new("")).len(), 2);
    }

    #[test]
    fn round_trips_and_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut m = RunManifest::new("generate", &["--seed".into(), "3".into()]);
        m.seeds.insert("sampler".into(), 3);
        m.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), m);
        m.schema_version = 99;
        m.save(&path).unwrap();
        assert!(RunManifest::load(&path).is_err());
    }
}
