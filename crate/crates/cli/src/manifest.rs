//! Run manifest: a per-run record of the effective configuration, input and
//! output artifacts with content hashes, and tool version. Hashes are
//! re-checked whenever a recorded artifact is read back, so any corruption
//! of an intermediate file fails loudly instead of propagating.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub created_at: String,
    pub updated_at: String,
    /// Effective settings per subcommand, as last run.
    pub config_snapshot: BTreeMap<String, serde_json::Value>,
    /// Artifact path -> sha256, for files read from outside the run dir.
    pub inputs: BTreeMap<String, String>,
    /// Artifact path -> sha256, for files written under the run dir.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip)]
    run_dir: PathBuf,
}

fn now() -> String {
    use std::time::{SystemTime, UNIX_EPOCH};
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn manifest_path(run_dir: &Path) -> PathBuf {
        run_dir.join("manifest.json")
    }

    pub fn load_or_create(run_dir: &Path) -> Result<RunManifest, CliError> {
        let path = Self::manifest_path(run_dir);
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let mut manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::Validation(format!("corrupt manifest {}: {e}", path.display()))
            })?;
            manifest.run_dir = run_dir.to_path_buf();
            Ok(manifest)
        } else {
            Ok(RunManifest {
                run_id: uuid::Uuid::new_v4().to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                created_at: now(),
                updated_at: now(),
                config_snapshot: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                run_dir: run_dir.to_path_buf(),
            })
        }
    }

    pub fn save(&mut self) -> Result<(), CliError> {
        self.updated_at = now();
        std::fs::create_dir_all(&self.run_dir)
            .map_err(|e| CliError::Io(format!("cannot create run dir: {e}")))?;
        let path = Self::manifest_path(&self.run_dir);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, json)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    fn key_for(&self, path: &Path) -> String {
        path.strip_prefix(&self.run_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string()
    }

    pub fn snapshot_config<T: Serialize>(&mut self, command: &str, effective: &T) {
        if let Ok(value) = serde_json::to_value(effective) {
            self.config_snapshot.insert(command.to_string(), value);
        }
    }

    /// Record an external input file's hash.
    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let key = self.key_for(path);
        self.inputs.insert(key, sha256_hex(&bytes));
        Ok(())
    }

    /// Record an artifact written under the run dir.
    pub fn record_output(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let key = self.key_for(path);
        self.outputs.insert(key, sha256_hex(&bytes));
        Ok(())
    }

    /// Read a file, verifying its hash when the manifest has one recorded.
    pub fn read_verified(&self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let key = self.key_for(path);
        if let Some(expected) = self.outputs.get(&key).or_else(|| self.inputs.get(&key)) {
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(CliError::Validation(format!(
                    "{} was modified since it was recorded (expected sha256 {expected}, found {actual}); \
                     re-run the step that produces it",
                    path.display()
                )));
            }
        }
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tamper_detection_on_single_byte_flip() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = dir.path().join("corpus").join("table.tsv");
        std::fs::create_dir_all(artifact.parent().unwrap()).unwrap();
        std::fs::write(&artifact, b"cue\tresponse\tcount\napple\tfruit\t3\n").unwrap();

        let mut manifest = RunManifest::load_or_create(dir.path()).unwrap();
        manifest.record_output(&artifact).unwrap();
        manifest.save().unwrap();

        let reloaded = RunManifest::load_or_create(dir.path()).unwrap();
        assert!(reloaded.read_verified(&artifact).is_ok());

        let mut bytes = std::fs::read(&artifact).unwrap();
        bytes[10] ^= 0x01;
        std::fs::write(&artifact, &bytes).unwrap();
        let err = reloaded.read_verified(&artifact).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }

    #[test]
    fn run_id_persists_across_loads() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::load_or_create(dir.path()).unwrap();
        manifest.save().unwrap();
        let id = manifest.run_id.clone();
        let again = RunManifest::load_or_create(dir.path()).unwrap();
        assert_eq!(again.run_id, id);
    }
}
