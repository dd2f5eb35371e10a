//! Subcommand implementations and shared plumbing: the error-to-exit-code
//! split, the run-directory layout, and small I/O helpers.

pub mod corpus_cmds;
pub mod eval_cmds;
pub mod report_cmd;
pub mod values_cmds;

use std::fmt;
use std::path::{Path, PathBuf};

use culture_probe_core::corpus::CorpusError;
use culture_probe_core::modelio::ModelIoError;
use culture_probe_core::prompts::PromptError;
use culture_probe_core::psychnorms::PsychError;
use culture_probe_core::values::ValuesError;

/// Errors split by exit code: validation problems exit 1, I/O failures
/// exit 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(inner) => CliError::Io(inner.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Io(inner) => CliError::Io(inner.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PsychError> for CliError {
    fn from(e: PsychError) -> Self {
        match e {
            PsychError::Io(inner) => CliError::Io(inner.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ValuesError> for CliError {
    fn from(e: ValuesError) -> Self {
        match e {
            ValuesError::Io(inner) => CliError::Io(inner.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        match e {
            ModelIoError::Io(inner) => CliError::Io(inner.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Fixed layout of artifacts under a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        RunPaths {
            root: root.to_path_buf(),
        }
    }

    pub fn aggregated_tsv(&self) -> PathBuf {
        self.root.join("corpus").join("aggregated.tsv")
    }

    pub fn ingest_summary(&self) -> PathBuf {
        self.root.join("corpus").join("ingest_summary.json")
    }

    pub fn split_json(&self) -> PathBuf {
        self.root.join("corpus").join("split.json")
    }

    pub fn prompt_file(&self, kind: &str, subset: &str) -> PathBuf {
        self.root
            .join("prompts")
            .join(format!("{kind}_{subset}.jsonl"))
    }

    pub fn prompts_summary(&self, subset: &str) -> PathBuf {
        self.root
            .join("prompts")
            .join(format!("summary_{subset}.json"))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn assoc_json(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("assoc_{label}.json"))
    }

    pub fn assoc_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("assoc_{label}.csv"))
    }

    pub fn rank_json(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("rank_{label}.json"))
    }

    pub fn rank_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("rank_{label}.csv"))
    }

    pub fn psych_json(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("psych_{label}.json"))
    }

    pub fn psych_profiles_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("psych_profiles_{label}.csv"))
    }

    pub fn values_json(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("values_{label}.json"))
    }

    pub fn values_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("values_{label}.csv"))
    }

    pub fn curve_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("curve_{label}.csv"))
    }

    pub fn tension_json(&self) -> PathBuf {
        self.eval_dir().join("tension_set.json")
    }

    pub fn shift_csv(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("shift_{label}.csv"))
    }

    pub fn shift_json(&self, label: &str) -> PathBuf {
        self.eval_dir().join(format!("shift_{label}.json"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Write a file, creating parent directories.
pub fn write_artifact(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Validation(format!(
            "missing required setting --{flag} (flag or config key '{flag}')"
        ))
    })
}

/// Pretty JSON with a trailing newline, for byte-stable artifacts.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}
