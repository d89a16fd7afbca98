//! Run directory bookkeeping. Every stage records the files it wrote with
//! their SHA-256; later stages only read files whose hash still matches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STAGES: [&str; 5] = ["simulate", "fit", "bounds", "bootstrap", "report"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub files: Vec<FileEntry>,
    pub seed: Option<u64>,
    /// Unix seconds.
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub created_at: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(config_path: &Path, config_text: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: config_path.display().to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            created_at: now(),
            stages: BTreeMap::new(),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(CliError::Precondition(format!(
                "{} has no {MANIFEST_FILE}; run `qdt simulate` first",
                run_dir.display()
            )));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_file(&run_dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn stage(&self, name: &str) -> Result<&StageRecord> {
        self.stages.get(name).ok_or_else(|| {
            CliError::Precondition(format!("stage `{name}` has not been run in this directory; run `qdt {name}` first"))
        })
    }

    /// Records a finished stage and forgets every stage downstream of it,
    /// whose outputs no longer follow from their inputs.
    pub fn record(&mut self, name: &str, files: Vec<FileEntry>, seed: Option<u64>) {
        let pos = STAGES.iter().position(|s| *s == name).expect("known stage");
        for later in &STAGES[pos + 1..] {
            self.stages.remove(*later);
        }
        self.stages.insert(name.to_string(), StageRecord { files, seed, finished_at: now() });
    }

    /// Reads `rel` as written by `stage`, after checking its hash.
    pub fn read_verified(&self, run_dir: &Path, stage: &str, rel: &str) -> Result<Vec<u8>> {
        let record = self.stage(stage)?;
        let entry = record
            .files
            .iter()
            .find(|f| f.path == rel)
            .ok_or_else(|| CliError::Integrity(format!("stage `{stage}` did not record {rel}")))?;
        let path = run_dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        let actual = sha256_hex(&bytes);
        if actual != entry.sha256 {
            return Err(CliError::Integrity(format!(
                "{} has sha256 {actual}, manifest records {}",
                path.display(),
                entry.sha256
            )));
        }
        Ok(bytes)
    }

    pub fn read_json<T: DeserializeOwned>(&self, run_dir: &Path, stage: &str, rel: &str) -> Result<T> {
        let bytes = self.read_verified(run_dir, stage, rel)?;
        let de = &mut serde_json::Deserializer::from_slice(&bytes);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Integrity(format!("{rel}: at `{}`: {}", e.path(), e.inner())))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Collects the files a stage writes.
pub struct StageWriter {
    run_dir: PathBuf,
    files: Vec<FileEntry>,
}

impl StageWriter {
    pub fn new(run_dir: &Path) -> Self {
        Self { run_dir: run_dir.to_path_buf(), files: Vec::new() }
    }

    pub fn bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.run_dir.join(rel), bytes)?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.bytes(rel, text.as_bytes())
    }

    pub fn finish(self) -> Vec<FileEntry> {
        self.files
    }
}
