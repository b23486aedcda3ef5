//! Atomic file output and provenance manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA: &str = "mic.manifest/1";

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    /// Full argument vector of the run that produced the artifact.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub output: String,
    pub output_sha256: String,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Run context shared by every artifact a command writes.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(args: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            args,
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_digest(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Writes `bytes` to `path` and its manifest next to it.
    pub fn emit(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            tool: "mic".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: self.args.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            output: path.display().to_string(),
            output_sha256: sha256_hex(bytes),
        };
        let mut doc = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        doc.push(b'\n');
        write_atomic(&manifest_path(path), &doc)
    }

    pub fn emit_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        self.emit(path, &to_json(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut doc = serde_json::to_vec_pretty(value).expect("documents contain only finite numbers");
    doc.push(b'\n');
    doc
}
