//! Output directory bookkeeping: every written file is hashed and listed in
//! a per-command manifest alongside the config hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
    pub files: Vec<FileEntry>,
}

pub struct Artifacts {
    dir: PathBuf,
    manifest: CommandManifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

impl Artifacts {
    pub fn create(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            manifest: CommandManifest {
                command: command.to_string(),
                config_hash: cfg.hash(),
                seed: cfg.seed,
                backend: fk_core::par::BACKEND.to_string(),
                files: Vec::new(),
            },
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Run a writer into memory, then store the bytes.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn finish(self) -> Result<CommandManifest, CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        fs::write(self.dir.join(manifest_name(&self.manifest.command)), text)?;
        Ok(self.manifest)
    }
}
