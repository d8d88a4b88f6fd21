//! Output directory, config hash and summary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// SHA-256 of the config bytes, with the command-line seed folded in when
/// it overrides the file.
pub fn config_hash(bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    if let Some(s) = seed_override {
        h.update(format!("\nseed={s}").as_bytes());
    }
    hex::encode(h.finalize())
}

pub struct OutDir {
    dir: PathBuf,
    hash: String,
}

impl OutDir {
    pub fn create(dir: PathBuf, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutDir { dir, hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    /// CSV with a leading `# config_hash=...` comment line.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, &format!("# config_hash={}\n{body}", self.hash))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &(body + "\n"))
    }
}

#[derive(Serialize)]
pub struct Summary {
    pub command: String,
    pub config_hash: String,
    pub verdicts: serde_json::Value,
    pub elapsed_ms: u128,
    pub pass: bool,
}

pub fn resolve_out(cli: Option<&Path>, config: Option<&Path>, config_dir: &Path) -> PathBuf {
    match (cli, config) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => config_dir.join(p),
        (None, None) => config_dir.join("out"),
    }
}
