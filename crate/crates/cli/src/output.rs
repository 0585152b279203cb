use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{usage, CliError, CliResult, RunEnv};

pub(crate) fn timestamp(env: &RunEnv) -> CliResult<u64> {
    match env.source_date_epoch.as_deref().map(str::trim) {
        Some(s) if !s.is_empty() => s
            .parse()
            .map_err(|_| usage(format!("SOURCE_DATE_EPOCH must be an integer, got '{s}'"))),
        _ => Ok(SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)),
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub(crate) fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Everything needed to rerun an invocation and check its outputs.
///
/// `outputs` lists file names relative to the output directory. The thread
/// count and the output directory are not recorded: neither changes any
/// output byte.
#[derive(Debug, Serialize)]
pub(crate) struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch (`SOURCE_DATE_EPOCH` when set).
    pub timestamp: u64,
}

/// Collects the files written by one command, then its manifest.
pub(crate) struct OutputDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    pub fn finish(
        self,
        command: &'static str,
        parameters: Value,
        seed: Option<u64>,
        inputs: Vec<FileDigest>,
        timestamp: u64,
    ) -> CliResult<()> {
        let manifest = Manifest {
            tool: "blockmt",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters,
            seed,
            inputs,
            outputs: self.written,
            timestamp,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}
