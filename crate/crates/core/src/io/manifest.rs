//! Run manifests: one JSON file per CLI run recording the tool version, a
//! hash of the effective configuration, and digests of every input and
//! output.
//!
//! Inputs are recorded by file name and outputs relative to the output
//! directory, so two runs in different directories compare equal. The
//! timestamp honors `SOURCE_DATE_EPOCH` for reproducible runs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_file, write_file, IoError};

pub const MANIFEST_VERSION: u32 = 1;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    Ok(sha256_bytes(&read_file(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started: String,
    pub finished: String,
}

/// RFC 3339 timestamp from `SOURCE_DATE_EPOCH` if set, else the clock.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed.unwrap_or_else(chrono::Utc::now).to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_hash,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: timestamp(),
            finished: String::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), IoError> {
        let name =
            path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
        self.inputs.push(FileDigest { path: name, sha256: sha256_file(path)? });
        Ok(())
    }

    /// Records `out_dir/relative`.
    pub fn add_output(&mut self, out_dir: &Path, relative: &str) -> Result<(), IoError> {
        self.outputs.push(FileDigest { path: relative.into(), sha256: sha256_file(&out_dir.join(relative))? });
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("manifest-{}.json", self.command.replace(' ', "-"))
    }

    /// Stamps the finish time and writes to `out_dir`. Returns the file name.
    pub fn finish(mut self, out_dir: &Path) -> Result<String, IoError> {
        self.finished = timestamp();
        let name = self.file_name();
        let mut json = serde_json::to_vec_pretty(&self)?;
        json.push(b'\n');
        write_file(&out_dir.join(&name), &json)?;
        Ok(name)
    }
}
