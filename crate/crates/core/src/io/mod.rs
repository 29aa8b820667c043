//! File formats: the CPXR raster container, plane stacks for power maps and
//! masks, RGB composites, query and checkpoint blobs, the run config, loss
//! traces and run manifests.
//!
//! All binary formats are little-endian and start with a 4-byte magic and a
//! `u16` version.

mod bytes;
pub mod checkpoint;
pub mod composite;
pub mod config;
pub mod cpxr;
pub mod manifest;
pub mod planes;
pub mod query_blob;
pub mod trace;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use composite::{emit_composite, CompositeMode, CompositeSource, RgbImage};
pub use config::RunConfig;
pub use cpxr::{read_cpxr, write_cpxr};
pub use manifest::{sha256_bytes, sha256_file, FileDigest, RunManifest};
pub use planes::{read_planes, write_planes, PlaneData, PlaneStack};
pub use query_blob::{read_queries, write_queries};
pub use trace::{read_loss_csv, write_loss_csv};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {found} (supported: {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("channel count {0} != 8")]
    ChannelCount(u16),
    #[error("malformed content: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
}

impl IoError {
    /// Stable numeric code per error kind.
    pub fn code(&self) -> i32 {
        match self {
            IoError::Io { .. } => 10,
            IoError::BadMagic { .. } => 11,
            IoError::UnsupportedVersion { .. } => 12,
            IoError::Truncated { .. } => 13,
            IoError::ChannelCount(_) => 14,
            IoError::Malformed(_) => 15,
            IoError::Json(_) => 16,
            IoError::Config(_) => 17,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::BadMagic { .. } => "bad_magic",
            IoError::UnsupportedVersion { .. } => "unsupported_version",
            IoError::Truncated { .. } => "truncated",
            IoError::ChannelCount(_) => "channel_count",
            IoError::Malformed(_) => "malformed",
            IoError::Json(_) => "json",
            IoError::Config(_) => "config",
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}
