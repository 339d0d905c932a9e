//! Versioned, checksummed model files.
//!
//! Layout: 8-byte magic, major and minor format version (u16 LE each),
//! payload length (u64 LE), SHA-256 of the payload, then the JSON payload.
//! Floats are written in shortest round-trip form, so a loaded model
//! predicts bit-identically to the one that was saved.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use csi_har_core::fusion::FusionModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;

pub const MAGIC: &[u8; 8] = b"CSIHARM\0";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;
const HEADER_LEN: usize = 8 + 2 + 2 + 8 + 32;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("cannot access archive {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("archive error in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("archive error in {path}: checksum mismatch, the file is corrupted")]
    Checksum { path: PathBuf },
    #[error("archive {path} has format version {major}.{minor}, this build reads {FORMAT_MAJOR}.x")]
    Version { path: PathBuf, major: u16, minor: u16 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub config: RunConfig,
    pub model: FusionModel,
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn encode(archive: &ModelArchive) -> Vec<u8> {
    let payload = serde_json::to_vec(archive).expect("model archives always serialize");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelArchive, ArchiveError> {
    let malformed = |reason: &str| ArchiveError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(malformed("file is shorter than the archive header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(malformed("not a model archive (bad magic)"));
    }
    let major = u16::from_le_bytes([bytes[8], bytes[9]]);
    let minor = u16::from_le_bytes([bytes[10], bytes[11]]);
    if major != FORMAT_MAJOR {
        return Err(ArchiveError::Version {
            path: path.to_path_buf(),
            major,
            minor,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(malformed(&format!(
            "payload is {} bytes, header declares {len} (truncated or padded)",
            payload.len()
        )));
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..HEADER_LEN] {
        return Err(ArchiveError::Checksum { path: path.to_path_buf() });
    }
    serde_json::from_slice(payload).map_err(|e| malformed(&format!("invalid payload: {e}")))
}

pub fn save_model(path: &Path, archive: &ModelArchive) -> Result<(), ArchiveError> {
    write_atomic(path, &encode(archive)).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<ModelArchive, ArchiveError> {
    let bytes = fs::read(path).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes, path)
}
