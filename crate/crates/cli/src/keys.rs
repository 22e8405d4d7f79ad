//! Key files: the 32-byte Ed25519 seed as lowercase hex plus a newline,
//! written with mode 0600.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
use std::path::{Path, PathBuf};

use codewe_core::KeyPair;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0} is readable by other users (mode {1:o}); chmod 600 it")]
    TooOpen(PathBuf, u32),
    #[error("{0} does not hold a 64-character hex seed")]
    Malformed(PathBuf),
    #[error("{0} already exists")]
    Exists(PathBuf),
}

/// Writes `contents` to a new file only the owner can read.
pub fn write_private(path: &Path, contents: &[u8]) -> Result<(), KeyFileError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| KeyFileError::Io(parent.into(), e))?;
    }
    let mut f = OpenOptions::new()
        .write(true)
        .create_new(true)
        .mode(0o600)
        .open(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => KeyFileError::Exists(path.into()),
            _ => KeyFileError::Io(path.into(), e),
        })?;
    f.write_all(contents).map_err(|e| KeyFileError::Io(path.into(), e))
}

pub fn write_key(path: &Path, key: &KeyPair) -> Result<(), KeyFileError> {
    write_private(path, format!("{}\n", hex::encode(key.seed_bytes())).as_bytes())
}

pub fn read_key(path: &Path) -> Result<KeyPair, KeyFileError> {
    let text = fs::read_to_string(path).map_err(|e| KeyFileError::Io(path.into(), e))?;
    let seed: [u8; 32] = hex::decode(text.trim())
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| KeyFileError::Malformed(path.into()))?;
    Ok(KeyPair::from_seed(&seed))
}

/// Like [`read_key`], but refuses files that group or others can access.
pub fn read_restricted_key(path: &Path) -> Result<KeyPair, KeyFileError> {
    let mode = fs::metadata(path)
        .map_err(|e| KeyFileError::Io(path.into(), e))?
        .permissions()
        .mode()
        & 0o777;
    if mode & 0o077 != 0 {
        return Err(KeyFileError::TooOpen(path.into(), mode));
    }
    read_key(path)
}
