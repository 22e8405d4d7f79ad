//! Directory-backed content-addressed blob store with signed erasure
//! tombstones.
//!
//! Layout under the store root (`<hex>` is the 64-character address):
//!
//! ```text
//! objects/<hex[0..2]>/<hex[2..4]>/<hex>        blob bytes
//! tombstones/<hex[0..2]>/<hex[2..4]>/<hex>     canonical Tombstone
//! tmp/                                          in-flight writes
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, verify, Digest, KeyPair, PublicKey, Signature};
use crate::encoding::{canonical_decode, canonical_encode};

pub const DEFAULT_MAX_BLOB: usize = 1024 * 1024;

/// Address of a blob: the SHA-256 of its bytes.
pub type CasAddress = Digest;

#[derive(Debug, Error)]
pub enum CasError {
    #[error("blob is empty")]
    EmptyBlob,
    #[error("blob of {size} bytes exceeds the {limit}-byte limit")]
    BlobTooLarge { size: usize, limit: usize },
    #[error("no blob at {0}")]
    NotFound(CasAddress),
    #[error("blob at {0} was erased")]
    AlreadyErased(CasAddress),
    #[error("stored bytes at {0} do not hash to their address")]
    IntegrityViolation(CasAddress),
    #[error("erasure request signature does not verify")]
    InvalidRequest,
    #[error("store unavailable: {0}")]
    StoreUnavailable(#[from] io::Error),
}

/// A request to erase a blob, signed by the key that authored it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasureRequest {
    pub address: CasAddress,
    pub requester_public_key: PublicKey,
    pub requester_signature: Signature,
}

impl ErasureRequest {
    pub fn message(address: &CasAddress) -> Vec<u8> {
        canonical_encode(&serde_json::json!({
            "purpose": "codewe/erasure-request",
            "address": address,
        }))
        .expect("digests encode")
    }

    pub fn new(address: CasAddress, requester: &KeyPair) -> Self {
        Self {
            address,
            requester_public_key: requester.public_key(),
            requester_signature: requester.sign(&Self::message(&address)),
        }
    }

    pub fn signature_valid(&self) -> bool {
        verify(
            &self.requester_public_key,
            &Self::message(&self.address),
            &self.requester_signature,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tombstone {
    pub address: CasAddress,
    pub erased_at: u64,
    pub reason: ErasureRequest,
    pub admin_public_key: PublicKey,
    pub admin_signature: Signature,
}

impl Tombstone {
    pub fn message(address: &CasAddress, erased_at: u64, reason: &ErasureRequest) -> Vec<u8> {
        canonical_encode(&serde_json::json!({
            "purpose": "codewe/tombstone",
            "address": address,
            "erased_at": erased_at,
            "reason": reason,
        }))
        .expect("tombstones encode")
    }

    pub fn verify(&self, admin: &PublicKey) -> bool {
        &self.admin_public_key == admin
            && verify(
                admin,
                &Self::message(&self.address, self.erased_at, &self.reason),
                &self.admin_signature,
            )
    }

    pub fn digest(&self) -> Digest {
        crate::crypto::canonical_digest(self).expect("tombstones encode")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CasRead {
    Blob(Vec<u8>),
    Erased(Tombstone),
    NotFound,
}

impl CasRead {
    pub fn blob(self) -> Option<Vec<u8>> {
        match self {
            CasRead::Blob(b) => Some(b),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct CasStore {
    root: PathBuf,
    max_blob: usize,
    erase_lock: Mutex<()>,
    tmp_counter: AtomicU64,
}

impl CasStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CasError> {
        Self::open_with_limit(root, DEFAULT_MAX_BLOB)
    }

    pub fn open_with_limit(root: impl Into<PathBuf>, max_blob: usize) -> Result<Self, CasError> {
        let root = root.into();
        for sub in ["objects", "tombstones", "tmp"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self {
            root,
            max_blob,
            erase_lock: Mutex::new(()),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn fanout(&self, kind: &str, address: &CasAddress) -> PathBuf {
        let h = address.to_hex();
        self.root.join(kind).join(&h[0..2]).join(&h[2..4]).join(&h)
    }

    /// On-disk location of a blob, whether or not it exists.
    pub fn object_path(&self, address: &CasAddress) -> PathBuf {
        self.fanout("objects", address)
    }

    fn tombstone_path(&self, address: &CasAddress) -> PathBuf {
        self.fanout("tombstones", address)
    }

    fn write_atomic(&self, target: &Path, bytes: &[u8]) -> io::Result<()> {
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir)?;
        }
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self.root.join("tmp").join(format!(
            "{}-{}-{}",
            std::process::id(),
            n,
            rand::random::<u64>()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, target)
    }

    pub fn put(&self, blob: &[u8]) -> Result<CasAddress, CasError> {
        if blob.is_empty() {
            return Err(CasError::EmptyBlob);
        }
        if blob.len() > self.max_blob {
            return Err(CasError::BlobTooLarge {
                size: blob.len(),
                limit: self.max_blob,
            });
        }
        let address = hash(blob);
        if self.tombstone_path(&address).exists() {
            return Err(CasError::AlreadyErased(address));
        }
        let path = self.object_path(&address);
        if !path.exists() {
            // Racing writers rename identical bytes onto the same name.
            self.write_atomic(&path, blob)?;
        }
        Ok(address)
    }

    /// Reads a blob, re-hashing it against its address on every call.
    pub fn get(&self, address: &CasAddress) -> Result<CasRead, CasError> {
        if let Some(t) = self.tombstone(address)? {
            return Ok(CasRead::Erased(t));
        }
        let bytes = match fs::read(self.object_path(address)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                if !self.root.join("objects").is_dir() {
                    return Err(CasError::StoreUnavailable(e));
                }
                return Ok(CasRead::NotFound);
            }
            Err(e) => return Err(CasError::StoreUnavailable(e)),
        };
        if hash(&bytes) != *address {
            return Err(CasError::IntegrityViolation(*address));
        }
        Ok(CasRead::Blob(bytes))
    }

    pub fn tombstone(&self, address: &CasAddress) -> Result<Option<Tombstone>, CasError> {
        match fs::read(self.tombstone_path(address)) {
            Ok(bytes) => canonical_decode(&bytes).map(Some).map_err(|e| {
                CasError::StoreUnavailable(io::Error::new(io::ErrorKind::InvalidData, e))
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CasError::StoreUnavailable(e)),
        }
    }

    /// Destroys the blob bytes and records a signed tombstone in their place.
    pub fn erase(
        &self,
        address: &CasAddress,
        request: ErasureRequest,
        admin_key: &KeyPair,
        erased_at: u64,
    ) -> Result<Tombstone, CasError> {
        let _guard = self.erase_lock.lock();
        if self.tombstone_path(address).exists() {
            return Err(CasError::AlreadyErased(*address));
        }
        let path = self.object_path(address);
        if !path.exists() {
            return Err(CasError::NotFound(*address));
        }
        if request.address != *address || !request.signature_valid() {
            return Err(CasError::InvalidRequest);
        }
        let tombstone = Tombstone {
            address: *address,
            erased_at,
            admin_signature: admin_key.sign(&Tombstone::message(address, erased_at, &request)),
            admin_public_key: admin_key.public_key(),
            reason: request,
        };
        let encoded = canonical_encode(&tombstone).expect("tombstones encode");
        self.write_atomic(&self.tombstone_path(address), &encoded)?;
        // Overwrite before unlinking so the bytes do not linger in the file.
        let len = fs::metadata(&path)?.len() as usize;
        {
            let mut f = fs::OpenOptions::new().write(true).open(&path)?;
            f.write_all(&vec![0u8; len])?;
            f.sync_all()?;
        }
        fs::remove_file(&path)?;
        Ok(tombstone)
    }

    /// Addresses of every blob currently held (erased ones excluded).
    pub fn addresses(&self) -> Result<Vec<CasAddress>, CasError> {
        let mut out = Vec::new();
        let objects = self.root.join("objects");
        for a in fs::read_dir(&objects)? {
            for b in fs::read_dir(a?.path())? {
                for f in fs::read_dir(b?.path())? {
                    let name = f?.file_name();
                    if let Some(addr) = name.to_str().and_then(|s| s.parse().ok()) {
                        out.push(addr);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
