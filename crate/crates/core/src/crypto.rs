//! SHA-256 digests and Ed25519 signatures.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::encoding::{canonical_encode, EncodingError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("seed must be exactly 32 bytes, got {0}")]
    InvalidSeed(usize),
    #[error("invalid key material: {0}")]
    InvalidKeyMaterial(String),
    #[error("invalid hex: {0}")]
    InvalidHex(String),
}

/// Declares a fixed-width byte newtype rendered as lowercase hex everywhere.
macro_rules! hex_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, $crate::crypto::CryptoError> {
                let arr: [u8; $len] = bytes.try_into().map_err(|_| {
                    $crate::crypto::CryptoError::InvalidKeyMaterial(format!(
                        "{} expects {} bytes, got {}",
                        stringify!($name),
                        $len,
                        bytes.len()
                    ))
                })?;
                Ok(Self(arr))
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(self.0))
            }
        }

        impl std::str::FromStr for $name {
            type Err = $crate::crypto::CryptoError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                if s.len() != 2 * $len || s.bytes().any(|b| b.is_ascii_uppercase()) {
                    return Err($crate::crypto::CryptoError::InvalidHex(format!(
                        "{} expects {} lowercase hex characters",
                        stringify!($name),
                        2 * $len
                    )));
                }
                let bytes = hex::decode(s)
                    .map_err(|e| $crate::crypto::CryptoError::InvalidHex(e.to_string()))?;
                Self::from_slice(&bytes)
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <String as serde::Deserialize>::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
pub(crate) use hex_bytes;

hex_bytes!(
    /// A SHA-256 output.
    Digest,
    32
);
hex_bytes!(
    /// An Ed25519 verification key.
    PublicKey,
    32
);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);
}

/// A 64-byte Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; 64] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 64] = bytes.try_into().map_err(|_| {
            CryptoError::InvalidKeyMaterial(format!("signature expects 64 bytes, got {}", bytes.len()))
        })?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl FromStr for Signature {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 128 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(CryptoError::InvalidHex("signature expects 128 lowercase hex characters".into()));
        }
        let bytes = hex::decode(s).map_err(|e| CryptoError::InvalidHex(e.to_string()))?;
        Self::from_slice(&bytes)
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Digest of the canonical encoding of `value`.
pub fn canonical_digest<T: Serialize + ?Sized>(value: &T) -> Result<Digest, EncodingError> {
    Ok(hash(&canonical_encode(value)?))
}

/// An Ed25519 key pair. The secret seed is never serialized; `Debug` redacts it.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; 32]) -> Self {
        Self {
            signing: SigningKey::from_bytes(seed),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }

    /// The raw secret seed, for writing a key file the operator controls.
    pub fn seed_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key())
            .field("private_key", &"<redacted>")
            .finish()
    }
}

/// Derives a key pair from an explicit 32-byte seed, or from the OS CSPRNG
/// when no seed is given.
pub fn keygen(seed: Option<&[u8]>) -> Result<KeyPair, CryptoError> {
    match seed {
        Some(bytes) => {
            let arr: [u8; 32] = bytes
                .try_into()
                .map_err(|_| CryptoError::InvalidSeed(bytes.len()))?;
            Ok(KeyPair::from_seed(&arr))
        }
        None => {
            let mut arr = [0u8; 32];
            rand::rngs::OsRng.fill_bytes(&mut arr);
            Ok(KeyPair::from_seed(&arr))
        }
    }
}

/// Signs with a raw 32-byte private seed.
pub fn sign(private_key: &[u8], message: &[u8]) -> Result<Signature, CryptoError> {
    let seed: [u8; 32] = private_key.try_into().map_err(|_| {
        CryptoError::InvalidKeyMaterial(format!("private key expects 32 bytes, got {}", private_key.len()))
    })?;
    Ok(KeyPair::from_seed(&seed).sign(message))
}

/// Strict Ed25519 verification. Keys that are not valid curve points simply
/// fail to verify.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    vk.verify_strict(message, &sig).is_ok()
}

/// Verification over raw byte slices; malformed lengths are an error rather
/// than a `false`.
pub fn verify_raw(public_key: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, CryptoError> {
    let pk = PublicKey::from_slice(public_key)?;
    let sig = Signature::from_slice(signature)?;
    Ok(verify(&pk, message, &sig))
}
