//! Canonical, deterministic text encoding for every signed or hashed payload.
//!
//! The encoding is a strict subset of JSON:
//!
//! ```text
//! value   = object / array / string / integer / "true" / "false"
//! object  = "{" [ member *( "," member ) ] "}"
//! member  = string ":" value
//! array   = "[" [ value *( "," value ) ] "]"
//! string  = %x22 *char %x22
//! integer = "0" / [ "-" ] %x31-39 *DIGIT
//! ```
//!
//! * Object keys are unique and sorted by Unicode code point (after NFC).
//! * Strings (keys and values) are NFC-normalized UTF-8. Only `"` and `\`
//!   are escaped with a backslash; U+0000..U+001F are written as `\u00xx`
//!   with lowercase hex. Everything else is emitted as raw UTF-8.
//! * Integers lie in `[-2^63, 2^64 - 1]`. Floats and `null` are rejected.
//! * No whitespace anywhere.
//!
//! Because the grammar is valid JSON, any JSON parser can read it; the
//! decoder here additionally re-encodes and rejects non-canonical input.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("value kind cannot be canonically encoded: {0}")]
    EncodingUnsupported(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("document is valid but not in canonical form")]
    NonCanonical,
}

/// Encodes any serializable value in canonical form.
pub fn canonical_encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EncodingError> {
    let tree =
        serde_json::to_value(value).map_err(|e| EncodingError::EncodingUnsupported(e.to_string()))?;
    encode_value(&tree)
}

/// Encodes an already-built document tree.
pub fn encode_value(value: &Value) -> Result<Vec<u8>, EncodingError> {
    let mut out = Vec::with_capacity(128);
    write_value(value, &mut out)?;
    Ok(out)
}

/// Parses canonical bytes into `T`, rejecting anything that does not
/// re-encode to the exact same bytes.
pub fn canonical_decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, EncodingError> {
    let tree: Value =
        serde_json::from_slice(bytes).map_err(|e| EncodingError::Malformed(e.to_string()))?;
    if encode_value(&tree)? != bytes {
        return Err(EncodingError::NonCanonical);
    }
    serde_json::from_value(tree).map_err(|e| EncodingError::Malformed(e.to_string()))
}

/// Parses any JSON text (pretty-printed, unsorted) into `T`. Used for
/// human-authored input files; hashing always goes through `canonical_encode`.
pub fn decode_lenient<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, EncodingError> {
    serde_json::from_slice(bytes).map_err(|e| EncodingError::Malformed(e.to_string()))
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), EncodingError> {
    match value {
        Value::Null => Err(EncodingError::EncodingUnsupported("null".into())),
        Value::Bool(true) => {
            out.extend_from_slice(b"true");
            Ok(())
        }
        Value::Bool(false) => {
            out.extend_from_slice(b"false");
            Ok(())
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.extend_from_slice(i.to_string().as_bytes());
            } else if let Some(u) = n.as_u64() {
                out.extend_from_slice(u.to_string().as_bytes());
            } else {
                return Err(EncodingError::EncodingUnsupported(format!("float {n}")));
            }
            Ok(())
        }
        Value::String(s) => {
            write_string(s, out);
            Ok(())
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
            Ok(())
        }
        Value::Object(map) => {
            let mut members: Vec<(String, &Value)> =
                map.iter().map(|(k, v)| (k.nfc().collect::<String>(), v)).collect();
            // `str` ordering is byte order, which for UTF-8 equals code point order.
            members.sort_by(|a, b| a.0.cmp(&b.0));
            if members.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(EncodingError::EncodingUnsupported(
                    "duplicate key after NFC normalization".into(),
                ));
            }
            out.push(b'{');
            for (i, (key, v)) in members.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_normalized(key, out);
                out.push(b':');
                write_value(v, out)?;
            }
            out.push(b'}');
            Ok(())
        }
    }
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    let normalized: String = s.nfc().collect();
    write_normalized(&normalized, out);
}

fn write_normalized(s: &str, out: &mut Vec<u8>) {
    out.push(b'"');
    for ch in s.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}
