//! Versioned, checksummed binary envelope shared by every artifact file.
//!
//! Layout (little endian):
//! `b"LNGR"` | kind tag (4 bytes) | format version (u32) | payload length (u64) | payload | crc32 (u32)
//!
//! The checksum covers everything between the magic and the checksum itself.
//! The payload is JSON.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LNGR";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub fn encode<T: Serialize>(kind: &[u8; 4], version: u32, value: &T) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(value)?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(kind);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Reads the kind tag without validating the rest of the file.
pub fn peek_kind(bytes: &[u8]) -> Result<[u8; 4]> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: "LNGR".into(),
        });
    }
    Ok(bytes[4..8].try_into().unwrap())
}

pub fn decode<T: DeserializeOwned>(kind: &[u8; 4], version: u32, bytes: &[u8]) -> Result<T> {
    let found_kind = peek_kind(bytes)?;
    if &found_kind != kind {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(kind).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::ChecksumMismatch);
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() != HEADER_LEN + len + 4 {
        return Err(Error::ChecksumMismatch);
    }
    let body_end = HEADER_LEN + len;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    if crc32fast::hash(&bytes[4..body_end]) != stored {
        return Err(Error::ChecksumMismatch);
    }
    if found != version {
        return Err(Error::VersionMismatch {
            expected: version,
            found,
        });
    }
    Ok(serde_json::from_slice(&bytes[HEADER_LEN..body_end])?)
}
