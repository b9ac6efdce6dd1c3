//! Text encoding of a signed tree head as carried in a TXT record:
//! four dot-separated fields, `<tree_size>.<timestamp>.<b64 root>.<b64 sig>`.

use base64::prelude::*;
use thiserror::Error;

use crate::merkle::{Digest, LogId, SignedTreeHead, TimestampMs, HASH_SIZE};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum TxtParseError {
    #[error("expected 4 dot-separated fields, found {0}")]
    FieldCount(usize),
    #[error("tree size is not a decimal integer")]
    BadTreeSize,
    #[error("timestamp is not a decimal integer")]
    BadTimestamp,
    #[error("root hash is not valid base64")]
    BadRootBase64,
    #[error("root hash must be {HASH_SIZE} bytes, found {0}")]
    BadRootLength(usize),
    #[error("signature is not valid base64")]
    BadSignatureBase64,
}

/// Tree-head fields carried by the TXT payload. The log identity comes from
/// the query domain, not the payload, so decoding yields this and the
/// caller attaches the log it was asked about.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SthTxt {
    pub tree_size: u64,
    pub timestamp: TimestampMs,
    pub root_hash: Digest,
    pub signature: Vec<u8>,
}

impl SthTxt {
    pub fn from_sth(sth: &SignedTreeHead) -> Self {
        Self {
            tree_size: sth.tree_size,
            timestamp: sth.timestamp,
            root_hash: sth.root_hash,
            signature: sth.signature.clone(),
        }
    }

    pub fn into_sth(self, log_id: LogId) -> SignedTreeHead {
        SignedTreeHead {
            log_id,
            tree_size: self.tree_size,
            timestamp: self.timestamp,
            root_hash: self.root_hash,
            signature: self.signature,
        }
    }
}

pub fn encode_sth_txt(sth: &SignedTreeHead) -> String {
    format!(
        "{}.{}.{}.{}",
        sth.tree_size,
        sth.timestamp,
        BASE64_STANDARD.encode(sth.root_hash.0),
        BASE64_STANDARD.encode(&sth.signature)
    )
}

/// Parses the four dot-separated fields. Signature bytes are carried
/// through unchecked; verification is the challenger's job.
pub fn decode_sth_txt(text: &str) -> Result<SthTxt, TxtParseError> {
    let fields: Vec<&str> = text.split('.').collect();
    if fields.len() != 4 {
        return Err(TxtParseError::FieldCount(fields.len()));
    }
    let tree_size: u64 = fields[0].parse().map_err(|_| TxtParseError::BadTreeSize)?;
    let timestamp: u64 = fields[1].parse().map_err(|_| TxtParseError::BadTimestamp)?;
    let root = BASE64_STANDARD
        .decode(fields[2])
        .map_err(|_| TxtParseError::BadRootBase64)?;
    let root_hash: [u8; HASH_SIZE] = root
        .try_into()
        .map_err(|v: Vec<u8>| TxtParseError::BadRootLength(v.len()))?;
    let signature = BASE64_STANDARD
        .decode(fields[3])
        .map_err(|_| TxtParseError::BadSignatureBase64)?;
    Ok(SthTxt {
        tree_size,
        timestamp,
        root_hash: Digest(root_hash),
        signature,
    })
}
