//! RFC-6962-style append-only log: tree hashing, inclusion and consistency
//! proofs, signed tree heads, issuance policy, and forked (split-view)
//! branches.

mod log;
mod sign;
mod tree;

pub use log::{
    validate_log_name, ForkPolicy, Log, LogId, LogPolicy, LogStateHeader, SignedTreeHead,
    TimestampMs, DEFAULT_MMD_MS, DEFAULT_STH_FREQUENCY, MAIN_BRANCH,
};
pub use sign::{
    tree_head_bytes, Ed25519Signer, LogPublicKey, SignerSpec, SthSigner, TestSigner,
};
pub use tree::{
    empty_root, leaf_hash, node_hash, verify_consistency, verify_inclusion, Digest, MerkleTree,
    HASH_SIZE,
};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum MerkleError {
    #[error("size {requested} out of range for tree of size {tree_size}")]
    SizeOutOfRange { requested: u64, tree_size: u64 },
    #[error("bad proof range {old_size}..{new_size} for tree of size {tree_size}")]
    BadProofRange { old_size: u64, new_size: u64, tree_size: u64 },
    #[error("leaf index {index} out of range for size {size} (tree size {tree_size})")]
    IndexOutOfRange { index: u64, size: u64, tree_size: u64 },
    #[error("unknown branch {0:?}")]
    UnknownBranch(String),
    #[error("branch {0:?} already exists")]
    BranchExists(String),
    #[error("invalid log name {0:?}")]
    InvalidLogName(String),
    #[error("invalid log policy: mmd and sth frequency must be positive")]
    InvalidPolicy,
    #[error("sth issuance budget exhausted ({frequency} per {mmd_ms} ms)")]
    SthFrequencyExceeded { frequency: u32, mmd_ms: u64 },
    #[error("bad log state file: {0}")]
    BadStateFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
