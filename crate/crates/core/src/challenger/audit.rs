//! Consistency auditing of stored tree heads.
//!
//! Two checks run over a log's stored observations: tree heads of equal
//! size must share a root (no log interaction needed), and for each
//! adjacent pair of distinct (size, root) states sorted by size the log is
//! challenged for a consistency proof over the off-path channel. Honest
//! trees are transitively consistent, so adjacent checks suffice; any
//! failure or refusal is already binding evidence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::{verify_consistency, Digest, LogId, SignedTreeHead, TimestampMs};

use super::store::StoredSth;

/// Transport-level failure of the off-path channel. Retryable failures
/// leave a cursor so the audit can resume.
#[derive(Error, Clone, Debug, PartialEq, Eq)]
#[error("off-path transport error ({}): {message}", if *.retryable { "retryable" } else { "fatal" })]
pub struct TransportError {
    pub retryable: bool,
    pub message: String,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self { retryable: true, message: message.into() }
    }
}

/// A log's answer to a consistency challenge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofResponse {
    Proof(Vec<Digest>),
    /// The log declined or claimed the sizes are unknown to it.
    Refused,
}

/// The challenger's view of a log, reached over a channel that must not be
/// linkable to any aggregator feeding this challenger.
pub trait OffPathChannel {
    fn fetch_sth(&mut self, log: &LogId) -> Result<SignedTreeHead, TransportError>;
    fn consistency(
        &mut self,
        log: &LogId,
        old_size: u64,
        new_size: u64,
    ) -> Result<ProofResponse, TransportError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    EqualSizeDistinctRoots,
    FailedConsistency,
}

/// A self-contained inconsistency finding: two signed tree heads from the
/// same log that cannot belong to one append-only tree, plus the failing
/// proof when one was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub kind: EvidenceKind,
    pub sth_a: SignedTreeHead,
    pub sth_b: SignedTreeHead,
    pub proof: Option<Vec<Digest>>,
    pub detected_at: TimestampMs,
}

/// Where to pick an interrupted audit back up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCursor {
    /// Equal-size grouping already ran; do not repeat it on resume.
    pub groups_done: bool,
    /// Next index into the sorted adjacent-pair list.
    pub next_pair: usize,
}

#[derive(Clone, Debug)]
pub struct AuditOutcome {
    pub evidence: Vec<Evidence>,
    pub completed: bool,
    /// Set when a retryable transport failure interrupted the audit.
    pub cursor: Option<AuditCursor>,
    pub proof_requests: u64,
}

/// Runs the audit over `entries` (one log's stored tree heads, sorted by
/// size then root, as the store yields them).
pub fn audit_entries(
    channel: &mut dyn OffPathChannel,
    log_id: &LogId,
    entries: &[&StoredSth],
    now: TimestampMs,
    resume: Option<AuditCursor>,
) -> AuditOutcome {
    let mut evidence = Vec::new();
    let cursor = resume.unwrap_or(AuditCursor { groups_done: false, next_pair: 0 });

    // Distinct (size, root) states, keeping one representative tree head
    // per state. Entries arrive sorted, so dedup by adjacency.
    let mut states: Vec<&StoredSth> = Vec::new();
    for entry in entries {
        let dup = states.last().is_some_and(|prev| {
            prev.sth.tree_size == entry.sth.tree_size && prev.sth.root_hash == entry.sth.root_hash
        });
        if !dup {
            states.push(entry);
        }
    }

    if !cursor.groups_done {
        // Phase 1: equal sizes must have equal roots.
        for pair in states.windows(2) {
            if pair[0].sth.tree_size == pair[1].sth.tree_size {
                evidence.push(Evidence {
                    kind: EvidenceKind::EqualSizeDistinctRoots,
                    sth_a: pair[0].sth.clone(),
                    sth_b: pair[1].sth.clone(),
                    proof: None,
                    detected_at: now,
                });
            }
        }
    }

    // Phase 2: challenge the log for proofs between adjacent sizes.
    let pairs: Vec<(&StoredSth, &StoredSth)> = states
        .windows(2)
        .filter(|pair| pair[0].sth.tree_size < pair[1].sth.tree_size)
        .map(|pair| (pair[0], pair[1]))
        .collect();

    let mut proof_requests = 0;
    for (index, (old, new)) in pairs.iter().enumerate().skip(cursor.next_pair) {
        proof_requests += 1;
        let response =
            match channel.consistency(log_id, old.sth.tree_size, new.sth.tree_size) {
                Ok(response) => response,
                Err(err) if err.retryable => {
                    return AuditOutcome {
                        evidence,
                        completed: false,
                        cursor: Some(AuditCursor { groups_done: true, next_pair: index }),
                        proof_requests,
                    };
                }
                // A channel that fails permanently cannot prove anything
                // either way; surface the partial result without a cursor.
                Err(_) => {
                    return AuditOutcome {
                        evidence,
                        completed: false,
                        cursor: None,
                        proof_requests,
                    };
                }
            };
        let failed = match &response {
            ProofResponse::Proof(proof) => !verify_consistency(
                &old.sth.root_hash,
                old.sth.tree_size,
                &new.sth.root_hash,
                new.sth.tree_size,
                proof,
            ),
            ProofResponse::Refused => true,
        };
        if failed {
            evidence.push(Evidence {
                kind: EvidenceKind::FailedConsistency,
                sth_a: old.sth.clone(),
                sth_b: new.sth.clone(),
                proof: match response {
                    ProofResponse::Proof(proof) => Some(proof),
                    ProofResponse::Refused => None,
                },
                detected_at: now,
            });
        }
    }

    AuditOutcome { evidence, completed: true, cursor: None, proof_requests }
}
