//! Serialized evidence reports and their independent re-verification.
//!
//! A report embeds complete signed tree heads (hex digests, base64
//! signatures) so any third party holding only the log's public key can
//! re-check both signatures and the claimed inconsistency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::{verify_consistency, LogPublicKey, TimestampMs};

use super::audit::{Evidence, EvidenceKind};
use super::ChallengerCounters;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub generated_at: TimestampMs,
    pub findings: Vec<Evidence>,
    pub counters: ChallengerCounters,
}

impl Report {
    pub fn new(
        findings: Vec<Evidence>,
        counters: ChallengerCounters,
        generated_at: TimestampMs,
    ) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            generated_at,
            findings,
            counters,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ReportVerifyError {
    #[error("finding {0}: no public key for log {1:?}")]
    UnknownLog(usize, String),
    #[error("finding {0}: tree heads are from different logs")]
    MixedLogs(usize),
    #[error("finding {0}: signature on tree head {1} does not verify")]
    BadSignature(usize, char),
    #[error("finding {0}: roots are equal, nothing is inconsistent")]
    RootsEqual(usize),
    #[error("finding {0}: tree sizes differ in an equal-size claim")]
    SizesDiffer(usize),
    #[error("finding {0}: sizes are not increasing")]
    SizesNotIncreasing(usize),
    #[error("finding {0}: the embedded proof actually verifies")]
    ProofVerifies(usize),
}

/// Re-verifies every finding from the report alone plus the logs' public
/// keys (indexed by log name). Returns the number of verified findings.
pub fn verify_report(
    report: &Report,
    keys: &BTreeMap<String, LogPublicKey>,
) -> Result<usize, ReportVerifyError> {
    for (i, finding) in report.findings.iter().enumerate() {
        let a = &finding.sth_a;
        let b = &finding.sth_b;
        if a.log_id != b.log_id {
            return Err(ReportVerifyError::MixedLogs(i));
        }
        let key = keys
            .get(&a.log_id.name)
            .ok_or_else(|| ReportVerifyError::UnknownLog(i, a.log_id.name.clone()))?;
        if !a.verify(key) {
            return Err(ReportVerifyError::BadSignature(i, 'a'));
        }
        if !b.verify(key) {
            return Err(ReportVerifyError::BadSignature(i, 'b'));
        }
        match finding.kind {
            EvidenceKind::EqualSizeDistinctRoots => {
                if a.tree_size != b.tree_size {
                    return Err(ReportVerifyError::SizesDiffer(i));
                }
                if a.root_hash == b.root_hash {
                    return Err(ReportVerifyError::RootsEqual(i));
                }
            }
            EvidenceKind::FailedConsistency => {
                if a.tree_size >= b.tree_size {
                    return Err(ReportVerifyError::SizesNotIncreasing(i));
                }
                // With a proof present the report must show it failing;
                // refusal (no proof) rests on the two signed statements.
                if let Some(proof) = &finding.proof {
                    if verify_consistency(
                        &a.root_hash,
                        a.tree_size,
                        &b.root_hash,
                        b.tree_size,
                        proof,
                    ) {
                        return Err(ReportVerifyError::ProofVerifies(i));
                    }
                }
            }
        }
    }
    Ok(report.findings.len())
}
