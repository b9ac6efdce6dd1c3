//! A simulated append-only log that issues signed tree heads, answers
//! proofs, and can be configured to maintain forked views keyed by client
//! class.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use base64::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::sign::{tree_head_bytes, LogPublicKey, SignerSpec, SthSigner};
use super::tree::{Digest, MerkleTree};
use super::MerkleError;

/// Milliseconds since the Unix epoch.
pub type TimestampMs = u64;

pub const DEFAULT_MMD_MS: u64 = 24 * 60 * 60 * 1000;
pub const DEFAULT_STH_FREQUENCY: u32 = 24;

/// Identity of a log: a 32-byte id plus the lowercase label used as the
/// `<log>` component of STH query domains.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LogId {
    #[serde(with = "hex::serde")]
    pub id: [u8; 32],
    pub name: String,
}

impl LogId {
    /// Derives a log id from the name and public key, so equal
    /// configurations name the same log.
    pub fn derive(name: &str, public_key: &LogPublicKey) -> Result<Self, MerkleError> {
        validate_log_name(name)?;
        let mut h = Sha256::new();
        h.update(b"log-id:");
        h.update(name.as_bytes());
        h.update(serde_json::to_vec(public_key).expect("key serializes"));
        Ok(LogId { id: h.finalize().into(), name: name.to_string() })
    }
}

/// Log labels must be usable as a single DNS label: nonempty, at most 63
/// bytes, lowercase letters, digits, and interior hyphens.
pub fn validate_log_name(name: &str) -> Result<(), MerkleError> {
    let ok = !name.is_empty()
        && name.len() <= 63
        && !name.starts_with('-')
        && !name.ends_with('-')
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(MerkleError::InvalidLogName(name.to_string()))
    }
}

/// A log's signed statement of its current state.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SignedTreeHead {
    pub log_id: LogId,
    pub tree_size: u64,
    pub timestamp: TimestampMs,
    pub root_hash: Digest,
    #[serde(with = "base64_bytes")]
    pub signature: Vec<u8>,
}

impl SignedTreeHead {
    /// Checks the signature over the canonical tree-head serialization.
    pub fn verify(&self, key: &LogPublicKey) -> bool {
        let msg = tree_head_bytes(self.tree_size, self.timestamp, &self.root_hash);
        key.verify(&msg, &self.signature)
    }
}

mod base64_bytes {
    use base64::prelude::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64_STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        BASE64_STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

/// Issuance policy: at most `sth_frequency` tree heads per MMD window.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LogPolicy {
    pub mmd_ms: u64,
    pub sth_frequency: u32,
}

impl Default for LogPolicy {
    fn default() -> Self {
        Self { mmd_ms: DEFAULT_MMD_MS, sth_frequency: DEFAULT_STH_FREQUENCY }
    }
}

impl LogPolicy {
    pub fn validate(&self) -> Result<(), MerkleError> {
        if self.mmd_ms == 0 || self.sth_frequency == 0 {
            return Err(MerkleError::InvalidPolicy);
        }
        Ok(())
    }
}

/// How the log assigns views to the client classes it can observe.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ForkPolicy {
    /// One view for everybody.
    Honest,
    /// Distinct views per client-class label; classes without an entry get
    /// the default branch.
    ForkByClientClass {
        assignments: BTreeMap<String, String>,
        default_branch: String,
    },
}

impl ForkPolicy {
    pub fn branch_for_class<'a>(&'a self, class: &str) -> &'a str {
        match self {
            ForkPolicy::Honest => MAIN_BRANCH,
            ForkPolicy::ForkByClientClass { assignments, default_branch } => {
                assignments.get(class).map_or(default_branch.as_str(), |b| b.as_str())
            }
        }
    }
}

pub const MAIN_BRANCH: &str = "main";

struct Branch {
    tree: MerkleTree,
    issued_at: Vec<TimestampMs>,
    latest: SignedTreeHead,
}

/// An append-only Merkle log with one or more branches. Honest logs have a
/// single branch; a split-viewing log keeps several, each individually
/// append-only.
pub struct Log {
    id: LogId,
    policy: LogPolicy,
    fork: ForkPolicy,
    signer: Box<dyn SthSigner>,
    branches: BTreeMap<String, Branch>,
}

impl Log {
    /// Creates an honest single-branch log. A genesis tree head over the
    /// empty tree is issued at `now` so the log always has a current STH to
    /// serve; it does not count against the issuance budget.
    pub fn new(
        name: &str,
        policy: LogPolicy,
        signer: Box<dyn SthSigner>,
        now: TimestampMs,
    ) -> Result<Self, MerkleError> {
        policy.validate()?;
        let id = LogId::derive(name, &signer.public_key())?;
        let tree = MerkleTree::new();
        let latest = sign_tree_head(&id, signer.as_ref(), &tree, now);
        let mut branches = BTreeMap::new();
        branches.insert(
            MAIN_BRANCH.to_string(),
            Branch { tree, issued_at: Vec::new(), latest },
        );
        Ok(Self { id, policy, fork: ForkPolicy::Honest, signer, branches })
    }

    pub fn id(&self) -> &LogId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.id.name
    }

    pub fn policy(&self) -> &LogPolicy {
        &self.policy
    }

    pub fn public_key(&self) -> LogPublicKey {
        self.signer.public_key()
    }

    pub fn fork_policy(&self) -> &ForkPolicy {
        &self.fork
    }

    /// Installs a fork policy. Every branch named by the policy must exist.
    pub fn set_fork_policy(&mut self, fork: ForkPolicy) -> Result<(), MerkleError> {
        if let ForkPolicy::ForkByClientClass { assignments, default_branch } = &fork {
            for branch in assignments.values().chain([default_branch]) {
                if !self.branches.contains_key(branch) {
                    return Err(MerkleError::UnknownBranch(branch.clone()));
                }
            }
        }
        self.fork = fork;
        Ok(())
    }

    pub fn branch_names(&self) -> impl Iterator<Item = &str> {
        self.branches.keys().map(|s| s.as_str())
    }

    fn branch(&self, view: &str) -> Result<&Branch, MerkleError> {
        self.branches.get(view).ok_or_else(|| MerkleError::UnknownBranch(view.to_string()))
    }

    fn branch_mut(&mut self, view: &str) -> Result<&mut Branch, MerkleError> {
        self.branches.get_mut(view).ok_or_else(|| MerkleError::UnknownBranch(view.to_string()))
    }

    /// Creates branch `new` as a copy of branch `from`. The new branch gets
    /// a fresh issuance budget.
    pub fn fork_branch(&mut self, from: &str, new: &str) -> Result<(), MerkleError> {
        if self.branches.contains_key(new) {
            return Err(MerkleError::BranchExists(new.to_string()));
        }
        let src = self.branch(from)?;
        let branch = Branch {
            tree: src.tree.clone(),
            issued_at: Vec::new(),
            latest: src.latest.clone(),
        };
        self.branches.insert(new.to_string(), branch);
        Ok(())
    }

    /// Appends a leaf to a branch and returns the branch's new tree size.
    pub fn append(&mut self, view: &str, leaf: &[u8]) -> Result<u64, MerkleError> {
        Ok(self.branch_mut(view)?.tree.append(leaf))
    }

    pub fn tree_size(&self, view: &str) -> Result<u64, MerkleError> {
        Ok(self.branch(view)?.tree.size())
    }

    pub fn root_at(&self, view: &str, size: u64) -> Result<Digest, MerkleError> {
        self.branch(view)?.tree.root_at(size)
    }

    /// Issues a signed tree head over the branch's current state.
    /// Fails when the issuance budget for the sliding MMD window is spent.
    pub fn issue_sth(
        &mut self,
        view: &str,
        now: TimestampMs,
    ) -> Result<SignedTreeHead, MerkleError> {
        let policy = self.policy;
        let id = self.id.clone();
        // Split borrow: the signer is immutable while the branch mutates.
        let signer = &*self.signer;
        let branch = self
            .branches
            .get_mut(view)
            .ok_or_else(|| MerkleError::UnknownBranch(view.to_string()))?;
        let window_start = now.saturating_sub(policy.mmd_ms);
        branch.issued_at.retain(|&t| t > window_start);
        if branch.issued_at.len() >= policy.sth_frequency as usize {
            return Err(MerkleError::SthFrequencyExceeded {
                frequency: policy.sth_frequency,
                mmd_ms: policy.mmd_ms,
            });
        }
        branch.issued_at.push(now);
        let sth = sign_tree_head(&id, signer, &branch.tree, now);
        branch.latest = sth.clone();
        Ok(sth)
    }

    /// The most recently issued tree head of a branch.
    pub fn latest_sth(&self, view: &str) -> Result<SignedTreeHead, MerkleError> {
        Ok(self.branch(view)?.latest.clone())
    }

    /// Serves the latest tree head of the branch the fork policy assigns to
    /// `client_class`. Honest logs serve their single branch to everyone.
    pub fn serve_sth(&self, client_class: &str) -> SignedTreeHead {
        let branch = self.fork.branch_for_class(client_class).to_string();
        self.branches
            .get(&branch)
            .unwrap_or_else(|| &self.branches[MAIN_BRANCH])
            .latest
            .clone()
    }

    pub fn consistency_proof(
        &self,
        view: &str,
        old_size: u64,
        new_size: u64,
    ) -> Result<Vec<Digest>, MerkleError> {
        self.branch(view)?.tree.consistency_proof(old_size, new_size)
    }

    pub fn inclusion_proof(
        &self,
        view: &str,
        index: u64,
        size: u64,
    ) -> Result<Vec<Digest>, MerkleError> {
        self.branch(view)?.tree.inclusion_proof(index, size)
    }
}

fn sign_tree_head(
    id: &LogId,
    signer: &dyn SthSigner,
    tree: &MerkleTree,
    now: TimestampMs,
) -> SignedTreeHead {
    let root = tree.root();
    let msg = tree_head_bytes(tree.size(), now, &root);
    SignedTreeHead {
        log_id: id.clone(),
        tree_size: tree.size(),
        timestamp: now,
        root_hash: root,
        signature: signer.sign(&msg),
    }
}

/// Header line of a log state file. The file is line-delimited: this JSON
/// header first, then one base64 leaf per line, grouped per branch in the
/// order the header's `branches` array declares.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogStateHeader {
    pub name: String,
    pub policy: LogPolicy,
    pub fork: ForkPolicy,
    pub signer: SignerSpec,
    /// Branch name and leaf count, in file order.
    pub branches: Vec<(String, u64)>,
    /// Timestamp the genesis tree head carries on import.
    pub created_at: TimestampMs,
}

impl Log {
    /// Writes the log's full state in the line-delimited export format.
    pub fn export<W: Write>(&self, spec: SignerSpec, mut w: W) -> Result<(), MerkleError> {
        let header = LogStateHeader {
            name: self.id.name.clone(),
            policy: self.policy,
            fork: self.fork.clone(),
            signer: spec,
            branches: self
                .branches
                .iter()
                .map(|(name, b)| (name.clone(), b.tree.size()))
                .collect(),
            created_at: self.branches[MAIN_BRANCH].latest.timestamp,
        };
        let header_json = serde_json::to_string(&header).expect("header serializes");
        writeln!(w, "{header_json}")?;
        for branch in self.branches.values() {
            for leaf in branch.tree.leaves() {
                writeln!(w, "{}", BASE64_STANDARD.encode(leaf))?;
            }
        }
        Ok(())
    }

    /// Reads a log state file written by [`Log::export`]. The genesis tree
    /// head is re-issued over each branch's imported leaves.
    pub fn import<R: BufRead>(r: R) -> Result<Self, MerkleError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| MerkleError::BadStateFile("empty file".into()))??;
        let header: LogStateHeader = serde_json::from_str(&header_line)
            .map_err(|e| MerkleError::BadStateFile(format!("bad header: {e}")))?;
        header.policy.validate()?;
        if !header.branches.iter().any(|(name, _)| name == MAIN_BRANCH) {
            return Err(MerkleError::BadStateFile(format!(
                "missing required branch {MAIN_BRANCH:?}"
            )));
        }

        let signer = header.signer.build();
        let id = LogId::derive(&header.name, &signer.public_key())?;
        let mut branches = BTreeMap::new();
        for (branch_name, count) in &header.branches {
            let mut tree = MerkleTree::new();
            for _ in 0..*count {
                let line = lines.next().ok_or_else(|| {
                    MerkleError::BadStateFile(format!(
                        "leaf list truncated in branch {branch_name:?}"
                    ))
                })??;
                let leaf = BASE64_STANDARD
                    .decode(line.trim())
                    .map_err(|e| MerkleError::BadStateFile(format!("bad leaf base64: {e}")))?;
                tree.append(&leaf);
            }
            let latest = sign_tree_head(&id, signer.as_ref(), &tree, header.created_at);
            branches.insert(
                branch_name.clone(),
                Branch { tree, issued_at: Vec::new(), latest },
            );
        }
        let mut log = Self { id, policy: header.policy, fork: ForkPolicy::Honest, signer, branches };
        log.set_fork_policy(header.fork)?;
        Ok(log)
    }
}
