//! Scenario files: topology, attacker strategy, and seed, as JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::MAIN_BRANCH;

/// One simulated round is one STH issuance slot (an hour under the default
/// one-per-hour policy).
pub const ROUND_MS: u64 = 3_600_000;

fn default_one() -> u64 {
    1
}

fn default_mmd_rounds() -> u32 {
    24
}

fn default_sth_frequency() -> u32 {
    24
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogSpec {
    pub name: String,
    /// All branches, including the required `main`.
    #[serde(default = "default_branches")]
    pub branches: Vec<String>,
    /// Round at whose start the branches begin diverging.
    #[serde(default = "default_one_u32")]
    pub fork_round: u32,
    /// Leaves appended per branch per round (default 1 per branch).
    #[serde(default)]
    pub appends_per_round: BTreeMap<String, u64>,
    #[serde(default = "default_mmd_rounds")]
    pub mmd_rounds: u32,
    #[serde(default = "default_sth_frequency")]
    pub sth_frequency: u32,
}

fn default_branches() -> Vec<String> {
    vec![MAIN_BRANCH.to_string()]
}

fn default_one_u32() -> u32 {
    1
}

impl LogSpec {
    pub fn honest(name: &str) -> Self {
        Self {
            name: name.to_string(),
            branches: default_branches(),
            fork_round: 1,
            appends_per_round: BTreeMap::new(),
            mmd_rounds: default_mmd_rounds(),
            sth_frequency: default_sth_frequency(),
        }
    }

    pub fn appends_for(&self, branch: &str) -> u64 {
        self.appends_per_round.get(branch).copied().unwrap_or(1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClientSpec {
    pub name: String,
    /// The identity the attacker can observe for this client.
    pub class: String,
    pub log: String,
    /// Ordered hop labels between the client and the log.
    pub path: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregatorSpec {
    pub hop: String,
    #[serde(default = "default_one")]
    pub sampling_n: u64,
    #[serde(default = "default_fragment_threshold")]
    pub fragment_threshold_bytes: u32,
    #[serde(default = "default_capacity")]
    pub clone_channel_capacity: usize,
}

fn default_fragment_threshold() -> u32 {
    400
}

fn default_capacity() -> usize {
    4096
}

impl AggregatorSpec {
    pub fn on(hop: &str) -> Self {
        Self {
            hop: hop.to_string(),
            sampling_n: 1,
            fragment_threshold_bytes: default_fragment_threshold(),
            clone_channel_capacity: default_capacity(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChallengerSpec {
    pub name: String,
    /// Aggregator hops whose clone channels feed this challenger.
    pub taps: Vec<String>,
    /// Anonymous identity used for off-path fetches and challenges.
    pub off_path_identity: String,
    #[serde(default = "default_one_u32")]
    pub audit_period_rounds: u32,
    #[serde(default)]
    pub audit_delay_rounds: u32,
}

/// What the adversary controlling the logs does.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AttackerStrategy {
    /// Single view served to everybody.
    Honest,
    /// Fixed branch per observable identity; unlisted identities get the
    /// default branch.
    ForkStatic {
        class_assignments: BTreeMap<String, String>,
        identity_assignments: BTreeMap<String, String>,
        default_branch: String,
    },
    /// Client classes are assigned statically, but off-path identities are
    /// indistinguishable, so the attacker assigns each pool identity a
    /// uniformly guessed branch.
    ForkAdaptiveGuess {
        class_assignments: BTreeMap<String, String>,
        default_branch: String,
        identity_pool: Vec<String>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub rounds: u32,
    pub logs: Vec<LogSpec>,
    pub clients: Vec<ClientSpec>,
    pub aggregators: Vec<AggregatorSpec>,
    pub challengers: Vec<ChallengerSpec>,
    pub strategy: AttackerStrategy,
}

#[derive(Error, Debug)]
pub enum ScenarioError {
    #[error("scenario has no logs")]
    NoLogs,
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("duplicate log name {0:?}")]
    DuplicateLog(String),
    #[error("log {0:?} must include branch {MAIN_BRANCH:?}")]
    MissingMainBranch(String),
    #[error("client {client:?} references unknown log {log:?}")]
    UnknownLog { client: String, log: String },
    #[error("duplicate aggregator hop {0:?}")]
    DuplicateAggregator(String),
    #[error("challenger {challenger:?} taps unknown aggregator {hop:?}")]
    UnknownTap { challenger: String, hop: String },
    #[error("aggregator {0:?} is tapped by more than one challenger")]
    SharedTap(String),
    #[error("off-path identity {0:?} collides with a client class or hop label")]
    IdentityNotAnonymous(String),
    #[error("strategy references branch {branch:?} missing from log {log:?}")]
    UnknownBranch { log: String, branch: String },
    #[error("adaptive strategy has an empty identity pool")]
    EmptyIdentityPool,
    #[error("could not read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScenarioSpec {
    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.logs.is_empty() {
            return Err(ScenarioError::NoLogs);
        }
        if self.rounds == 0 {
            return Err(ScenarioError::NoRounds);
        }
        let mut log_branches: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for log in &self.logs {
            if log_branches
                .insert(&log.name, log.branches.iter().map(|b| b.as_str()).collect())
                .is_some()
            {
                return Err(ScenarioError::DuplicateLog(log.name.clone()));
            }
            if !log.branches.iter().any(|b| b == MAIN_BRANCH) {
                return Err(ScenarioError::MissingMainBranch(log.name.clone()));
            }
        }
        for client in &self.clients {
            if !log_branches.contains_key(client.log.as_str()) {
                return Err(ScenarioError::UnknownLog {
                    client: client.name.clone(),
                    log: client.log.clone(),
                });
            }
        }
        let mut hops = BTreeSet::new();
        for aggregator in &self.aggregators {
            if !hops.insert(aggregator.hop.as_str()) {
                return Err(ScenarioError::DuplicateAggregator(aggregator.hop.clone()));
            }
        }
        let mut tapped = BTreeSet::new();
        let classes: BTreeSet<&str> = self.clients.iter().map(|c| c.class.as_str()).collect();
        let all_hops: BTreeSet<&str> = self
            .clients
            .iter()
            .flat_map(|c| c.path.iter().map(|h| h.as_str()))
            .chain(hops.iter().copied())
            .collect();
        for challenger in &self.challengers {
            for tap in &challenger.taps {
                if !hops.contains(tap.as_str()) {
                    return Err(ScenarioError::UnknownTap {
                        challenger: challenger.name.clone(),
                        hop: tap.clone(),
                    });
                }
                if !tapped.insert(tap.as_str()) {
                    return Err(ScenarioError::SharedTap(tap.clone()));
                }
            }
            let identity = challenger.off_path_identity.as_str();
            if classes.contains(identity) || all_hops.contains(identity) {
                return Err(ScenarioError::IdentityNotAnonymous(identity.to_string()));
            }
        }

        // Strategy branch references must exist on every forked log.
        let mut referenced: BTreeSet<&str> = BTreeSet::new();
        match &self.strategy {
            AttackerStrategy::Honest => {}
            AttackerStrategy::ForkStatic {
                class_assignments,
                identity_assignments,
                default_branch,
            } => {
                referenced.extend(class_assignments.values().map(|b| b.as_str()));
                referenced.extend(identity_assignments.values().map(|b| b.as_str()));
                referenced.insert(default_branch);
            }
            AttackerStrategy::ForkAdaptiveGuess {
                class_assignments,
                default_branch,
                identity_pool,
            } => {
                if identity_pool.is_empty() {
                    return Err(ScenarioError::EmptyIdentityPool);
                }
                referenced.extend(class_assignments.values().map(|b| b.as_str()));
                referenced.insert(default_branch);
            }
        }
        for (log, branches) in &log_branches {
            for branch in &referenced {
                if !branches.contains(branch) {
                    return Err(ScenarioError::UnknownBranch {
                        log: (*log).to_string(),
                        branch: (*branch).to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Canonical split-view scenario: one victim whose path crosses one
/// aggregator, a static fork serving the victim a private branch, and the
/// challenger off-path on the default branch.
pub fn fork_static_scenario(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        rounds: 4,
        logs: vec![LogSpec {
            branches: vec![MAIN_BRANCH.to_string(), "forged".to_string()],
            fork_round: 2,
            ..LogSpec::honest("pilot")
        }],
        clients: vec![ClientSpec {
            name: "victim1".to_string(),
            class: "victim".to_string(),
            log: "pilot".to_string(),
            path: vec!["edge1".to_string(), "ix1".to_string(), "core1".to_string()],
        }],
        aggregators: vec![AggregatorSpec::on("ix1")],
        challengers: vec![ChallengerSpec {
            name: "chal0".to_string(),
            taps: vec!["ix1".to_string()],
            off_path_identity: "anon0".to_string(),
            audit_period_rounds: 1,
            audit_delay_rounds: 0,
        }],
        strategy: AttackerStrategy::ForkStatic {
            class_assignments: [("victim".to_string(), "forged".to_string())].into(),
            identity_assignments: [("anon0".to_string(), MAIN_BRANCH.to_string())].into(),
            default_branch: MAIN_BRANCH.to_string(),
        },
    }
}

/// Same fork, but the victim's path crosses no aggregator and the
/// challenger's off-path identity is assigned the victim branch too: no
/// store ever holds two views, so nothing can be detected.
pub fn isolated_client_scenario(seed: u64) -> ScenarioSpec {
    let mut spec = fork_static_scenario(seed);
    spec.clients[0].path = vec!["edge1".to_string(), "core1".to_string()];
    spec.aggregators = vec![AggregatorSpec::on("ix9")];
    spec.challengers[0].taps = vec!["ix9".to_string()];
    spec.strategy = AttackerStrategy::ForkStatic {
        class_assignments: [("victim".to_string(), "forged".to_string())].into(),
        identity_assignments: [("anon0".to_string(), "forged".to_string())].into(),
        default_branch: MAIN_BRANCH.to_string(),
    };
    spec
}

/// Honest log over the covered topology.
pub fn honest_scenario(seed: u64) -> ScenarioSpec {
    let mut spec = fork_static_scenario(seed);
    spec.logs[0].branches = vec![MAIN_BRANCH.to_string()];
    spec.strategy = AttackerStrategy::Honest;
    spec
}

/// Adaptive-guess scenario: `k` symmetric branches and `k` anonymous
/// identities, `covering` aggregators on the victim path each feeding its
/// own challenger. The attacker must guess which identities belong to the
/// covering challengers.
pub fn adaptive_guess_scenario(k: usize, covering: usize, seed: u64) -> ScenarioSpec {
    assert!(k >= 1 && covering >= 1 && covering <= k);
    let branches: Vec<String> = (0..k)
        .map(|i| if i == 0 { MAIN_BRANCH.to_string() } else { format!("b{i}") })
        .collect();
    let hops: Vec<String> = (0..covering).map(|i| format!("ix{i}")).collect();
    let identity_pool: Vec<String> = (0..k).map(|i| format!("anon{i}")).collect();

    ScenarioSpec {
        seed,
        rounds: 2,
        logs: vec![LogSpec {
            branches,
            fork_round: 1,
            ..LogSpec::honest("pilot")
        }],
        clients: vec![ClientSpec {
            name: "victim1".to_string(),
            class: "victim".to_string(),
            log: "pilot".to_string(),
            path: hops.clone(),
        }],
        aggregators: hops.iter().map(|h| AggregatorSpec::on(h)).collect(),
        challengers: hops
            .iter()
            .enumerate()
            .map(|(i, hop)| ChallengerSpec {
                name: format!("chal{i}"),
                taps: vec![hop.clone()],
                off_path_identity: format!("anon{i}"),
                audit_period_rounds: 1,
                audit_delay_rounds: 0,
            })
            .collect(),
        strategy: AttackerStrategy::ForkAdaptiveGuess {
            // The victim is pinned to the first branch; every anonymous
            // identity gets a uniform guess among all k branches.
            class_assignments: [("victim".to_string(), MAIN_BRANCH.to_string())].into(),
            default_branch: MAIN_BRANCH.to_string(),
            identity_pool,
        },
    }
}
