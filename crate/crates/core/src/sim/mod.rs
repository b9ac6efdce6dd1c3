//! Deterministic, seeded scenario runner.
//!
//! Each round, every client fetches its log's current tree head; the
//! response is materialized as real wire bytes and walked along the
//! client's path, where aggregating hops run the real pipeline and clone
//! matches to their challengers. Challengers ingest clones, fetch their own
//! view over an off-path identity, and audit. Detection means some
//! challenger produced evidence.

mod scenario;

pub use scenario::{
    adaptive_guess_scenario, fork_static_scenario, honest_scenario, isolated_client_scenario,
    AggregatorSpec, AttackerStrategy, ChallengerSpec, ClientSpec, LogSpec, ScenarioError,
    ScenarioSpec, ROUND_MS,
};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::Receiver;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::challenger::{
    Challenger, ChallengerConfig, Evidence, LogDescriptor, OffPathChannel, ProofResponse,
    TransportError,
};
use crate::codec::fixtures::SthFrameSpec;
use crate::codec::build_sth_frame;
use crate::merkle::{ForkPolicy, Log, LogId, LogPolicy, SignedTreeHead, TestSigner, MAIN_BRANCH};
use crate::pipeline::{ClonedPacket, Pipeline, PipelineConfig, PipelineStats};

/// Off-path simulation binding: the log answers exactly what it would
/// serve the given anonymous identity, with no linkage to any aggregator.
pub struct SimOffPathChannel<'a> {
    log: &'a Log,
    identity: &'a str,
}

impl<'a> SimOffPathChannel<'a> {
    pub fn new(log: &'a Log, identity: &'a str) -> Self {
        Self { log, identity }
    }
}

impl OffPathChannel for SimOffPathChannel<'_> {
    fn fetch_sth(&mut self, _log: &LogId) -> Result<SignedTreeHead, TransportError> {
        Ok(self.log.serve_sth(self.identity))
    }

    fn consistency(
        &mut self,
        _log: &LogId,
        old_size: u64,
        new_size: u64,
    ) -> Result<ProofResponse, TransportError> {
        let branch = self.log.fork_policy().branch_for_class(self.identity);
        match self.log.consistency_proof(branch, old_size, new_size) {
            Ok(proof) => Ok(ProofResponse::Proof(proof)),
            Err(_) => Ok(ProofResponse::Refused),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rounds: u32,
    pub detected: bool,
    pub detection_round: Option<u32>,
    /// Deduplicated evidence per challenger, in detection order.
    pub evidence: BTreeMap<String, Vec<Evidence>>,
    /// Whether any aggregating hop sat on the client's path.
    pub client_coverage: BTreeMap<String, bool>,
    pub aggregator_stats: BTreeMap<String, PipelineStats>,
}

impl SimReport {
    pub fn evidence_count(&self) -> usize {
        self.evidence.values().map(Vec::len).sum()
    }

    pub fn summary_line(&self) -> String {
        if self.detected {
            format!(
                "DETECTED round={} evidence={}",
                self.detection_round.unwrap_or(0),
                self.evidence_count()
            )
        } else {
            "NOT-DETECTED".to_string()
        }
    }
}

/// Final state of a finished run, for inspection by tests and tools.
pub struct SimRun {
    pub logs: BTreeMap<String, Log>,
    pub challengers: BTreeMap<String, Challenger>,
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<SimReport, ScenarioError> {
    run_scenario_detailed(spec).map(|(report, _)| report)
}

pub fn run_scenario_detailed(spec: &ScenarioSpec) -> Result<(SimReport, SimRun), ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Logs, all still honest single-branch; forks install at fork_round.
    let mut logs: BTreeMap<String, Log> = BTreeMap::new();
    for log_spec in &spec.logs {
        let policy = LogPolicy {
            mmd_ms: u64::from(log_spec.mmd_rounds) * ROUND_MS,
            sth_frequency: log_spec.sth_frequency,
        };
        let signer = Box::new(TestSigner::from_label(&log_spec.name));
        let log = Log::new(&log_spec.name, policy, signer, 0)
            .unwrap_or_else(|e| panic!("log {:?}: {e}", log_spec.name));
        logs.insert(log_spec.name.clone(), log);
    }

    // Attacker branch assignments over observable identities. Adaptive
    // guesses are drawn once per run from the run seed.
    let assignments: Option<(BTreeMap<String, String>, String)> = match &spec.strategy {
        AttackerStrategy::Honest => None,
        AttackerStrategy::ForkStatic {
            class_assignments,
            identity_assignments,
            default_branch,
        } => {
            let mut map = class_assignments.clone();
            map.extend(identity_assignments.clone());
            Some((map, default_branch.clone()))
        }
        AttackerStrategy::ForkAdaptiveGuess {
            class_assignments,
            default_branch,
            identity_pool,
        } => {
            let branches = &spec.logs[0].branches;
            let mut map = class_assignments.clone();
            for identity in identity_pool {
                let guess = branches[rng.gen_range(0..branches.len())].clone();
                map.insert(identity.clone(), guess);
            }
            Some((map, default_branch.clone()))
        }
    };

    // Aggregating hops with their clone channels.
    let mut pipelines: BTreeMap<String, Pipeline> = BTreeMap::new();
    let mut receivers: BTreeMap<String, Receiver<ClonedPacket>> = BTreeMap::new();
    let known_logs: BTreeSet<String> = spec.logs.iter().map(|l| l.name.clone()).collect();
    for aggregator in &spec.aggregators {
        let config = PipelineConfig {
            known_logs: known_logs.clone(),
            fragment_threshold_bytes: aggregator.fragment_threshold_bytes,
            sampling_n: aggregator.sampling_n,
            clone_channel_capacity: aggregator.clone_channel_capacity,
            ..PipelineConfig::default()
        };
        let (pipeline, rx) = Pipeline::with_channel(config, &aggregator.hop);
        pipelines.insert(aggregator.hop.clone(), pipeline);
        receivers.insert(aggregator.hop.clone(), rx);
    }

    let descriptors: Vec<LogDescriptor> = logs
        .values()
        .map(|log| LogDescriptor { log_id: log.id().clone(), public_key: log.public_key() })
        .collect();
    let mut challengers: Vec<Challenger> = spec
        .challengers
        .iter()
        .map(|_| Challenger::new(ChallengerConfig::new(descriptors.clone())))
        .collect();

    let mut evidence: BTreeMap<String, Vec<Evidence>> = spec
        .challengers
        .iter()
        .map(|c| (c.name.clone(), Vec::new()))
        .collect();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut detection_round = None;

    for round in 1..=spec.rounds {
        let now = u64::from(round) * ROUND_MS;

        // Log maintenance: fork when due, then append and issue per branch.
        for log_spec in &spec.logs {
            let log = logs.get_mut(&log_spec.name).expect("log exists");
            if round == log_spec.fork_round && log_spec.branches.len() > 1 {
                for branch in &log_spec.branches {
                    if branch != MAIN_BRANCH {
                        log.fork_branch(MAIN_BRANCH, branch).expect("fresh branch");
                    }
                }
                if let Some((map, default_branch)) = &assignments {
                    log.set_fork_policy(ForkPolicy::ForkByClientClass {
                        assignments: map.clone(),
                        default_branch: default_branch.clone(),
                    })
                    .expect("validated branches");
                }
            }
            let branches: Vec<String> = log.branch_names().map(String::from).collect();
            for branch in branches {
                for i in 0..log_spec.appends_for(&branch) {
                    // Leaves diverge only once the branch label differs.
                    let leaf = format!("{}/{branch}/{round}/{i}", log_spec.name);
                    log.append(&branch, leaf.as_bytes()).expect("branch exists");
                }
                log.issue_sth(&branch, now).expect("issuance inside budget");
            }
        }

        // Client fetches, materialized as wire frames walked hop by hop.
        for (client_index, client) in spec.clients.iter().enumerate() {
            let log = &logs[&client.log];
            let sth = log.serve_sth(&client.class);
            let mut frame_spec = SthFrameSpec::new(&client.log, &sth);
            frame_spec.txid = (round as u16).wrapping_mul(251).wrapping_add(client_index as u16);
            frame_spec.dst_ip = [198, 51, 100, 10 + (client_index as u8)];
            frame_spec.dst_port = 30000 + client_index as u16;
            let frame = build_sth_frame(&frame_spec).expect("sim tree heads fit one frame");
            let capture_us = now * 1000 + client_index as u64;
            for hop in &client.path {
                if let Some(pipeline) = pipelines.get_mut(hop) {
                    let result = pipeline.process(&frame, capture_us);
                    assert_eq!(result.forwarded, &frame[..], "forwarding must be byte-exact");
                }
            }
        }

        // Challengers drain their taps, then audit on schedule.
        for (spec_c, challenger) in spec.challengers.iter().zip(challengers.iter_mut()) {
            for tap in &spec_c.taps {
                let rx = receivers.get_mut(tap).expect("validated tap");
                for clone in rx.try_iter() {
                    challenger.ingest_clone(&clone.data, now);
                }
            }
            let due = round > spec_c.audit_delay_rounds
                && (round - spec_c.audit_delay_rounds) % spec_c.audit_period_rounds == 0;
            if !due {
                continue;
            }
            for (log_name, log) in &logs {
                let mut channel = SimOffPathChannel::new(log, &spec_c.off_path_identity);
                let _ = challenger.fetch_off_path(&mut channel, log_name, now);
                let outcome = challenger.audit(&mut channel, log_name, now, None);
                for finding in outcome.evidence {
                    detection_round.get_or_insert(round);
                    let fingerprint = (
                        spec_c.name.clone(),
                        format!(
                            "{:?}|{}|{}|{}|{}",
                            finding.kind,
                            finding.sth_a.tree_size,
                            finding.sth_a.root_hash,
                            finding.sth_b.tree_size,
                            finding.sth_b.root_hash
                        ),
                    );
                    if seen.insert(fingerprint) {
                        evidence.get_mut(&spec_c.name).expect("known").push(finding);
                    }
                }
            }
        }
    }

    let aggregator_hops: BTreeSet<&str> =
        spec.aggregators.iter().map(|a| a.hop.as_str()).collect();
    let client_coverage = spec
        .clients
        .iter()
        .map(|c| {
            let covered = c.path.iter().any(|hop| aggregator_hops.contains(hop.as_str()));
            (c.name.clone(), covered)
        })
        .collect();
    let aggregator_stats = pipelines
        .iter()
        .map(|(hop, p)| (hop.clone(), p.stats().clone()))
        .collect();

    let report = SimReport {
        rounds: spec.rounds,
        detected: detection_round.is_some(),
        detection_round,
        evidence,
        client_coverage,
        aggregator_stats,
    };
    let run = SimRun {
        logs,
        challengers: spec
            .challengers
            .iter()
            .map(|c| c.name.clone())
            .zip(challengers)
            .collect(),
    };
    Ok((report, run))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    pub stderr: f64,
    pub detections: u64,
    pub trials: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo detection probability over independently seeded runs of the
/// same scenario.
pub fn detection_probability(
    base: &ScenarioSpec,
    trials: u64,
    seed: u64,
) -> Result<ProbabilityEstimate, ScenarioError> {
    base.validate()?;
    let mut detections = 0u64;
    for trial in 0..trials {
        let mut spec = base.clone();
        spec.seed = splitmix64(seed ^ trial.wrapping_mul(0x2545_F491_4F6C_DD1D));
        if run_scenario(&spec)?.detected {
            detections += 1;
        }
    }
    let p = detections as f64 / trials as f64;
    let stderr = (p * (1.0 - p) / trials as f64).sqrt();
    Ok(ProbabilityEstimate { probability: p, stderr, detections, trials })
}

#[cfg(test)]
mod tests;
