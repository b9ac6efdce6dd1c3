use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::challenger::verify_report;

#[test]
fn honest_scenarios_never_detect() {
    for seed in 0..20 {
        let report = run_scenario(&honest_scenario(seed)).unwrap();
        assert!(!report.detected, "honest run detected at seed {seed}");
        assert_eq!(report.evidence_count(), 0);
        assert_eq!(report.summary_line(), "NOT-DETECTED");
    }
}

#[test]
fn fork_static_detects_by_second_audit_round() {
    let spec = fork_static_scenario(7);
    let (report, run) = run_scenario_detailed(&spec).unwrap();
    assert!(report.detected);
    // The fork lands at round 2 and audits run every round.
    assert_eq!(report.detection_round, Some(2));
    assert!(report.client_coverage["victim1"]);
    assert!(report.summary_line().starts_with("DETECTED"));

    // The emitted evidence re-verifies from the report alone.
    let challenger = &run.challengers["chal0"];
    let findings: Vec<_> = report.evidence["chal0"].clone();
    assert!(!findings.is_empty());
    let report_doc = challenger.report(findings, 0);
    let keys = [("pilot".to_string(), run.logs["pilot"].public_key())].into();
    assert!(verify_report(&report_doc, &keys).unwrap() >= 1);
}

#[test]
fn isolated_client_evades_detection() {
    let spec = isolated_client_scenario(7);
    let report = run_scenario(&spec).unwrap();
    assert!(!report.detected);
    assert!(!report.client_coverage["victim1"]);
    // The aggregator exists but nothing STH-related crossed it.
    assert_eq!(report.aggregator_stats["ix9"].sth_matches, 0);
}

#[test]
fn reports_are_deterministic_for_a_seed() {
    let spec = fork_static_scenario(99);
    let a = serde_json::to_string(&run_scenario(&spec).unwrap()).unwrap();
    let b = serde_json::to_string(&run_scenario(&spec).unwrap()).unwrap();
    assert_eq!(a, b);

    let adaptive = adaptive_guess_scenario(4, 1, 123);
    let a = serde_json::to_string(&run_scenario(&adaptive).unwrap()).unwrap();
    let b = serde_json::to_string(&run_scenario(&adaptive).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scenario_json_round_trip_and_validation() {
    let spec = fork_static_scenario(1);
    let parsed = ScenarioSpec::from_json(&spec.to_json()).unwrap();
    assert_eq!(parsed.to_json(), spec.to_json());

    let mut bad = fork_static_scenario(1);
    bad.challengers[0].taps = vec!["nowhere".to_string()];
    assert!(matches!(
        bad.validate(),
        Err(ScenarioError::UnknownTap { .. })
    ));

    let mut bad = fork_static_scenario(1);
    bad.clients[0].log = "ghost".to_string();
    assert!(matches!(bad.validate(), Err(ScenarioError::UnknownLog { .. })));

    let mut bad = fork_static_scenario(1);
    if let AttackerStrategy::ForkStatic { class_assignments, .. } = &mut bad.strategy {
        class_assignments.insert("victim".to_string(), "missing".to_string());
    }
    assert!(matches!(
        bad.validate(),
        Err(ScenarioError::UnknownBranch { .. })
    ));

    let mut bad = fork_static_scenario(1);
    bad.challengers[0].off_path_identity = "victim".to_string();
    assert!(matches!(
        bad.validate(),
        Err(ScenarioError::IdentityNotAnonymous(_))
    ));
}

#[test]
fn adaptive_guess_with_one_identity_never_detects() {
    // k = 1: a single branch, so every guess is right.
    let estimate = detection_probability(&adaptive_guess_scenario(1, 1, 0), 200, 11).unwrap();
    assert_eq!(estimate.detections, 0);
    assert_eq!(estimate.probability, 0.0);
}

#[test]
fn adaptive_guess_k4_approaches_three_quarters() {
    // The acceptance suite runs the full 10k-trial version; this is a
    // quick regression guard.
    let estimate = detection_probability(&adaptive_guess_scenario(4, 1, 0), 1500, 5).unwrap();
    assert!(
        (estimate.probability - 0.75).abs() <= 0.05,
        "estimate {} too far from 0.75",
        estimate.probability
    );
}

#[test]
fn two_covering_aggregators_match_enumerated_ground_truth() {
    // Exhaustive ground truth: with two covered challengers the attacker
    // evades only when both anonymous identities guess the victim branch.
    let base = adaptive_guess_scenario(2, 2, 0);
    let branches = ["main".to_string(), "b1".to_string()];
    let mut detected_count = 0;
    for a0 in &branches {
        for a1 in &branches {
            let mut spec = base.clone();
            spec.strategy = AttackerStrategy::ForkStatic {
                class_assignments: [("victim".to_string(), "main".to_string())].into(),
                identity_assignments: [
                    ("anon0".to_string(), a0.clone()),
                    ("anon1".to_string(), a1.clone()),
                ]
                .into(),
                default_branch: "main".to_string(),
            };
            if run_scenario(&spec).unwrap().detected {
                detected_count += 1;
            }
        }
    }
    assert_eq!(detected_count, 3, "evasion only on the double-correct guess");
    let truth = detected_count as f64 / 4.0;

    let estimate = detection_probability(&base, 2000, 17).unwrap();
    assert!(
        (estimate.probability - truth).abs() <= 0.05,
        "measured {} vs enumerated {truth}",
        estimate.probability
    );
}

/// Which branches of the log an observed tree head is consistent with.
fn consistent_branches(log: &Log, sth: &SignedTreeHead) -> BTreeSet<String> {
    log.branch_names()
        .filter(|branch| {
            log.root_at(branch, sth.tree_size)
                .is_ok_and(|root| root == sth.root_hash)
        })
        .map(String::from)
        .collect()
}

#[test]
fn implicit_gossip_over_random_covered_topologies() {
    // Canonical attack family: the victim class gets the forged branch and
    // every off-path identity the default one. Whenever the combined
    // stores contain tree heads from two provably different branches, some
    // challenger must have detected.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for case in 0..30 {
        let hop_pool: Vec<String> = (0..5).map(|i| format!("h{i}")).collect();
        let n_clients = rng.gen_range(1..=3);
        let clients: Vec<ClientSpec> = (0..n_clients)
            .map(|i| {
                let class = if rng.gen_bool(0.5) { "victim" } else { "other" };
                let path: Vec<String> = hop_pool
                    .iter()
                    .filter(|_| rng.gen_bool(0.5))
                    .cloned()
                    .collect();
                ClientSpec {
                    name: format!("c{i}"),
                    class: class.to_string(),
                    log: "pilot".to_string(),
                    path,
                }
            })
            .collect();
        let aggregators: Vec<AggregatorSpec> = hop_pool
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|hop| AggregatorSpec::on(hop))
            .collect();
        let challengers: Vec<ChallengerSpec> = aggregators
            .iter()
            .enumerate()
            .map(|(i, aggregator)| ChallengerSpec {
                name: format!("chal{i}"),
                taps: vec![aggregator.hop.clone()],
                off_path_identity: format!("anon{i}"),
                audit_period_rounds: 1,
                audit_delay_rounds: 0,
            })
            .collect();
        let identity_assignments = challengers
            .iter()
            .map(|c| (c.off_path_identity.clone(), MAIN_BRANCH.to_string()))
            .collect();

        let spec = ScenarioSpec {
            seed: case,
            rounds: 3,
            logs: vec![LogSpec {
                branches: vec![MAIN_BRANCH.to_string(), "forged".to_string()],
                fork_round: 2,
                ..LogSpec::honest("pilot")
            }],
            clients,
            aggregators,
            challengers,
            strategy: AttackerStrategy::ForkStatic {
                class_assignments: [("victim".to_string(), "forged".to_string())].into(),
                identity_assignments,
                default_branch: MAIN_BRANCH.to_string(),
            },
        };
        let (report, run) = run_scenario_detailed(&spec).unwrap();

        let log = &run.logs["pilot"];
        let mut combined: Vec<BTreeSet<String>> = Vec::new();
        for challenger in run.challengers.values() {
            for entry in challenger.store().iter() {
                combined.push(consistent_branches(log, &entry.sth));
            }
        }
        let two_branches = combined
            .iter()
            .any(|a| combined.iter().any(|b| a.is_disjoint(b) && !a.is_empty() && !b.is_empty()));
        if two_branches {
            assert!(
                report.detected,
                "case {case}: two branches observed but nothing detected"
            );
        } else {
            assert!(
                !report.detected,
                "case {case}: detection without two observed branches"
            );
        }
    }
}

#[test]
fn adding_aggregators_never_hides_a_detection() {
    let base = fork_static_scenario(3);
    assert!(run_scenario(&base).unwrap().detected);
    // Grow the aggregator set hop by hop; detection must survive.
    for extra_hop in ["edge1", "core1"] {
        let mut spec = base.clone();
        spec.aggregators.push(AggregatorSpec::on(extra_hop));
        spec.challengers.push(ChallengerSpec {
            name: format!("chal_{extra_hop}"),
            taps: vec![extra_hop.to_string()],
            off_path_identity: format!("anon_{extra_hop}"),
            audit_period_rounds: 1,
            audit_delay_rounds: 0,
        });
        if let AttackerStrategy::ForkStatic { identity_assignments, .. } = &mut spec.strategy {
            identity_assignments
                .insert(format!("anon_{extra_hop}"), MAIN_BRANCH.to_string());
        }
        let report = run_scenario(&spec).unwrap();
        assert!(report.detected, "adding {extra_hop} hid the detection");
    }
}

#[test]
fn audit_delay_postpones_detection() {
    let mut spec = fork_static_scenario(5);
    spec.challengers[0].audit_delay_rounds = 2;
    spec.rounds = 5;
    let report = run_scenario(&spec).unwrap();
    assert!(report.detected);
    assert_eq!(report.detection_round, Some(3));
}

#[test]
fn pipeline_stats_reflect_observed_traffic() {
    let spec = fork_static_scenario(1);
    let report = run_scenario(&spec).unwrap();
    let stats = &report.aggregator_stats["ix1"];
    // One client, four rounds, every response both forwarded and matched.
    assert_eq!(stats.packets, 4);
    assert_eq!(stats.sth_matches, 4);
    assert_eq!(stats.forwarded, 4);
}
