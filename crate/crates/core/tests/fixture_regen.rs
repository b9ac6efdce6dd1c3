//! Regenerates the bundled scenario files and the frozen four-probe curve
//! from the library builders:
//!
//!     cargo test -p ctgossip-core --test fixture_regen -- --ignored
//!
//! The default suite verifies that the checked-in files are in sync
//! instead of rewriting them.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ctgossip_core::coverage::{
    annotate_set, coverage_curve, load_ixp_csv, load_rib_csv, load_traceroutes, rank_pop,
    write_curve_csv, VantageFilter,
};
use ctgossip_core::sim::{
    adaptive_guess_scenario, fork_static_scenario, honest_scenario, isolated_client_scenario,
    ScenarioSpec,
};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bundled_scenarios() -> Vec<(&'static str, ScenarioSpec)> {
    vec![
        ("fork_static.json", fork_static_scenario(7)),
        ("honest.json", honest_scenario(7)),
        ("isolated_client.json", isolated_client_scenario(7)),
        ("adaptive_k4.json", adaptive_guess_scenario(4, 1, 7)),
    ]
}

fn four_probe_curve_csv() -> String {
    let dir = fixtures_dir().join("coverage/four_probe");
    let (records, _) = load_traceroutes(&dir.join("traceroutes.jsonl")).unwrap();
    let rib = load_rib_csv(&dir.join("rib.csv")).unwrap();
    let ixp = load_ixp_csv(&dir.join("ixp.csv")).unwrap();
    let targets: BTreeMap<String, u32> = [("lab".to_string(), 65099)].into();
    let set = annotate_set(&records, &rib, &ixp, &targets);
    let ranking = rank_pop(&set, VantageFilter::All, true);
    let curve = coverage_curve(&set, "pop", &ranking, 3).unwrap();
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &curve).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
#[ignore = "writes the bundled fixtures; run explicitly after builder changes"]
fn regenerate_bundled_fixtures() {
    let scenarios = fixtures_dir().join("scenarios");
    std::fs::create_dir_all(&scenarios).unwrap();
    for (name, spec) in bundled_scenarios() {
        std::fs::write(scenarios.join(name), spec.to_json() + "\n").unwrap();
    }
    std::fs::write(
        fixtures_dir().join("coverage/four_probe/expected_pop_curve.csv"),
        four_probe_curve_csv(),
    )
    .unwrap();
}

#[test]
fn bundled_fixtures_are_in_sync_with_builders() {
    let scenarios = fixtures_dir().join("scenarios");
    for (name, spec) in bundled_scenarios() {
        let on_disk = std::fs::read_to_string(scenarios.join(name))
            .unwrap_or_else(|e| panic!("missing bundled scenario {name}: {e}"));
        assert_eq!(on_disk.trim_end(), spec.to_json(), "{name} drifted");
    }
    let expected = std::fs::read_to_string(
        fixtures_dir().join("coverage/four_probe/expected_pop_curve.csv"),
    )
    .unwrap();
    assert_eq!(expected, four_probe_curve_csv());
}
