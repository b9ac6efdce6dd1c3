//! `ctgossip simulate`: run one scenario file. The last stdout line is the
//! DETECTED / NOT-DETECTED summary; the full report goes to `--report`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use ctgossip_core::sim::{run_scenario, ScenarioSpec};

use crate::config::FileConfig;

#[derive(clap::Args)]
pub struct Args {
    /// Scenario file (JSON: topology, strategy, seed).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's seed (flag beats config beats scenario).
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration file (TOML); its `seed` acts as a default override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut spec = ScenarioSpec::from_file(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    if let Some(seed) = args.seed.or(file.seed) {
        spec.seed = seed;
    }
    let report = run_scenario(&spec)?;
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for (challenger, findings) in &report.evidence {
        for finding in findings {
            eprintln!(
                "{challenger}: {:?} sizes {} / {}",
                finding.kind, finding.sth_a.tree_size, finding.sth_b.tree_size
            );
        }
    }
    println!("{}", report.summary_line());
    Ok(())
}
