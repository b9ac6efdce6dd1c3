//! `ctgossip aggregate`: pass a pcap through the inline pipeline. The
//! output pcap is the input, unmodified and in order; sampled clones land
//! in a second pcap; the stats document summarizes verdicts.

use std::path::PathBuf;

use anyhow::{Context, Result};
use ctgossip_core::pipeline::run_pcap;

use crate::config::FileConfig;

#[derive(clap::Args)]
pub struct Args {
    /// Input capture to process.
    #[arg(long)]
    pcap: PathBuf,
    /// Forwarded stream (byte-identical to the input).
    #[arg(long)]
    out: PathBuf,
    /// Sampled clones destined for a challenger.
    #[arg(long)]
    clones: PathBuf,
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Add a log label to the known-log table (repeatable).
    #[arg(long = "known-log")]
    known_logs: Vec<String>,
    /// Clone every n-th match.
    #[arg(long)]
    sampling_n: Option<u64>,
    /// Clone fragments with an IP total length below this many bytes.
    #[arg(long)]
    fragment_threshold: Option<u32>,
    /// Where to write the stats JSON (stdout when omitted).
    #[arg(long)]
    stats: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let config =
        file.pipeline_config(&args.known_logs, args.sampling_n, args.fragment_threshold)?;
    let stats = run_pcap(&args.pcap, &args.out, &args.clones, config)
        .with_context(|| format!("processing {}", args.pcap.display()))?;
    let stats_json = serde_json::to_string_pretty(&stats)?;
    match &args.stats {
        Some(path) => std::fs::write(path, stats_json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{stats_json}"),
    }
    eprintln!(
        "processed {} packets: {} sth matches, {} fragment matches, {} clones",
        stats.packets, stats.sth_matches, stats.fragment_matches, stats.clones_emitted
    );
    Ok(())
}
