//! `ctgossip challenge`: ingest a clones pcap into a journal-backed store
//! and audit.
//!
//! Consistency proofs need an off-path view of the log. With `--log-state`
//! the imported log answers proof requests locally; without one the audit
//! is store-only (equal-size conflicts still surface, adjacent-pair proofs
//! are skipped and reported as an incomplete audit).

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use ctgossip_core::challenger::{
    Challenger, LogDescriptor, OffPathChannel, ProofResponse, TransportError,
};
use ctgossip_core::merkle::{Log, LogId, SignedTreeHead};
use ctgossip_core::sim::SimOffPathChannel;

use crate::config::FileConfig;

#[derive(clap::Args)]
pub struct Args {
    /// Cloned packets to ingest (pcap).
    #[arg(long)]
    clones: PathBuf,
    /// Append-only JSON-lines store journal.
    #[arg(long)]
    journal: PathBuf,
    /// Where to write the report JSON (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Configuration file (TOML) carrying log public keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exported log state file used to answer proof requests (repeatable).
    #[arg(long = "log-state")]
    log_states: Vec<PathBuf>,
    /// Identity class presented on the local off-path channel.
    #[arg(long, default_value = "anonymous")]
    off_path_identity: String,
    /// Normalize wall-clock timestamps in the report.
    #[arg(long)]
    deterministic: bool,
}

/// Off-path stand-in when no log state is available: fetches fail, so
/// only store-resident checks run.
struct NoChannel;

impl OffPathChannel for NoChannel {
    fn fetch_sth(&mut self, _log: &LogId) -> Result<SignedTreeHead, TransportError> {
        Err(TransportError { retryable: false, message: "no off-path configured".into() })
    }

    fn consistency(
        &mut self,
        _log: &LogId,
        _old: u64,
        _new: u64,
    ) -> Result<ProofResponse, TransportError> {
        Err(TransportError { retryable: false, message: "no off-path configured".into() })
    }
}

pub fn run(args: Args) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;

    let mut logs: Vec<Log> = Vec::new();
    for path in &args.log_states {
        let reader = std::io::BufReader::new(
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
        );
        let log =
            Log::import(reader).with_context(|| format!("importing {}", path.display()))?;
        logs.push(log);
    }
    let extra: Vec<LogDescriptor> = logs
        .iter()
        .map(|log| LogDescriptor { log_id: log.id().clone(), public_key: log.public_key() })
        .collect();

    let config = file.challenger_config(extra)?;
    let mut challenger = Challenger::with_journal(config, &args.journal)
        .with_context(|| format!("opening journal {}", args.journal.display()))?;

    let accepted = challenger
        .ingest_pcap(&args.clones)
        .with_context(|| format!("reading clones {}", args.clones.display()))?;
    eprintln!("ingested {} tree heads from {}", accepted, args.clones.display());

    let now = if args.deterministic {
        0
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_millis() as u64
    };

    let mut evidence = Vec::new();
    let names: Vec<String> =
        challenger.known_logs().map(|d| d.log_id.name.clone()).collect();
    for name in names {
        let local = logs.iter().find(|log| log.name() == name);
        match local {
            Some(log) => {
                let mut channel = SimOffPathChannel::new(log, &args.off_path_identity);
                let _ = challenger.fetch_off_path(&mut channel, &name, now);
                let outcome = challenger.audit(&mut channel, &name, now, None);
                evidence.extend(outcome.evidence);
            }
            None => {
                let mut channel = NoChannel;
                let outcome = challenger.audit(&mut channel, &name, now, None);
                if !outcome.completed {
                    eprintln!(
                        "log {name:?}: store-only audit (no --log-state to answer proofs)"
                    );
                }
                evidence.extend(outcome.evidence);
            }
        }
    }

    let findings = evidence.len();
    let report = challenger.report(evidence, now);
    let json = report.to_json();
    match &args.report {
        Some(path) => std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    eprintln!("audit complete: {findings} finding(s)");
    Ok(())
}
