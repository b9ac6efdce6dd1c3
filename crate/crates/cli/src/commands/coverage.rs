//! `ctgossip coverage`: annotate traceroutes, weight probes, and emit
//! path-length, stability, and coverage-curve tables.
//!
//! With `--out PREFIX` the outputs land in `PREFIX_path_length.csv`,
//! `PREFIX_stability.csv`, `PREFIX_curve.csv`, and `PREFIX_summary.json`;
//! without it the curve CSV goes to stdout.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ctgossip_core::coverage::{
    annotate_set, coverage_curve, load_ixp_csv, load_ranking_csv, load_rib_csv,
    load_traceroutes, path_length_distribution, rank_pop, stability_scores, write_curve_csv,
    write_path_length_csv, write_stability_csv, CoverageSummary, PathKind, VantageFilter,
};

#[derive(clap::Args)]
pub struct Args {
    /// Traceroute records (simplified JSON-lines or an Atlas-style array).
    #[arg(long)]
    traceroutes: PathBuf,
    /// Prefix-to-origin-AS table (`prefix,asn` CSV).
    #[arg(long)]
    rib: PathBuf,
    /// Peering-LAN prefix table (`prefix,ixp_id,name` CSV).
    #[arg(long)]
    ixp: PathBuf,
    /// Ranking: `pop` (traversal popularity) or a CSV of vantages.
    #[arg(long, default_value = "pop")]
    ranking: String,
    /// Curve length.
    #[arg(long, default_value_t = 32)]
    k_max: usize,
    /// Map a target label to its AS number, e.g. `google=15169`
    /// (repeatable). Unlisted targets fall back to inference.
    #[arg(long = "target-asn")]
    target_asns: Vec<String>,
    /// Rank by raw traversal counts instead of probe weight.
    #[arg(long)]
    raw_counts: bool,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let mut targets: BTreeMap<String, u32> = BTreeMap::new();
    for entry in &args.target_asns {
        let Some((label, asn)) = entry.split_once('=') else {
            bail!("--target-asn wants LABEL=ASN, got {entry:?}");
        };
        targets.insert(label.to_string(), asn.parse().context("parsing target ASN")?);
    }

    let (records, stats) = load_traceroutes(&args.traceroutes)?;
    let rib = load_rib_csv(&args.rib)?;
    let ixp = load_ixp_csv(&args.ixp)?;
    let set = annotate_set(&records, &rib, &ixp, &targets);
    if set.probes.is_empty() {
        bail!("no successful traceroutes in {}", args.traceroutes.display());
    }

    let (ranking_name, ranking) = if args.ranking == "pop" {
        ("pop".to_string(), rank_pop(&set, VantageFilter::All, !args.raw_counts))
    } else {
        let path = PathBuf::from(&args.ranking);
        ("external".to_string(), load_ranking_csv(&path)?)
    };
    let curve = coverage_curve(&set, &ranking_name, &ranking, args.k_max)?;
    if curve.truncated {
        eprintln!(
            "warning: k_max {} exceeds ranking length {}, curve truncated",
            args.k_max,
            ranking.len()
        );
    }

    let summary = CoverageSummary::new(&set, &stats);
    match &args.out {
        Some(prefix) => {
            let prefix = prefix.display();
            let mut buf = Vec::new();
            write_path_length_csv(&mut buf, PathKind::As, &path_length_distribution(&set, PathKind::As)?)?;
            let as_len = buf.len();
            write_path_length_csv(&mut buf, PathKind::Ixp, &path_length_distribution(&set, PathKind::Ixp)?)?;
            // The second table re-prints the header; strip it for one file.
            let combined = {
                let (first, second) = buf.split_at(as_len);
                let second_text = std::str::from_utf8(second).expect("csv is utf8");
                let stripped = second_text.split_once('\n').map_or("", |x| x.1);
                format!("{}{}", std::str::from_utf8(first).expect("csv is utf8"), stripped)
            };
            std::fs::write(format!("{prefix}_path_length.csv"), combined)?;

            let mut buf = Vec::new();
            write_stability_csv(&mut buf, &stability_scores(&set))?;
            std::fs::write(format!("{prefix}_stability.csv"), buf)?;

            let mut buf = Vec::new();
            write_curve_csv(&mut buf, &curve)?;
            std::fs::write(format!("{prefix}_curve.csv"), buf)?;

            std::fs::write(
                format!("{prefix}_summary.json"),
                serde_json::to_string_pretty(&summary)? + "\n",
            )?;
            eprintln!("wrote {prefix}_{{path_length,stability,curve}}.csv and {prefix}_summary.json");
        }
        None => {
            let mut buf = Vec::new();
            write_curve_csv(&mut buf, &curve)?;
            print!("{}", String::from_utf8(buf).expect("csv is utf8"));
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
    }
    Ok(())
}
