//! Dataset loading and plot-ready output.
//!
//! Traceroutes load from either the simplified JSON-lines fixture schema
//! (one record object per line) or the subset of the RIPE Atlas result
//! schema this analysis needs (an array of objects with `prb_id`,
//! `timestamp`, and per-hop `result` replies; the first reply per hop
//! counts, `x` entries are holes). Atlas exports carry no probe AS, so an
//! optional `probe_asn` field is honored and absent ones map to AS 0.
//!
//! RIB and IXP tables are `prefix,asn` and `prefix,ixp_id,name` CSV;
//! rankings are one vantage per line (`AS123`, `IXP7`, or a bare AS
//! number). `#` comments and header lines are skipped.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::lpm::Prefix;
use super::{
    AnnotatedSet, CoverageCurve, CoverageError, IxpTable, PathKind, RibTable, TracerouteRecord,
    Vantage,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub parsed: u64,
    pub skipped: u64,
    pub failed: u64,
}

fn io_err(path: &Path, source: std::io::Error) -> CoverageError {
    CoverageError::Io { path: path.display().to_string(), source }
}

fn format_err(
    what: &'static str,
    path: &Path,
    line: usize,
    detail: impl ToString,
) -> CoverageError {
    CoverageError::Format {
        what,
        path: path.display().to_string(),
        line,
        detail: detail.to_string(),
    }
}

/// Loads traceroute records, auto-detecting the two supported schemas.
pub fn load_traceroutes(
    path: &Path,
) -> Result<(Vec<TracerouteRecord>, LoadStats), CoverageError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        load_atlas_array(path, trimmed)
    } else {
        load_json_lines(path, &text)
    }
}

fn load_json_lines(
    path: &Path,
    text: &str,
) -> Result<(Vec<TracerouteRecord>, LoadStats), CoverageError> {
    let mut records = Vec::new();
    let mut stats = LoadStats::default();
    let mut any_valid = false;
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TracerouteRecord>(line) {
            Ok(record) => {
                any_valid = true;
                stats.parsed += 1;
                if record.is_failed() {
                    stats.failed += 1;
                }
                records.push(record);
            }
            Err(e) => {
                if !any_valid && index > 4 {
                    return Err(format_err("traceroute file", path, index + 1, e));
                }
                stats.skipped += 1;
            }
        }
    }
    if !any_valid && stats.skipped > 0 {
        return Err(format_err(
            "traceroute file",
            path,
            1,
            "no parseable records",
        ));
    }
    Ok((records, stats))
}

fn load_atlas_array(
    path: &Path,
    text: &str,
) -> Result<(Vec<TracerouteRecord>, LoadStats), CoverageError> {
    let rows: Vec<Value> =
        serde_json::from_str(text).map_err(|e| format_err("atlas export", path, 1, e))?;
    let mut stats = LoadStats::default();

    // Day indices are relative to the earliest measurement in the file.
    let first_ts = rows
        .iter()
        .filter_map(|r| r.get("timestamp").and_then(Value::as_u64))
        .min()
        .unwrap_or(0);

    let mut records = Vec::new();
    for row in &rows {
        let Some(probe_id) = row.get("prb_id").and_then(Value::as_u64) else {
            stats.skipped += 1;
            continue;
        };
        let timestamp = row.get("timestamp").and_then(Value::as_u64).unwrap_or(first_ts);
        let target = row
            .get("dst_name")
            .or_else(|| row.get("dst_addr"))
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_string();
        let probe_asn = row.get("probe_asn").and_then(Value::as_u64).unwrap_or(0) as u32;

        let mut hops: Vec<Option<Ipv4Addr>> = Vec::new();
        if let Some(hop_rows) = row.get("result").and_then(Value::as_array) {
            for hop_row in hop_rows {
                let reply = hop_row
                    .get("result")
                    .and_then(Value::as_array)
                    .and_then(|replies| {
                        replies.iter().find_map(|r| {
                            r.get("from").and_then(Value::as_str).and_then(|s| s.parse().ok())
                        })
                    });
                hops.push(reply);
            }
        }
        let record = TracerouteRecord {
            probe_id,
            probe_asn,
            target,
            day: ((timestamp - first_ts) / 86_400) as u32,
            hops,
        };
        stats.parsed += 1;
        if record.is_failed() {
            stats.failed += 1;
        }
        records.push(record);
    }
    Ok((records, stats))
}

fn csv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>, CoverageError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, line)| {
            let t = line.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, line)| (i + 1, line.split(',').map(|f| f.trim().to_string()).collect()))
        .collect())
}

/// `prefix,asn` rows into a longest-prefix table.
pub fn load_rib_csv(path: &Path) -> Result<RibTable, CoverageError> {
    let mut table = RibTable::new();
    for (line, fields) in csv_rows(path)? {
        if line == 1 && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("prefix")) {
            continue;
        }
        if fields.len() < 2 {
            return Err(format_err("rib csv", path, line, "expected prefix,asn"));
        }
        let prefix: Prefix = fields[0]
            .parse()
            .map_err(|e| format_err("rib csv", path, line, e))?;
        let asn: u32 = fields[1]
            .parse()
            .map_err(|e| format_err("rib csv", path, line, e))?;
        table.insert(prefix, asn);
    }
    Ok(table)
}

/// `prefix,ixp_id,name` rows into a longest-prefix table.
pub fn load_ixp_csv(path: &Path) -> Result<IxpTable, CoverageError> {
    let mut table = IxpTable::new();
    for (line, fields) in csv_rows(path)? {
        if line == 1 && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("prefix")) {
            continue;
        }
        if fields.len() < 2 {
            return Err(format_err("ixp csv", path, line, "expected prefix,ixp_id[,name]"));
        }
        let prefix: Prefix = fields[0]
            .parse()
            .map_err(|e| format_err("ixp csv", path, line, e))?;
        let id: u32 = fields[1]
            .parse()
            .map_err(|e| format_err("ixp csv", path, line, e))?;
        let name = fields.get(2).cloned().unwrap_or_default();
        table.insert(prefix, (id, name));
    }
    Ok(table)
}

/// One vantage per line (first CSV column): `AS123`, `IXP7`, or bare AS.
pub fn load_ranking_csv(path: &Path) -> Result<Vec<Vantage>, CoverageError> {
    let mut ranking = Vec::new();
    for (line, fields) in csv_rows(path)? {
        let field = &fields[0];
        if line == 1 && field.eq_ignore_ascii_case("vantage") {
            continue;
        }
        let vantage: Vantage = field
            .parse()
            .map_err(|e| format_err("ranking csv", path, line, e))?;
        ranking.push(vantage);
    }
    Ok(ranking)
}

pub fn write_path_length_csv<W: Write>(
    mut w: W,
    kind: PathKind,
    histogram: &BTreeMap<usize, f64>,
) -> std::io::Result<()> {
    writeln!(w, "kind,length,fraction")?;
    let kind = match kind {
        PathKind::As => "as",
        PathKind::Ixp => "ixp",
    };
    for (length, fraction) in histogram {
        writeln!(w, "{kind},{length},{fraction:.6}")?;
    }
    Ok(())
}

pub fn write_stability_csv<W: Write>(
    mut w: W,
    scores: &BTreeMap<u64, f64>,
) -> std::io::Result<()> {
    writeln!(w, "probe_id,stability")?;
    for (probe, score) in scores {
        writeln!(w, "{probe},{score:.6}")?;
    }
    Ok(())
}

pub fn write_curve_csv<W: Write>(mut w: W, curve: &CoverageCurve) -> std::io::Result<()> {
    writeln!(w, "ranking,k,coverage")?;
    for (k, fraction) in &curve.points {
        writeln!(w, "{},{k},{fraction:.6}", curve.ranking)?;
    }
    Ok(())
}

/// The JSON summary document emitted next to the CSV outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub records: u64,
    pub failed_records: u64,
    pub skipped_rows: u64,
    pub probes: u64,
    pub total_weight: u64,
    pub unmapped_hops: u64,
}

impl CoverageSummary {
    pub fn new(set: &AnnotatedSet, stats: &LoadStats) -> Self {
        Self {
            records: stats.parsed,
            failed_records: set.failed_records,
            skipped_rows: stats.skipped,
            probes: set.probes.len() as u64,
            total_weight: set.total_weight(),
            unmapped_hops: set.unmapped_hops,
        }
    }
}
