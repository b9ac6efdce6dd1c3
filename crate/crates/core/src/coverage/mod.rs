//! Deployment-impact analysis over traceroute measurements: map hops to
//! the ASes and IXPs that could aggregate, weight probes by the IPv4 space
//! of their AS, and compute path-length distributions, day-to-day path
//! stability, and coverage as a function of aggregation opt-in.

mod io;
mod lpm;

pub use io::{
    load_ixp_csv, load_ranking_csv, load_rib_csv, load_traceroutes, write_curve_csv,
    write_path_length_csv, write_stability_csv, CoverageSummary, LoadStats,
};
pub use lpm::{Prefix, PrefixTable};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CoverageError {
    #[error("empty annotated set")]
    EmptySet,
    #[error("total probe weight is zero")]
    ZeroWeight,
    #[error("ranking {0:?} is empty")]
    EmptyRanking(String),
    #[error("could not read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad {what} at {path}:{line}: {detail}")]
    Format { what: &'static str, path: String, line: usize, detail: String },
}

/// A point on a path where aggregation could be deployed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vantage {
    As(u32),
    Ixp(u32),
}

impl fmt::Display for Vantage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vantage::As(n) => write!(f, "AS{n}"),
            Vantage::Ixp(n) => write!(f, "IXP{n}"),
        }
    }
}

impl FromStr for Vantage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(n) = t.strip_prefix("AS").or_else(|| t.strip_prefix("as")) {
            return n.parse().map(Vantage::As).map_err(|e| e.to_string());
        }
        if let Some(n) = t.strip_prefix("IXP").or_else(|| t.strip_prefix("ixp")) {
            return n.parse().map(Vantage::Ixp).map_err(|e| e.to_string());
        }
        // Bare numbers are AS numbers.
        t.parse().map(Vantage::As).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    As,
    Ixp,
}

/// One traceroute: a probe, a day, and the replying hop addresses
/// (missing replies stay as holes).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracerouteRecord {
    pub probe_id: u64,
    pub probe_asn: u32,
    pub target: String,
    pub day: u32,
    pub hops: Vec<Option<Ipv4Addr>>,
}

impl TracerouteRecord {
    /// A measurement with no replying hops is failed and leaves every
    /// denominator.
    pub fn is_failed(&self) -> bool {
        self.hops.iter().all(Option::is_none)
    }
}

/// Prefix-to-origin-AS table.
pub type RibTable = PrefixTable<u32>;
/// Prefix-to-IXP table (identifier and name).
pub type IxpTable = PrefixTable<(u32, String)>;

/// The vantage points a traceroute traversed, in order, deduplicated of
/// consecutive repeats, with the probe's own AS and the trailing target-AS
/// run removed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedPath {
    pub vantages: Vec<Vantage>,
    pub unmapped_hops: usize,
}

impl AnnotatedPath {
    pub fn length(&self, kind: PathKind) -> usize {
        self.vantages
            .iter()
            .filter(|v| match kind {
                PathKind::As => matches!(v, Vantage::As(_)),
                PathKind::Ixp => matches!(v, Vantage::Ixp(_)),
            })
            .count()
    }

    pub fn vantage_set(&self) -> BTreeSet<Vantage> {
        self.vantages.iter().copied().collect()
    }
}

/// Maps one traceroute to vantage points. IXP membership is checked before
/// AS origin because peering-LAN prefixes are also announced from within
/// ASes and the IXP is the more specific fact. When `target_asn` is absent
/// it is inferred from the last mapped AS hop.
pub fn annotate(
    record: &TracerouteRecord,
    rib: &RibTable,
    ixp: &IxpTable,
    target_asn: Option<u32>,
) -> AnnotatedPath {
    let mut mapped: Vec<Vantage> = Vec::new();
    let mut unmapped = 0usize;
    for hop in record.hops.iter().flatten() {
        let addr = u32::from(*hop);
        if let Some((_, (id, _))) = ixp.lookup(addr) {
            mapped.push(Vantage::Ixp(*id));
        } else if let Some((_, asn)) = rib.lookup(addr) {
            mapped.push(Vantage::As(*asn));
        } else {
            unmapped += 1;
        }
    }

    let target = target_asn.or_else(|| {
        mapped.iter().rev().find_map(|v| match v {
            Vantage::As(n) => Some(*n),
            Vantage::Ixp(_) => None,
        })
    });

    // Hops inside the probe's own AS never count as on-path vantages.
    mapped.retain(|v| *v != Vantage::As(record.probe_asn));
    // Collapse consecutive repeats, then drop the trailing run inside the
    // target's AS: the path is what is traversed before reaching it.
    let mut vantages: Vec<Vantage> = Vec::with_capacity(mapped.len());
    for v in mapped {
        if vantages.last() != Some(&v) {
            vantages.push(v);
        }
    }
    if let Some(target) = target {
        while vantages.last() == Some(&Vantage::As(target)) {
            vantages.pop();
        }
    }
    AnnotatedPath { vantages, unmapped_hops: unmapped }
}

/// Number of IPv4 addresses the RIB originates from `asn`, deduplicated by
/// address across overlapping prefixes.
pub fn as_ipv4_space(rib: &RibTable, asn: u32) -> u64 {
    let mut ranges: Vec<(u64, u64)> = rib
        .iter()
        .filter(|(_, origin)| **origin == asn)
        .map(|(prefix, _)| {
            let start = u64::from(prefix.network);
            (start, start + prefix.address_count())
        })
        .collect();
    ranges.sort_unstable();
    let mut total = 0u64;
    let mut covered_to = 0u64;
    for (start, end) in ranges {
        let start = start.max(covered_to);
        if end > start {
            total += end - start;
            covered_to = end;
        }
        covered_to = covered_to.max(end);
    }
    total
}

/// One probe's annotated measurements across the window, plus its weight.
#[derive(Clone, Debug)]
pub struct ProbeView {
    pub probe_id: u64,
    pub probe_asn: u32,
    pub weight: u64,
    /// Successful days only.
    pub days: BTreeMap<u32, AnnotatedPath>,
}

impl ProbeView {
    /// Vantage points traversed on any successful day.
    pub fn vantage_set(&self) -> BTreeSet<Vantage> {
        self.days.values().flat_map(|p| p.vantage_set()).collect()
    }

    /// The earliest successful day's path, the probe's representative for
    /// per-path statistics.
    pub fn representative(&self) -> Option<&AnnotatedPath> {
        self.days.values().next()
    }
}

/// A full annotated measurement set.
#[derive(Clone, Debug, Default)]
pub struct AnnotatedSet {
    pub probes: Vec<ProbeView>,
    pub failed_records: u64,
    pub unmapped_hops: u64,
}

impl AnnotatedSet {
    pub fn total_weight(&self) -> u64 {
        self.probes.iter().map(|p| p.weight).sum()
    }
}

/// Annotates and weights every record. `targets` maps target labels to
/// their AS number where known; other targets fall back to inference.
pub fn annotate_set(
    records: &[TracerouteRecord],
    rib: &RibTable,
    ixp: &IxpTable,
    targets: &BTreeMap<String, u32>,
) -> AnnotatedSet {
    let mut probes: BTreeMap<u64, ProbeView> = BTreeMap::new();
    let mut failed = 0u64;
    let mut unmapped = 0u64;
    for record in records {
        if record.is_failed() {
            failed += 1;
            continue;
        }
        let path = annotate(record, rib, ixp, targets.get(&record.target).copied());
        unmapped += path.unmapped_hops as u64;
        let view = probes.entry(record.probe_id).or_insert_with(|| ProbeView {
            probe_id: record.probe_id,
            probe_asn: record.probe_asn,
            weight: as_ipv4_space(rib, record.probe_asn),
            days: BTreeMap::new(),
        });
        view.days.insert(record.day, path);
    }
    AnnotatedSet {
        probes: probes.into_values().collect(),
        failed_records: failed,
        unmapped_hops: unmapped,
    }
}

/// Weighted distribution of per-probe path lengths; fractions sum to one.
pub fn path_length_distribution(
    set: &AnnotatedSet,
    kind: PathKind,
) -> Result<BTreeMap<usize, f64>, CoverageError> {
    if set.probes.is_empty() {
        return Err(CoverageError::EmptySet);
    }
    let total = set.total_weight();
    if total == 0 {
        return Err(CoverageError::ZeroWeight);
    }
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    for probe in &set.probes {
        if let Some(path) = probe.representative() {
            *histogram.entry(path.length(kind)).or_insert(0) += probe.weight;
        }
    }
    Ok(histogram
        .into_iter()
        .map(|(len, weight)| (len, weight as f64 / total as f64))
        .collect())
}

/// Fraction of consecutive-day pairs whose vantage sets are identical;
/// `None` below two successful days.
pub fn path_stability(days: &BTreeMap<u32, AnnotatedPath>) -> Option<f64> {
    if days.len() < 2 {
        return None;
    }
    let mut pairs = 0u32;
    let mut stable = 0u32;
    for (day, path) in days {
        if let Some(next) = days.get(&(day + 1)) {
            pairs += 1;
            if path.vantage_set() == next.vantage_set() {
                stable += 1;
            }
        }
    }
    if pairs == 0 {
        return None;
    }
    Some(f64::from(stable) / f64::from(pairs))
}

/// Stability score per probe that has at least two successful days.
pub fn stability_scores(set: &AnnotatedSet) -> BTreeMap<u64, f64> {
    set.probes
        .iter()
        .filter_map(|p| path_stability(&p.days).map(|s| (p.probe_id, s)))
        .collect()
}

/// Fraction of probe weight whose path traverses at least one member of
/// `aggregators`. Failed probes are already out of the set.
pub fn coverage(set: &AnnotatedSet, aggregators: &BTreeSet<Vantage>) -> f64 {
    let total = set.total_weight();
    if total == 0 {
        return 0.0;
    }
    let covered: u64 = set
        .probes
        .iter()
        .filter(|p| !p.vantage_set().is_disjoint(aggregators))
        .map(|p| p.weight)
        .sum();
    covered as f64 / total as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VantageFilter {
    All,
    AsOnly,
    IxpOnly,
}

impl VantageFilter {
    fn admits(self, v: &Vantage) -> bool {
        match self {
            VantageFilter::All => true,
            VantageFilter::AsOnly => matches!(v, Vantage::As(_)),
            VantageFilter::IxpOnly => matches!(v, Vantage::Ixp(_)),
        }
    }
}

/// Vantage points by descending traversal popularity: the summed weight of
/// probes traversing each point (or the raw probe count when `weighted` is
/// false), ties broken by identifier. Frequency-ranked, not set-cover
/// optimal.
pub fn rank_pop(set: &AnnotatedSet, filter: VantageFilter, weighted: bool) -> Vec<Vantage> {
    let mut scores: BTreeMap<Vantage, u64> = BTreeMap::new();
    for probe in &set.probes {
        for vantage in probe.vantage_set() {
            if filter.admits(&vantage) {
                *scores.entry(vantage).or_insert(0) +=
                    if weighted { probe.weight } else { 1 };
            }
        }
    }
    let mut ranked: Vec<(Vantage, u64)> = scores.into_iter().collect();
    // Descending by score; the BTreeMap ordering provides the identifier
    // tiebreak for equal scores.
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(v, _)| v).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub ranking: String,
    /// (top-k, covered weight fraction), k = 0..=k_max.
    pub points: Vec<(usize, f64)>,
    /// Set when k_max exceeded the ranking length.
    pub truncated: bool,
}

/// Coverage of the top-k prefix of `ranking` for every k up to `k_max`.
pub fn coverage_curve(
    set: &AnnotatedSet,
    ranking_name: &str,
    ranking: &[Vantage],
    k_max: usize,
) -> Result<CoverageCurve, CoverageError> {
    if ranking.is_empty() {
        return Err(CoverageError::EmptyRanking(ranking_name.to_string()));
    }
    let k_top = k_max.min(ranking.len());
    let mut points = Vec::with_capacity(k_top + 1);
    let mut selected: BTreeSet<Vantage> = BTreeSet::new();
    points.push((0, 0.0));
    for (k, vantage) in ranking.iter().take(k_top).enumerate() {
        selected.insert(*vantage);
        points.push((k + 1, coverage(set, &selected)));
    }
    Ok(CoverageCurve {
        ranking: ranking_name.to_string(),
        points,
        truncated: k_max > ranking.len(),
    })
}
