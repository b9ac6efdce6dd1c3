//! Inline match+action classification of STH-related traffic.
//!
//! The classifier walks a fixed stage DAG (link, network, transport, DNS
//! question) and decides whether a frame should be cloned to a challenger.
//! The walk is shaped only by structural properties of the packet — ether
//! type, IP version, fragmentation, protocol, port, DNS well-formedness.
//! Value checks against configured tables (known log, record type, class)
//! are performed after extraction and never change the stages visited, so
//! matched and unmatched traffic of the same shape costs the same work.
//! Every failure maps to a pass-through verdict: the forwarded packet is
//! never dropped, modified, or reordered.

mod process;

pub use process::{run_pcap, ClonedPacket, Pipeline, PipelineStats, ProcessResult};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::dns::{parse_question, DnsRejectReason, DnsSection, DnsVisits, ParseBounds};
use crate::codec::packet::{
    ethertype, parse_ipv4, parse_ipv6, parse_udp, ETHERNET_HEADER_LEN, ETHERTYPE_IPV4,
    ETHERTYPE_IPV6, PROTO_UDP, UDP_HEADER_LEN,
};
use crate::codec::{CLASS_IN, TYPE_TXT};

pub use crate::codec::dns::DnsRejectReason as DnsReject;

/// Parser stages in the classification DAG.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ethernet,
    Ipv4,
    Ipv6,
    FragmentCheck,
    Udp,
    DnsPreamble,
    DnsName,
    DnsType,
    DnsClass,
}

/// One stage visit with the byte offset it started reading at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageVisit {
    pub stage: Stage,
    pub offset: usize,
}

/// Ordered record of the stages a packet traversed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseTrace(pub Vec<StageVisit>);

impl ParseTrace {
    fn visit(&mut self, stage: Stage, offset: usize) {
        self.0.push(StageVisit { stage, offset });
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stages(&self) -> impl Iterator<Item = Stage> + '_ {
        self.0.iter().map(|v| v.stage)
    }
}

/// Why a packet passed through without being cloned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TruncatedFrame,
    NonIpEthertype,
    BadIpHeader,
    /// Fragment at or above the tiny-fragment threshold.
    LargeFragment,
    NotUdp,
    TruncatedUdp,
    NotDnsSourcePort,
    ShortRead,
    QdAnMismatch,
    LabelBoundExceeded,
    NameCompression,
    BadLabel,
    NotSthQueryName,
    UnknownLog,
    WrongQueryType,
    WrongQueryClass,
}

impl From<DnsRejectReason> for RejectReason {
    fn from(r: DnsRejectReason) -> Self {
        match r {
            DnsRejectReason::ShortRead => RejectReason::ShortRead,
            DnsRejectReason::QdAnMismatch => RejectReason::QdAnMismatch,
            DnsRejectReason::LabelBoundExceeded => RejectReason::LabelBoundExceeded,
            DnsRejectReason::NameCompression => RejectReason::NameCompression,
            DnsRejectReason::BadLabel => RejectReason::BadLabel,
            DnsRejectReason::NotSthQueryName => RejectReason::NotSthQueryName,
            DnsRejectReason::WrongQueryType => RejectReason::WrongQueryType,
            DnsRejectReason::WrongQueryClass => RejectReason::WrongQueryClass,
            DnsRejectReason::BadAnswer => RejectReason::ShortRead,
        }
    }
}

/// Classification outcome. A verdict never implies mutation or drop of the
/// forwarded packet; it only selects what gets cloned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass(RejectReason),
    CloneSth,
    CloneFragment,
}

impl Verdict {
    pub fn is_clone(&self) -> bool {
        matches!(self, Verdict::CloneSth | Verdict::CloneFragment)
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        match self {
            Verdict::Pass(r) => Some(*r),
            _ => None,
        }
    }
}

/// How clone sampling picks every n-th match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SamplingMode {
    /// Deterministic per-verdict-class counter: clone match numbers
    /// n, 2n, 3n, ...
    #[default]
    EveryNth,
    /// Independent coin per match with probability 1/n.
    Seeded { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// `<log>` labels whose STH responses are aggregated.
    pub known_logs: BTreeSet<String>,
    /// Fragments with an IP total length below this are cloned.
    pub fragment_threshold_bytes: u32,
    /// Clone every n-th match per verdict class.
    pub sampling_n: u64,
    /// Bounded clone handoff; overflow drops the clone, never the packet.
    pub clone_channel_capacity: usize,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
    #[serde(default)]
    pub parse_bounds: PipelineParseBounds,
}

/// Serde-friendly mirror of the codec parse bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineParseBounds {
    pub max_labels: usize,
}

impl Default for PipelineParseBounds {
    fn default() -> Self {
        Self { max_labels: ParseBounds::default().max_labels }
    }
}

impl PipelineConfig {
    pub fn new(known_logs: impl IntoIterator<Item = String>) -> Self {
        Self {
            known_logs: known_logs.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sampling_n == 0 {
            return Err("sampling_n must be at least 1".into());
        }
        if self.fragment_threshold_bytes == 0 {
            return Err("fragment_threshold_bytes must be positive".into());
        }
        Ok(())
    }

    fn bounds(&self) -> ParseBounds {
        ParseBounds {
            max_labels: self.parse_bounds.max_labels,
            ..ParseBounds::default()
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            known_logs: BTreeSet::new(),
            fragment_threshold_bytes: 400,
            sampling_n: 1,
            clone_channel_capacity: 1024,
            sampling_mode: SamplingMode::EveryNth,
            parse_bounds: PipelineParseBounds::default(),
        }
    }
}

fn dns_stage(section: DnsSection) -> Stage {
    match section {
        DnsSection::Preamble => Stage::DnsPreamble,
        DnsSection::Name => Stage::DnsName,
        DnsSection::Type => Stage::DnsType,
        DnsSection::Class => Stage::DnsClass,
    }
}

/// Classifies one frame. Pure function over (bytes, config).
pub fn classify(frame: &[u8], config: &PipelineConfig) -> (Verdict, ParseTrace) {
    let mut trace = ParseTrace::default();

    trace.visit(Stage::Ethernet, 0);
    let Some(ethertype) = ethertype(frame) else {
        return (Verdict::Pass(RejectReason::TruncatedFrame), trace);
    };
    let ip_bytes = &frame[ETHERNET_HEADER_LEN..];

    // Network layer: version-specific parse, then a uniform fragment check.
    let (is_fragment, ip_total_len, protocol, l4_offset) = match ethertype {
        ETHERTYPE_IPV4 => {
            trace.visit(Stage::Ipv4, ETHERNET_HEADER_LEN);
            let Some(ip) = parse_ipv4(ip_bytes) else {
                return (Verdict::Pass(RejectReason::BadIpHeader), trace);
            };
            (
                ip.is_fragment(),
                u32::from(ip.total_length),
                ip.protocol,
                ETHERNET_HEADER_LEN + ip.header_len,
            )
        }
        ETHERTYPE_IPV6 => {
            trace.visit(Stage::Ipv6, ETHERNET_HEADER_LEN);
            let Some(ip) = parse_ipv6(ip_bytes) else {
                return (Verdict::Pass(RejectReason::BadIpHeader), trace);
            };
            (
                ip.is_fragment,
                ip.total_length(),
                ip.protocol,
                ETHERNET_HEADER_LEN + ip.payload_offset,
            )
        }
        _ => return (Verdict::Pass(RejectReason::NonIpEthertype), trace),
    };

    // Fragments cannot be matched statelessly: later fragments carry no
    // transport header and an attacker may split one on purpose, so every
    // tiny fragment is cloned and nothing beyond the IP header is read.
    trace.visit(Stage::FragmentCheck, ETHERNET_HEADER_LEN);
    if is_fragment {
        if ip_total_len < config.fragment_threshold_bytes {
            return (Verdict::CloneFragment, trace);
        }
        return (Verdict::Pass(RejectReason::LargeFragment), trace);
    }

    if protocol != PROTO_UDP {
        return (Verdict::Pass(RejectReason::NotUdp), trace);
    }
    trace.visit(Stage::Udp, l4_offset);
    let Some(udp) = frame.get(l4_offset..).and_then(parse_udp) else {
        return (Verdict::Pass(RejectReason::TruncatedUdp), trace);
    };
    // Only log responses are STH-related; queries carry no tree heads.
    if udp.src_port != 53 {
        return (Verdict::Pass(RejectReason::NotDnsSourcePort), trace);
    }

    let dns_offset = l4_offset + UDP_HEADER_LEN;
    let mut visits = DnsVisits::new();
    let question = parse_question(&frame[dns_offset..], &config.bounds(), &mut visits, Some((1, 1)));
    for (section, offset) in &visits {
        trace.visit(dns_stage(*section), dns_offset + offset);
    }
    let question = match question {
        Ok(q) => q,
        Err(reject) => return (Verdict::Pass(reject.into()), trace),
    };

    // Everything below is a constant-work table lookup over extracted
    // values; the trace is already complete.
    let verdict = match question.sth_log_label() {
        None => Verdict::Pass(RejectReason::NotSthQueryName),
        Some(label) if !config.known_logs.contains(label) => {
            Verdict::Pass(RejectReason::UnknownLog)
        }
        Some(_) if question.qtype != TYPE_TXT => Verdict::Pass(RejectReason::WrongQueryType),
        Some(_) if question.qclass != CLASS_IN => Verdict::Pass(RejectReason::WrongQueryClass),
        Some(_) => Verdict::CloneSth,
    };
    (verdict, trace)
}

/// Number of stages visited for a frame; length of the classify trace.
pub fn stage_count(frame: &[u8], config: &PipelineConfig) -> usize {
    classify(frame, config).1.len()
}
