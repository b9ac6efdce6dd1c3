//! The off-path verifier: ingests cloned frames, reassembles fragments,
//! decodes and deduplicates tree heads, fetches its own view of each log
//! over an off-path channel, and audits consistency.
//!
//! The challenger never contacts its aggregators — clones arrive over a
//! one-way channel — and fails open against junk input: anything
//! undecodable bumps a counter and is forgotten.

mod audit;
mod reassembly;
mod report;
mod store;

pub use audit::{
    audit_entries, AuditCursor, AuditOutcome, Evidence, EvidenceKind, OffPathChannel,
    ProofResponse, TransportError,
};
pub use reassembly::{FragmentKey, ReassemblyBuffers, ReassemblyConfig};
pub use report::{verify_report, Report, ReportVerifyError, REPORT_FORMAT_VERSION};
pub use store::{IngestOutcome, SthSource, SthStore, StoredSth};

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::dns::parse_dns_message;
use crate::codec::packet::{
    ethertype, parse_ipv4, parse_ipv6, parse_udp, ETHERNET_HEADER_LEN, ETHERTYPE_IPV4,
    ETHERTYPE_IPV6, UDP_HEADER_LEN,
};
use crate::codec::sth_txt::decode_sth_txt;
use crate::merkle::{LogId, LogPublicKey, SignedTreeHead, TimestampMs};
use crate::pcap::read_pcap;

/// A log the challenger knows how to verify.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogDescriptor {
    pub log_id: LogId,
    pub public_key: LogPublicKey,
}

#[derive(Clone, Debug)]
pub struct ChallengerConfig {
    pub logs: Vec<LogDescriptor>,
    pub reassembly: ReassemblyConfig,
    /// Distinct tree heads per log expected inside one frequency window;
    /// more than this trips the anomaly counter.
    pub expected_sth_frequency: u32,
    pub frequency_window_ms: u64,
}

impl ChallengerConfig {
    pub fn new(logs: Vec<LogDescriptor>) -> Self {
        Self {
            logs,
            reassembly: ReassemblyConfig::default(),
            expected_sth_frequency: crate::merkle::DEFAULT_STH_FREQUENCY,
            frequency_window_ms: crate::merkle::DEFAULT_MMD_MS,
        }
    }
}

/// Ingestion and audit counters; serialized into reports.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengerCounters {
    pub clones_ingested: u64,
    pub stored_new: u64,
    pub stored_duplicate: u64,
    pub undecodable: u64,
    pub unknown_log: u64,
    pub quarantined: u64,
    pub fragments_buffered: u64,
    pub reassembled: u64,
    pub reassembly_timeouts: u64,
    pub reassembly_evictions: u64,
    pub frequency_anomalies: u64,
    pub audits_run: u64,
    pub proof_requests: u64,
}

pub struct Challenger {
    config: ChallengerConfig,
    by_name: BTreeMap<String, LogDescriptor>,
    store: SthStore,
    reassembly: ReassemblyBuffers,
    quarantine: Vec<SignedTreeHead>,
    counters: ChallengerCounters,
}

impl Challenger {
    pub fn new(config: ChallengerConfig) -> Self {
        let by_name = config
            .logs
            .iter()
            .map(|d| (d.log_id.name.clone(), d.clone()))
            .collect();
        let reassembly = ReassemblyBuffers::new(config.reassembly);
        Self {
            config,
            by_name,
            store: SthStore::new(),
            reassembly,
            quarantine: Vec::new(),
            counters: ChallengerCounters::default(),
        }
    }

    /// Like [`Challenger::new`], persisting the store to a JSON-lines
    /// journal (loaded first when it already exists).
    pub fn with_journal(config: ChallengerConfig, journal: &Path) -> io::Result<Self> {
        let mut challenger = Self::new(config);
        challenger.store = SthStore::with_journal(journal)?;
        Ok(challenger)
    }

    pub fn store(&self) -> &SthStore {
        &self.store
    }

    pub fn counters(&self) -> ChallengerCounters {
        let mut counters = self.counters.clone();
        counters.reassembly_timeouts = self.reassembly.timeouts;
        counters.reassembly_evictions = self.reassembly.evictions;
        counters
    }

    pub fn quarantined(&self) -> &[SignedTreeHead] {
        &self.quarantine
    }

    pub fn descriptor(&self, log_name: &str) -> Option<&LogDescriptor> {
        self.by_name.get(log_name)
    }

    pub fn known_logs(&self) -> impl Iterator<Item = &LogDescriptor> {
        self.config.logs.iter()
    }

    /// Ingests one cloned frame. Complete datagrams are decoded directly;
    /// fragments go through reassembly and may complete a datagram now.
    /// Returns the decoded tree head when one was accepted.
    pub fn ingest_clone(&mut self, frame: &[u8], now: TimestampMs) -> Option<SignedTreeHead> {
        self.counters.clones_ingested += 1;
        self.reassembly.expire(now);

        let ip_bytes = frame.get(ETHERNET_HEADER_LEN..)?;
        let datagram: Vec<u8> = match ethertype(frame) {
            Some(ETHERTYPE_IPV4) => {
                let Some(ip) = parse_ipv4(ip_bytes) else {
                    self.counters.undecodable += 1;
                    return None;
                };
                let end = usize::from(ip.total_length).min(ip_bytes.len());
                let payload = &ip_bytes[ip.header_len.min(end)..end];
                if ip.is_fragment() {
                    self.counters.fragments_buffered += 1;
                    let key = FragmentKey::v4(ip.src, ip.dst, ip.identification);
                    let complete = self.reassembly.push(
                        key,
                        ip.fragment_offset_bytes,
                        payload,
                        ip.more_fragments,
                        now,
                    )?;
                    self.counters.reassembled += 1;
                    complete
                } else {
                    payload.to_vec()
                }
            }
            Some(ETHERTYPE_IPV6) => {
                let Some(ip) = parse_ipv6(ip_bytes) else {
                    self.counters.undecodable += 1;
                    return None;
                };
                let payload = &ip_bytes[ip.payload_offset.min(ip_bytes.len())..];
                if ip.is_fragment {
                    self.counters.fragments_buffered += 1;
                    let src = ip_bytes[8..24].try_into().unwrap();
                    let dst = ip_bytes[24..40].try_into().unwrap();
                    let key = FragmentKey::v6(src, dst, ip.identification);
                    let complete = self.reassembly.push(
                        key,
                        ip.fragment_offset_bytes,
                        payload,
                        ip.more_fragments,
                        now,
                    )?;
                    self.counters.reassembled += 1;
                    complete
                } else {
                    payload.to_vec()
                }
            }
            _ => {
                self.counters.undecodable += 1;
                return None;
            }
        };
        self.ingest_datagram(&datagram, now)
    }

    /// Decodes a UDP datagram (header included) into a tree head and
    /// stores it.
    fn ingest_datagram(&mut self, datagram: &[u8], now: TimestampMs) -> Option<SignedTreeHead> {
        let Some(udp) = parse_udp(datagram) else {
            self.counters.undecodable += 1;
            return None;
        };
        if udp.src_port != 53 {
            self.counters.undecodable += 1;
            return None;
        }
        let message = match parse_dns_message(&datagram[UDP_HEADER_LEN..]) {
            Ok(m) => m,
            Err(_) => {
                self.counters.undecodable += 1;
                return None;
            }
        };
        let Some(descriptor) = self.by_name.get(&message.log_label).cloned() else {
            self.counters.unknown_log += 1;
            return None;
        };
        let txt = match decode_sth_txt(&message.txt_payload) {
            Ok(t) => t,
            Err(_) => {
                self.counters.undecodable += 1;
                return None;
            }
        };
        let sth = txt.into_sth(descriptor.log_id.clone());
        self.accept(sth, &descriptor, SthSource::Aggregated, now)
    }

    /// Signature gate plus dedup bookkeeping shared by both sources.
    fn accept(
        &mut self,
        sth: SignedTreeHead,
        descriptor: &LogDescriptor,
        source: SthSource,
        now: TimestampMs,
    ) -> Option<SignedTreeHead> {
        if !sth.verify(&descriptor.public_key) {
            // Unverifiable tree heads may be an attacker probing with
            // junk; keep them out of the store but on the record.
            self.counters.quarantined += 1;
            self.quarantine.push(sth);
            return None;
        }
        match self.store.ingest(sth.clone(), source, now) {
            IngestOutcome::New => {
                self.counters.stored_new += 1;
                let distinct = self.store.distinct_in_window(
                    &descriptor.log_id,
                    now,
                    self.config.frequency_window_ms,
                );
                if distinct > self.config.expected_sth_frequency as usize {
                    self.counters.frequency_anomalies += 1;
                }
            }
            IngestOutcome::Duplicate => self.counters.stored_duplicate += 1,
        }
        Some(sth)
    }

    /// Ingests every packet of a clones pcap at its capture timestamp.
    /// Returns how many tree heads were accepted.
    pub fn ingest_pcap(&mut self, path: &Path) -> io::Result<usize> {
        let mut accepted = 0;
        for packet in read_pcap(path)? {
            // Capture timestamps are microseconds; the store tracks ms.
            if self
                .ingest_clone(&packet.data, packet.timestamp_us / 1000)
                .is_some()
            {
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    /// Fetches the log's current tree head through the off-path channel
    /// and stores it. The channel carries no identity linkable to this
    /// challenger's aggregators; that contract belongs to the channel.
    pub fn fetch_off_path(
        &mut self,
        channel: &mut dyn OffPathChannel,
        log_name: &str,
        now: TimestampMs,
    ) -> Result<SignedTreeHead, TransportError> {
        let descriptor = self.by_name.get(log_name).cloned().ok_or_else(|| TransportError {
            retryable: false,
            message: format!("no descriptor for log {log_name:?}"),
        })?;
        let sth = channel.fetch_sth(&descriptor.log_id)?;
        self.accept(sth.clone(), &descriptor, SthSource::OffPath, now);
        Ok(sth)
    }

    /// Audits one log's stored tree heads. `resume` continues an audit
    /// that a retryable transport error interrupted.
    pub fn audit(
        &mut self,
        channel: &mut dyn OffPathChannel,
        log_name: &str,
        now: TimestampMs,
        resume: Option<AuditCursor>,
    ) -> AuditOutcome {
        let Some(descriptor) = self.by_name.get(log_name).cloned() else {
            return AuditOutcome {
                evidence: Vec::new(),
                completed: true,
                cursor: None,
                proof_requests: 0,
            };
        };
        let entries = self.store.entries_for_log(&descriptor.log_id);
        let outcome = audit_entries(channel, &descriptor.log_id, &entries, now, resume);
        self.counters.audits_run += 1;
        self.counters.proof_requests += outcome.proof_requests;
        outcome
    }

    /// Audits every known log to completion (no resumption), concatenating
    /// the evidence.
    pub fn audit_all(
        &mut self,
        channel: &mut dyn OffPathChannel,
        now: TimestampMs,
    ) -> Vec<Evidence> {
        let names: Vec<String> = self.by_name.keys().cloned().collect();
        let mut evidence = Vec::new();
        for name in names {
            evidence.extend(self.audit(channel, &name, now, None).evidence);
        }
        evidence
    }

    pub fn report(&self, evidence: Vec<Evidence>, generated_at: TimestampMs) -> Report {
        Report::new(evidence, self.counters(), generated_at)
    }
}
