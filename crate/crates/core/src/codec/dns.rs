//! Restricted DNS wire format for STH responses: IN TXT over UDP, a single
//! question and a single answer, and a byte-size threshold.
//!
//! The parser is written the way a programmable packet processor has to be:
//! every loop is bounded by a constant, nothing is thrown, and any
//! non-conforming input maps to a structured reject reason. Name
//! compression is rejected rather than followed since pointer chasing
//! defeats constant-bound parsing; the builders never emit it. Bytes
//! trailing the parsed records are ignored, mirroring processors that only
//! ever inspect a packet prefix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::SignedTreeHead;

use super::sth_txt::encode_sth_txt;

pub const TYPE_TXT: u16 = 16;
pub const CLASS_IN: u16 = 1;

/// QR and AA set; the low nibble carries the response code.
const RESPONSE_FLAGS: u16 = 0x8400;
/// Query domain suffix labels after `sth.<log>`.
const DOMAIN_SUFFIX: [&str; 3] = ["ct", "googleapis", "com"];

/// Default cap on DNS response message bytes, large enough for IP options,
/// long domain names, and future tree-head extensions.
pub const DEFAULT_RESPONSE_THRESHOLD: usize = 400;

/// Parser bounds. Five labels cover the query-domain template; eight leave
/// headroom without unbounding the loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseBounds {
    pub max_labels: usize,
    pub max_txt_strings: usize,
}

impl Default for ParseBounds {
    fn default() -> Self {
        Self { max_labels: 8, max_txt_strings: 4 }
    }
}

/// Reasons the bounded parser refuses a message. Total: arbitrary bytes map
/// to exactly one of these or to a parsed message.
#[derive(Error, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnsRejectReason {
    #[error("message shorter than the field being read")]
    ShortRead,
    #[error("question/answer counts are not qd=1, an=1")]
    QdAnMismatch,
    #[error("domain name exceeds the label bound")]
    LabelBoundExceeded,
    #[error("compressed or reserved label encoding")]
    NameCompression,
    #[error("label contains non-printable bytes")]
    BadLabel,
    #[error("query name does not match the sth.<log> template")]
    NotSthQueryName,
    #[error("query type is not TXT")]
    WrongQueryType,
    #[error("query class is not IN")]
    WrongQueryClass,
    #[error("answer record is malformed")]
    BadAnswer,
}

/// Sections of a DNS message the parser walked, with byte offsets. The
/// packet pipeline folds these into its stage trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DnsSection {
    Preamble,
    Name,
    Type,
    Class,
}

pub type DnsVisits = Vec<(DnsSection, usize)>;

/// Parsed header and first question of a DNS message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnsQuestion {
    pub txid: u16,
    pub flags: u16,
    pub qd_count: u16,
    pub an_count: u16,
    pub labels: Vec<String>,
    pub qtype: u16,
    pub qclass: u16,
    /// Offset of the first byte after the question.
    pub end_offset: usize,
    /// Name-loop iterations spent; always `<= bounds.max_labels`.
    pub label_iterations: usize,
}

impl DnsQuestion {
    pub fn name(&self) -> String {
        self.labels.join(".")
    }

    /// The `<log>` label when the name matches `sth.<log>.ct.googleapis.com`.
    pub fn sth_log_label(&self) -> Option<&str> {
        if self.labels.len() != 5 || self.labels[0] != "sth" {
            return None;
        }
        if self.labels[2..] != DOMAIN_SUFFIX {
            return None;
        }
        Some(&self.labels[1])
    }
}

/// A fully parsed STH response message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnsSthMessage {
    pub txid: u16,
    pub query_name: String,
    pub log_label: String,
    pub qd_count: u16,
    pub an_count: u16,
    pub txt_payload: String,
}

fn read_u16(bytes: &[u8], offset: usize) -> Option<u16> {
    let hi = *bytes.get(offset)?;
    let lo = *bytes.get(offset + 1)?;
    Some(u16::from_be_bytes([hi, lo]))
}

/// Walks one encoded domain name starting at `offset`. Returns the labels,
/// the offset just past the terminator, and the loop iterations spent.
fn parse_name(
    bytes: &[u8],
    mut offset: usize,
    bounds: &ParseBounds,
) -> Result<(Vec<String>, usize, usize), DnsRejectReason> {
    let mut labels = Vec::new();
    let mut iterations = 0;
    // One extra iteration pays for the terminating zero byte.
    while iterations <= bounds.max_labels {
        iterations += 1;
        let len = *bytes.get(offset).ok_or(DnsRejectReason::ShortRead)? as usize;
        offset += 1;
        if len == 0 {
            return Ok((labels, offset, iterations));
        }
        if len & 0xC0 != 0 {
            // 0b11 prefix is a compression pointer; 0b01/0b10 are reserved.
            return Err(DnsRejectReason::NameCompression);
        }
        let label = bytes
            .get(offset..offset + len)
            .ok_or(DnsRejectReason::ShortRead)?;
        offset += len;
        if !label.iter().all(|b| b.is_ascii_graphic()) {
            return Err(DnsRejectReason::BadLabel);
        }
        labels.push(String::from_utf8(label.to_vec()).expect("ascii is utf8"));
    }
    Err(DnsRejectReason::LabelBoundExceeded)
}

/// Bounded parse of the DNS header and first question. `visits` records the
/// sections reached so callers can account parse work. When `count_gate` is
/// set, the question/answer counts must match it exactly before the name is
/// extracted — a message laid out for other counts has a different shape,
/// so the walk ends at the preamble.
pub fn parse_question(
    bytes: &[u8],
    bounds: &ParseBounds,
    visits: &mut DnsVisits,
    count_gate: Option<(u16, u16)>,
) -> Result<DnsQuestion, DnsRejectReason> {
    visits.push((DnsSection::Preamble, 0));
    if bytes.len() < 12 {
        return Err(DnsRejectReason::ShortRead);
    }
    let txid = read_u16(bytes, 0).unwrap();
    let flags = read_u16(bytes, 2).unwrap();
    let qd_count = read_u16(bytes, 4).unwrap();
    let an_count = read_u16(bytes, 6).unwrap();
    if let Some((qd, an)) = count_gate {
        if qd_count != qd || an_count != an {
            return Err(DnsRejectReason::QdAnMismatch);
        }
    }

    visits.push((DnsSection::Name, 12));
    let (labels, after_name, label_iterations) = parse_name(bytes, 12, bounds)?;

    visits.push((DnsSection::Type, after_name));
    let qtype = read_u16(bytes, after_name).ok_or(DnsRejectReason::ShortRead)?;
    visits.push((DnsSection::Class, after_name + 2));
    let qclass = read_u16(bytes, after_name + 2).ok_or(DnsRejectReason::ShortRead)?;

    Ok(DnsQuestion {
        txid,
        flags,
        qd_count,
        an_count,
        labels,
        qtype,
        qclass,
        end_offset: after_name + 4,
        label_iterations,
    })
}

/// Parses a full STH response: header, question, and the first TXT answer.
/// Total function; non-conforming input comes back as a reject reason.
pub fn parse_dns_message(bytes: &[u8]) -> Result<DnsSthMessage, DnsRejectReason> {
    parse_dns_message_with(bytes, &ParseBounds::default())
}

pub fn parse_dns_message_with(
    bytes: &[u8],
    bounds: &ParseBounds,
) -> Result<DnsSthMessage, DnsRejectReason> {
    let mut visits = DnsVisits::new();
    let question = parse_question(bytes, bounds, &mut visits, Some((1, 1)))?;
    let log_label = question
        .sth_log_label()
        .ok_or(DnsRejectReason::NotSthQueryName)?
        .to_string();
    if question.qtype != TYPE_TXT {
        return Err(DnsRejectReason::WrongQueryType);
    }
    if question.qclass != CLASS_IN {
        return Err(DnsRejectReason::WrongQueryClass);
    }

    // Answer record: name, type, class, ttl, rdlength, TXT rdata.
    let (_, mut offset, _) =
        parse_name(bytes, question.end_offset, bounds).map_err(|e| match e {
            DnsRejectReason::ShortRead => DnsRejectReason::ShortRead,
            other => other,
        })?;
    let atype = read_u16(bytes, offset).ok_or(DnsRejectReason::ShortRead)?;
    let aclass = read_u16(bytes, offset + 2).ok_or(DnsRejectReason::ShortRead)?;
    if atype != TYPE_TXT || aclass != CLASS_IN {
        return Err(DnsRejectReason::BadAnswer);
    }
    offset += 8; // type, class, ttl
    let rdlength = read_u16(bytes, offset).ok_or(DnsRejectReason::ShortRead)? as usize;
    offset += 2;
    let rdata = bytes
        .get(offset..offset + rdlength)
        .ok_or(DnsRejectReason::ShortRead)?;

    // TXT rdata is a sequence of length-prefixed character strings; the
    // first carries the tree head, any others are padding.
    let mut strings = Vec::new();
    let mut pos = 0;
    for _ in 0..bounds.max_txt_strings {
        if pos == rdata.len() {
            break;
        }
        let len = rdata[pos] as usize;
        let s = rdata
            .get(pos + 1..pos + 1 + len)
            .ok_or(DnsRejectReason::BadAnswer)?;
        strings.push(s);
        pos += 1 + len;
    }
    if pos != rdata.len() || strings.is_empty() {
        return Err(DnsRejectReason::BadAnswer);
    }
    let txt_payload = std::str::from_utf8(strings[0])
        .map_err(|_| DnsRejectReason::BadAnswer)?
        .to_string();

    Ok(DnsSthMessage {
        txid: question.txid,
        query_name: question.name(),
        log_label,
        qd_count: question.qd_count,
        an_count: question.an_count,
        txt_payload,
    })
}

#[derive(Error, Debug)]
pub enum DnsBuildError {
    #[error("encoded message is {size} bytes, over the {threshold}-byte threshold")]
    OverThreshold { size: usize, threshold: usize },
    #[error("txt payload of {0} bytes exceeds one character string")]
    PayloadTooLong(usize),
    #[error("invalid log label {0:?}")]
    BadLogLabel(String),
}

fn push_name(out: &mut Vec<u8>, labels: &[&str]) {
    for label in labels {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
}

fn push_header(out: &mut Vec<u8>, txid: u16, flags: u16, qd: u16, an: u16) {
    out.extend_from_slice(&txid.to_be_bytes());
    out.extend_from_slice(&flags.to_be_bytes());
    out.extend_from_slice(&qd.to_be_bytes());
    out.extend_from_slice(&an.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes()); // ns
    out.extend_from_slice(&0u16.to_be_bytes()); // ar
}

fn sth_domain_labels(log: &str) -> [&str; 5] {
    ["sth", log, DOMAIN_SUFFIX[0], DOMAIN_SUFFIX[1], DOMAIN_SUFFIX[2]]
}

/// Wire-format STH response: one TXT/IN question for `sth.<log>` and one
/// TXT answer carrying the encoded tree head. Fails when the message would
/// exceed `threshold` bytes.
pub fn build_sth_response_message(
    log: &str,
    sth: &SignedTreeHead,
    txid: u16,
    threshold: usize,
) -> Result<Vec<u8>, DnsBuildError> {
    let msg = build_sth_response_padded(log, sth, txid, 0)?;
    if msg.len() > threshold {
        return Err(DnsBuildError::OverThreshold { size: msg.len(), threshold });
    }
    Ok(msg)
}

/// Same message with `pad` extra rdata bytes appended as a second TXT
/// character string (fixture builders use this to hit exact frame sizes).
/// `pad` of 0 emits a single-string answer; otherwise `pad >= 2`.
pub fn build_sth_response_padded(
    log: &str,
    sth: &SignedTreeHead,
    txid: u16,
    pad: usize,
) -> Result<Vec<u8>, DnsBuildError> {
    crate::merkle::validate_log_name(log)
        .map_err(|_| DnsBuildError::BadLogLabel(log.to_string()))?;
    let payload = encode_sth_txt(sth);
    if payload.len() > 255 {
        return Err(DnsBuildError::PayloadTooLong(payload.len()));
    }
    assert!(pad == 0 || (2..=256).contains(&pad), "padding string range");

    let labels = sth_domain_labels(log);
    let mut out = Vec::new();
    push_header(&mut out, txid, RESPONSE_FLAGS, 1, 1);
    push_name(&mut out, &labels);
    out.extend_from_slice(&TYPE_TXT.to_be_bytes());
    out.extend_from_slice(&CLASS_IN.to_be_bytes());
    // Answer: same owner name, TTL 0 so responses are never cached stale.
    push_name(&mut out, &labels);
    out.extend_from_slice(&TYPE_TXT.to_be_bytes());
    out.extend_from_slice(&CLASS_IN.to_be_bytes());
    out.extend_from_slice(&0u32.to_be_bytes());
    let rdlength = 1 + payload.len() + if pad > 0 { pad } else { 0 };
    out.extend_from_slice(&(rdlength as u16).to_be_bytes());
    out.push(payload.len() as u8);
    out.extend_from_slice(payload.as_bytes());
    if pad > 0 {
        out.push((pad - 1) as u8);
        out.extend(std::iter::repeat_n(0u8, pad - 1));
    }
    Ok(out)
}

/// A plain STH query: one TXT/IN question, no answers.
pub fn build_sth_query(log: &str, txid: u16) -> Result<Vec<u8>, DnsBuildError> {
    crate::merkle::validate_log_name(log)
        .map_err(|_| DnsBuildError::BadLogLabel(log.to_string()))?;
    let mut out = Vec::new();
    push_header(&mut out, txid, 0x0100, 1, 0);
    push_name(&mut out, &sth_domain_labels(log));
    out.extend_from_slice(&TYPE_TXT.to_be_bytes());
    out.extend_from_slice(&CLASS_IN.to_be_bytes());
    Ok(out)
}

/// Error response echoing the raw question section (`rcode` 3 is name
/// error, 1 is format error).
pub fn build_error_response(txid: u16, question_section: &[u8], rcode: u8) -> Vec<u8> {
    let mut out = Vec::new();
    push_header(
        &mut out,
        txid,
        RESPONSE_FLAGS | u16::from(rcode & 0x0F),
        if question_section.is_empty() { 0 } else { 1 },
        0,
    );
    out.extend_from_slice(question_section);
    out
}
