//! Canonical packet fixtures: the 411-byte STH response frame, the 64-byte
//! tiny fragment, and arbitrary blueprint frames.

use thiserror::Error;

use crate::merkle::SignedTreeHead;

use super::dns::{build_sth_response_padded, DnsBuildError};
use super::packet::{
    EthernetHeader, Ipv4Header, Ipv6Header, NetHeader, PacketBlueprint, Transport,
    ETHERNET_HEADER_LEN, ETHERTYPE_IPV4, ETHERTYPE_IPV6, IPV4_HEADER_LEN, UDP_HEADER_LEN,
};

/// Frame length of the canonical non-fragmented STH response fixture. The
/// DNS answer carries an oversized padding string so the full parse path is
/// maximally exercised.
pub const STH_FIXTURE_FRAME_LEN: usize = 411;
/// Frame length of the canonical tiny-fragment fixture.
pub const TINY_FRAGMENT_FRAME_LEN: usize = 64;

/// Source address used by fixture log servers (TEST-NET-1).
pub const FIXTURE_LOG_IP: [u8; 4] = [192, 0, 2, 53];
/// Destination (client) address for fixtures (TEST-NET-2).
pub const FIXTURE_CLIENT_IP: [u8; 4] = [198, 51, 100, 10];
pub const FIXTURE_CLIENT_PORT: u16 = 33400;

#[derive(Error, Debug)]
pub enum FixtureError {
    #[error("tree head needs a {needed}-byte message, larger than the {target}-byte target")]
    DoesNotFit { needed: usize, target: usize },
    #[error("target length {0} requires a 1-byte pad, which TXT strings cannot express")]
    UnpaddableLength(usize),
    #[error(transparent)]
    Dns(#[from] DnsBuildError),
}

/// Everything needed to materialize one STH response frame.
#[derive(Clone, Debug)]
pub struct SthFrameSpec<'a> {
    pub log: &'a str,
    pub sth: &'a SignedTreeHead,
    pub txid: u16,
    pub src_ip: [u8; 4],
    pub dst_ip: [u8; 4],
    pub dst_port: u16,
    /// When set, pad the DNS answer so the Ethernet frame is exactly this
    /// many bytes.
    pub frame_len: Option<usize>,
}

impl<'a> SthFrameSpec<'a> {
    pub fn new(log: &'a str, sth: &'a SignedTreeHead) -> Self {
        Self {
            log,
            sth,
            txid: 0x5354,
            src_ip: FIXTURE_LOG_IP,
            dst_ip: FIXTURE_CLIENT_IP,
            dst_port: FIXTURE_CLIENT_PORT,
            frame_len: None,
        }
    }
}

/// Builds an IPv4 UDP frame carrying one STH response.
pub fn build_sth_frame(spec: &SthFrameSpec) -> Result<Vec<u8>, FixtureError> {
    let overhead = ETHERNET_HEADER_LEN + IPV4_HEADER_LEN + UDP_HEADER_LEN;
    let message = match spec.frame_len {
        None => build_sth_response_padded(spec.log, spec.sth, spec.txid, 0)?,
        Some(target) => {
            let base = build_sth_response_padded(spec.log, spec.sth, spec.txid, 0)?;
            let needed = base.len() + overhead;
            if needed > target {
                return Err(FixtureError::DoesNotFit { needed, target });
            }
            match target - needed {
                0 => base,
                1 => return Err(FixtureError::UnpaddableLength(target)),
                pad => build_sth_response_padded(spec.log, spec.sth, spec.txid, pad)?,
            }
        }
    };
    let frame = PacketBlueprint {
        eth: EthernetHeader::new(ETHERTYPE_IPV4),
        net: Some(NetHeader::V4(Ipv4Header::udp(spec.src_ip, spec.dst_ip))),
        transport: Transport::Udp { src_port: 53, dst_port: spec.dst_port },
        payload: message,
    }
    .build();
    if let Some(target) = spec.frame_len {
        debug_assert_eq!(frame.len(), target);
    }
    Ok(frame)
}

/// IPv6 twin of [`build_sth_frame`] without padding, for parse-path
/// comparisons across IP versions.
pub fn build_sth_frame_v6(
    log: &str,
    sth: &SignedTreeHead,
    txid: u16,
) -> Result<Vec<u8>, FixtureError> {
    let message = build_sth_response_padded(log, sth, txid, 0)?;
    let mut src = [0u8; 16];
    src[..4].copy_from_slice(&[0x20, 0x01, 0x0d, 0xb8]);
    src[15] = 0x53;
    let mut dst = src;
    dst[15] = 0x10;
    Ok(PacketBlueprint {
        eth: EthernetHeader::new(ETHERTYPE_IPV6),
        net: Some(NetHeader::V6(Ipv6Header::udp(src, dst))),
        transport: Transport::Udp { src_port: 53, dst_port: FIXTURE_CLIENT_PORT },
        payload: message,
    }
    .build())
}

/// The canonical 411-byte non-fragmented STH response frame.
pub fn build_sth_411(log: &str, sth: &SignedTreeHead) -> Result<Vec<u8>, FixtureError> {
    let mut spec = SthFrameSpec::new(log, sth);
    spec.frame_len = Some(STH_FIXTURE_FRAME_LEN);
    build_sth_frame(&spec)
}

/// The canonical 64-byte tiny fragment: a first fragment (more-fragments
/// set) whose IP total length sits well under the aggregation threshold.
pub fn build_tiny_fragment_64() -> Vec<u8> {
    let payload_len = TINY_FRAGMENT_FRAME_LEN - ETHERNET_HEADER_LEN - IPV4_HEADER_LEN;
    let mut header = Ipv4Header::udp(FIXTURE_LOG_IP, FIXTURE_CLIENT_IP);
    header.identification = 0x4242;
    header.more_fragments = true;
    let frame = PacketBlueprint {
        eth: EthernetHeader::new(ETHERTYPE_IPV4),
        net: Some(NetHeader::V4(header)),
        transport: Transport::None,
        payload: vec![0u8; payload_len],
    }
    .build();
    debug_assert_eq!(frame.len(), TINY_FRAGMENT_FRAME_LEN);
    frame
}

/// An IPv4 fragment frame with explicit fragmentation fields, for
/// rule-matrix tests. `total_length` counts the IP header.
pub fn build_fragment_with(
    more_fragments: bool,
    fragment_offset_units: u16,
    total_length: u16,
) -> Vec<u8> {
    assert!(total_length >= IPV4_HEADER_LEN as u16);
    let mut header = Ipv4Header::udp(FIXTURE_LOG_IP, FIXTURE_CLIENT_IP);
    header.identification = 0x1111;
    header.more_fragments = more_fragments;
    header.fragment_offset = fragment_offset_units;
    PacketBlueprint {
        eth: EthernetHeader::new(ETHERTYPE_IPV4),
        net: Some(NetHeader::V4(header)),
        transport: Transport::None,
        payload: vec![0u8; usize::from(total_length) - IPV4_HEADER_LEN],
    }
    .build()
}

/// A background UDP frame that is not STH-related (wrong source port).
pub fn build_background_udp(payload_len: usize) -> Vec<u8> {
    PacketBlueprint {
        eth: EthernetHeader::new(ETHERTYPE_IPV4),
        net: Some(NetHeader::V4(Ipv4Header::udp([203, 0, 113, 7], [198, 51, 100, 20]))),
        transport: Transport::Udp { src_port: 9999, dst_port: 8888 },
        payload: vec![0u8; payload_len],
    }
    .build()
}
