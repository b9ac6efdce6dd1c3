//! Ethernet/IPv4/IPv6/UDP frame construction and header views.
//!
//! Builders fill in every length field from the actual byte counts and
//! compute the IPv4 header checksum and UDP checksums on serialization.
//! The view parsers are prefix readers over raw bytes; they never allocate
//! and their extension-header walk is constant-bounded.

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86DD;
pub const PROTO_UDP: u8 = 17;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_IPV6_FRAGMENT: u8 = 44;

pub const ETHERNET_HEADER_LEN: usize = 14;
pub const IPV4_HEADER_LEN: usize = 20;
pub const IPV6_HEADER_LEN: usize = 40;
pub const UDP_HEADER_LEN: usize = 8;

/// Extension headers walked before giving up on an IPv6 chain.
const IPV6_EXT_BOUND: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EthernetHeader {
    pub dst: [u8; 6],
    pub src: [u8; 6],
    pub ethertype: u16,
}

impl EthernetHeader {
    pub fn new(ethertype: u16) -> Self {
        Self {
            dst: [0x02, 0, 0, 0, 0, 0x01],
            src: [0x02, 0, 0, 0, 0, 0x02],
            ethertype,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ipv4Header {
    pub tos: u8,
    pub identification: u16,
    pub dont_fragment: bool,
    pub more_fragments: bool,
    /// In 8-byte units, as on the wire.
    pub fragment_offset: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub src: [u8; 4],
    pub dst: [u8; 4],
}

impl Ipv4Header {
    pub fn udp(src: [u8; 4], dst: [u8; 4]) -> Self {
        Self {
            tos: 0,
            identification: 0,
            dont_fragment: false,
            more_fragments: false,
            fragment_offset: 0,
            ttl: 64,
            protocol: PROTO_UDP,
            src,
            dst,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ipv6Fragment {
    /// In 8-byte units.
    pub offset: u16,
    pub more_fragments: bool,
    pub identification: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    pub flow_label: u32,
    /// Protocol of the payload after any fragment header.
    pub protocol: u8,
    pub hop_limit: u8,
    pub src: [u8; 16],
    pub dst: [u8; 16],
    pub fragment: Option<Ipv6Fragment>,
}

impl Ipv6Header {
    pub fn udp(src: [u8; 16], dst: [u8; 16]) -> Self {
        Self {
            traffic_class: 0,
            flow_label: 0,
            protocol: PROTO_UDP,
            hop_limit: 64,
            src,
            dst,
            fragment: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetHeader {
    V4(Ipv4Header),
    V6(Ipv6Header),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    Udp { src_port: u16, dst_port: u16 },
    /// Payload bytes follow the network header directly (non-first
    /// fragments, or transports identified only by the protocol field).
    None,
}

/// Declarative description of one frame; `build` serializes it with
/// consistent lengths and checksums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketBlueprint {
    pub eth: EthernetHeader,
    pub net: Option<NetHeader>,
    pub transport: Transport,
    pub payload: Vec<u8>,
}

fn ones_complement_sum(data: &[u8], mut sum: u32) -> u32 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        sum += u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(u16::from_be_bytes([*last, 0]));
    }
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    sum
}

pub fn ipv4_header_checksum(header: &[u8]) -> u16 {
    !(ones_complement_sum(header, 0) as u16)
}

fn udp_checksum_v4(src: [u8; 4], dst: [u8; 4], udp: &[u8]) -> u16 {
    let mut pseudo = Vec::with_capacity(12);
    pseudo.extend_from_slice(&src);
    pseudo.extend_from_slice(&dst);
    pseudo.push(0);
    pseudo.push(PROTO_UDP);
    pseudo.extend_from_slice(&(udp.len() as u16).to_be_bytes());
    let sum = ones_complement_sum(udp, ones_complement_sum(&pseudo, 0));
    let csum = !(sum as u16);
    // All-zero means "no checksum" in IPv4 UDP; transmit as 0xFFFF.
    if csum == 0 {
        0xFFFF
    } else {
        csum
    }
}

fn udp_checksum_v6(src: [u8; 16], dst: [u8; 16], udp: &[u8]) -> u16 {
    let mut pseudo = Vec::with_capacity(40);
    pseudo.extend_from_slice(&src);
    pseudo.extend_from_slice(&dst);
    pseudo.extend_from_slice(&(udp.len() as u32).to_be_bytes());
    pseudo.extend_from_slice(&[0, 0, 0, PROTO_UDP]);
    let sum = ones_complement_sum(udp, ones_complement_sum(&pseudo, 0));
    let csum = !(sum as u16);
    if csum == 0 {
        0xFFFF
    } else {
        csum
    }
}

impl PacketBlueprint {
    pub fn build(&self) -> Vec<u8> {
        let mut l4 = Vec::new();
        match self.transport {
            Transport::Udp { src_port, dst_port } => {
                let udp_len = UDP_HEADER_LEN + self.payload.len();
                l4.extend_from_slice(&src_port.to_be_bytes());
                l4.extend_from_slice(&dst_port.to_be_bytes());
                l4.extend_from_slice(&(udp_len as u16).to_be_bytes());
                l4.extend_from_slice(&0u16.to_be_bytes());
                l4.extend_from_slice(&self.payload);
                let csum = match &self.net {
                    Some(NetHeader::V4(h)) => udp_checksum_v4(h.src, h.dst, &l4),
                    Some(NetHeader::V6(h)) => udp_checksum_v6(h.src, h.dst, &l4),
                    None => 0,
                };
                l4[6..8].copy_from_slice(&csum.to_be_bytes());
            }
            Transport::None => l4.extend_from_slice(&self.payload),
        }

        let mut frame = Vec::new();
        frame.extend_from_slice(&self.eth.dst);
        frame.extend_from_slice(&self.eth.src);
        frame.extend_from_slice(&self.eth.ethertype.to_be_bytes());

        match &self.net {
            Some(NetHeader::V4(h)) => {
                let total = IPV4_HEADER_LEN + l4.len();
                let mut hdr = [0u8; IPV4_HEADER_LEN];
                hdr[0] = 0x45;
                hdr[1] = h.tos;
                hdr[2..4].copy_from_slice(&(total as u16).to_be_bytes());
                hdr[4..6].copy_from_slice(&h.identification.to_be_bytes());
                let mut flags_frag = h.fragment_offset & 0x1FFF;
                if h.dont_fragment {
                    flags_frag |= 0x4000;
                }
                if h.more_fragments {
                    flags_frag |= 0x2000;
                }
                hdr[6..8].copy_from_slice(&flags_frag.to_be_bytes());
                hdr[8] = h.ttl;
                hdr[9] = h.protocol;
                hdr[12..16].copy_from_slice(&h.src);
                hdr[16..20].copy_from_slice(&h.dst);
                let csum = ipv4_header_checksum(&hdr);
                hdr[10..12].copy_from_slice(&csum.to_be_bytes());
                frame.extend_from_slice(&hdr);
            }
            Some(NetHeader::V6(h)) => {
                let frag_len = if h.fragment.is_some() { 8 } else { 0 };
                let payload_len = frag_len + l4.len();
                let mut hdr = [0u8; IPV6_HEADER_LEN];
                let vtcfl = (6u32 << 28)
                    | (u32::from(h.traffic_class) << 20)
                    | (h.flow_label & 0x000F_FFFF);
                hdr[0..4].copy_from_slice(&vtcfl.to_be_bytes());
                hdr[4..6].copy_from_slice(&(payload_len as u16).to_be_bytes());
                hdr[6] = if h.fragment.is_some() {
                    PROTO_IPV6_FRAGMENT
                } else {
                    h.protocol
                };
                hdr[7] = h.hop_limit;
                hdr[8..24].copy_from_slice(&h.src);
                hdr[24..40].copy_from_slice(&h.dst);
                frame.extend_from_slice(&hdr);
                if let Some(frag) = &h.fragment {
                    let mut ext = [0u8; 8];
                    ext[0] = h.protocol;
                    let off_flags =
                        (frag.offset << 3) | if frag.more_fragments { 1 } else { 0 };
                    ext[2..4].copy_from_slice(&off_flags.to_be_bytes());
                    ext[4..8].copy_from_slice(&frag.identification.to_be_bytes());
                    frame.extend_from_slice(&ext);
                }
            }
            None => {}
        }
        frame.extend_from_slice(&l4);
        frame
    }
}

/// Ethertype of a frame, when 14 header bytes are present.
pub fn ethertype(frame: &[u8]) -> Option<u16> {
    Some(u16::from_be_bytes([
        *frame.get(12)?,
        *frame.get(13)?,
    ]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ipv4View {
    pub header_len: usize,
    pub total_length: u16,
    pub identification: u16,
    pub dont_fragment: bool,
    pub more_fragments: bool,
    pub fragment_offset_bytes: u32,
    pub protocol: u8,
    pub src: [u8; 4],
    pub dst: [u8; 4],
}

impl Ipv4View {
    pub fn is_fragment(&self) -> bool {
        self.more_fragments || self.fragment_offset_bytes > 0
    }
}

/// Reads an IPv4 header from the start of `ip`. `None` when the bytes do
/// not hold a complete, version-4 header.
pub fn parse_ipv4(ip: &[u8]) -> Option<Ipv4View> {
    if ip.len() < IPV4_HEADER_LEN {
        return None;
    }
    if ip[0] >> 4 != 4 {
        return None;
    }
    let header_len = usize::from(ip[0] & 0x0F) * 4;
    if header_len < IPV4_HEADER_LEN || ip.len() < header_len {
        return None;
    }
    let flags_frag = u16::from_be_bytes([ip[6], ip[7]]);
    Some(Ipv4View {
        header_len,
        total_length: u16::from_be_bytes([ip[2], ip[3]]),
        identification: u16::from_be_bytes([ip[4], ip[5]]),
        dont_fragment: flags_frag & 0x4000 != 0,
        more_fragments: flags_frag & 0x2000 != 0,
        fragment_offset_bytes: u32::from(flags_frag & 0x1FFF) * 8,
        protocol: ip[9],
        src: [ip[12], ip[13], ip[14], ip[15]],
        dst: [ip[16], ip[17], ip[18], ip[19]],
    })
}

/// Validates the checksum over an IPv4 header slice (header bytes only).
pub fn ipv4_checksum_ok(ip: &[u8]) -> bool {
    match parse_ipv4(ip) {
        Some(v) => ones_complement_sum(&ip[..v.header_len], 0) == 0xFFFF,
        None => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ipv6View {
    pub payload_length: u16,
    /// Protocol after the bounded extension-header walk. When the walk
    /// budget runs out this is the last unrecognized next-header value.
    pub protocol: u8,
    pub is_fragment: bool,
    pub more_fragments: bool,
    pub fragment_offset_bytes: u32,
    pub identification: u32,
    /// Offset of the upper-layer payload within the ip slice.
    pub payload_offset: usize,
}

impl Ipv6View {
    /// Length analogous to IPv4's total length field.
    pub fn total_length(&self) -> u32 {
        u32::from(self.payload_length) + IPV6_HEADER_LEN as u32
    }
}

/// Reads an IPv6 header plus a constant-bounded extension chain.
pub fn parse_ipv6(ip: &[u8]) -> Option<Ipv6View> {
    if ip.len() < IPV6_HEADER_LEN || ip[0] >> 4 != 6 {
        return None;
    }
    let payload_length = u16::from_be_bytes([ip[4], ip[5]]);
    let mut view = Ipv6View {
        payload_length,
        protocol: ip[6],
        is_fragment: false,
        more_fragments: false,
        fragment_offset_bytes: 0,
        identification: 0,
        payload_offset: IPV6_HEADER_LEN,
    };
    for _ in 0..IPV6_EXT_BOUND {
        match view.protocol {
            PROTO_IPV6_FRAGMENT => {
                let ext = ip.get(view.payload_offset..view.payload_offset + 8)?;
                let off_flags = u16::from_be_bytes([ext[2], ext[3]]);
                view.is_fragment = true;
                view.more_fragments = off_flags & 1 != 0;
                view.fragment_offset_bytes = u32::from(off_flags >> 3) * 8;
                view.identification = u32::from_be_bytes([ext[4], ext[5], ext[6], ext[7]]);
                view.protocol = ext[0];
                view.payload_offset += 8;
            }
            // Hop-by-hop, routing, destination options.
            0 | 43 | 60 => {
                let ext = ip.get(view.payload_offset..view.payload_offset + 2)?;
                let len = (usize::from(ext[1]) + 1) * 8;
                ip.get(view.payload_offset..view.payload_offset + len)?;
                view.protocol = ext[0];
                view.payload_offset += len;
            }
            _ => break,
        }
    }
    Some(view)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UdpView {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
}

pub fn parse_udp(bytes: &[u8]) -> Option<UdpView> {
    if bytes.len() < UDP_HEADER_LEN {
        return None;
    }
    Some(UdpView {
        src_port: u16::from_be_bytes([bytes[0], bytes[1]]),
        dst_port: u16::from_be_bytes([bytes[2], bytes[3]]),
        length: u16::from_be_bytes([bytes[4], bytes[5]]),
    })
}

/// Splits an unfragmented IPv4 frame into fragments whose IP payload sizes
/// are `sizes` (every size except the last must be a multiple of 8; sizes
/// must sum to the original IP payload length). Headers are recomputed per
/// fragment; the transport header travels inside the first fragment's
/// payload as on real networks.
pub fn fragment_ipv4_frame(frame: &[u8], sizes: &[usize]) -> Vec<Vec<u8>> {
    let eth = &frame[..ETHERNET_HEADER_LEN];
    let ip = &frame[ETHERNET_HEADER_LEN..];
    let view = parse_ipv4(ip).expect("fragmenting requires a valid IPv4 frame");
    assert!(!view.is_fragment(), "frame is already a fragment");
    let payload = &ip[view.header_len..usize::from(view.total_length)];
    assert_eq!(
        sizes.iter().sum::<usize>(),
        payload.len(),
        "fragment sizes must cover the payload"
    );

    let mut fragments = Vec::new();
    let mut offset = 0usize;
    for (i, &size) in sizes.iter().enumerate() {
        let last = i == sizes.len() - 1;
        assert!(last || size % 8 == 0, "non-final fragments align to 8 bytes");
        let header = Ipv4Header {
            tos: 0,
            identification: view.identification,
            dont_fragment: false,
            more_fragments: !last,
            fragment_offset: (offset / 8) as u16,
            ttl: 64,
            protocol: view.protocol,
            src: view.src,
            dst: view.dst,
        };
        let mut blueprint = PacketBlueprint {
            eth: EthernetHeader {
                dst: eth[0..6].try_into().unwrap(),
                src: eth[6..12].try_into().unwrap(),
                ethertype: ETHERTYPE_IPV4,
            },
            net: Some(NetHeader::V4(header)),
            transport: Transport::None,
            payload: payload[offset..offset + size].to_vec(),
        };
        // Transport::None leaves the payload untouched, so the original
        // UDP header and checksum ride along in fragment zero.
        fragments.push(blueprint.build());
        blueprint.payload.clear();
        offset += size;
    }
    fragments
}
