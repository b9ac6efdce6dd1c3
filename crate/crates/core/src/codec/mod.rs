//! Wire formats for plaintext STH traffic: the TXT payload encoding, the
//! restricted DNS message format, and full link-layer frames.

pub mod dns;
pub mod fixtures;
pub mod packet;
pub mod sth_txt;

pub use dns::{
    build_error_response, build_sth_query, build_sth_response_message, parse_dns_message,
    DnsQuestion, DnsRejectReason, DnsSthMessage, ParseBounds, CLASS_IN,
    DEFAULT_RESPONSE_THRESHOLD, TYPE_TXT,
};
pub use fixtures::{
    build_background_udp, build_fragment_with, build_sth_411, build_sth_frame,
    build_sth_frame_v6, build_tiny_fragment_64, SthFrameSpec, STH_FIXTURE_FRAME_LEN,
    TINY_FRAGMENT_FRAME_LEN,
};
pub use packet::{
    EthernetHeader, Ipv4Header, Ipv6Header, NetHeader, PacketBlueprint, Transport,
};
pub use sth_txt::{decode_sth_txt, encode_sth_txt, SthTxt, TxtParseError};
