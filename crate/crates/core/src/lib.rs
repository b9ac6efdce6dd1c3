//! Gossip-as-a-service building blocks for transparency logs: simulated
//! logs that emit plaintext signed tree heads over a DNS-style wire format,
//! a constant-work inline packet pipeline that clones STH-related traffic,
//! an off-path challenger that audits log consistency, a deterministic
//! scenario runner for split-view experiments, and a traceroute-based
//! deployment-coverage analyzer.

pub mod codec;
pub mod coverage;
pub mod merkle;
pub mod pcap;
pub mod challenger;
pub mod pipeline;
pub mod sim;

pub use merkle::{Digest, LogId, SignedTreeHead, TimestampMs};
