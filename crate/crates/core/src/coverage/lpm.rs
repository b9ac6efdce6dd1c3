//! Longest-prefix matching over IPv4 prefixes.
//!
//! One exact-match table per prefix length; a lookup probes lengths from
//! /32 down to /0. Linear in 33, independent of table size, and easy to
//! check against a linear scan.

use std::collections::HashMap;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum PrefixError {
    #[error("bad prefix syntax {0:?}")]
    Syntax(String),
    #[error("prefix length {0} out of range")]
    Length(u8),
}

/// An IPv4 CIDR prefix with a canonical (masked) network address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    pub network: u32,
    pub length: u8,
}

impl Prefix {
    pub fn new(addr: u32, length: u8) -> Result<Self, PrefixError> {
        if length > 32 {
            return Err(PrefixError::Length(length));
        }
        Ok(Self { network: addr & mask(length), length })
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr & mask(self.length) == self.network
    }

    /// Number of addresses the prefix spans.
    pub fn address_count(&self) -> u64 {
        1u64 << (32 - self.length)
    }
}

impl FromStr for Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| PrefixError::Syntax(s.to_string()))?;
        let addr: Ipv4Addr = addr.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        let len: u8 = len.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        Prefix::new(u32::from(addr), len)
    }
}

impl std::fmt::Display for Prefix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.network), self.length)
    }
}

fn mask(length: u8) -> u32 {
    if length == 0 {
        0
    } else {
        u32::MAX << (32 - length)
    }
}

/// Longest-prefix-match table mapping prefixes to values.
#[derive(Clone, Debug, Default)]
pub struct PrefixTable<V> {
    by_length: Vec<HashMap<u32, V>>,
    len: usize,
}

impl<V: Clone> PrefixTable<V> {
    pub fn new() -> Self {
        Self { by_length: (0..=32).map(|_| HashMap::new()).collect(), len: 0 }
    }

    pub fn insert(&mut self, prefix: Prefix, value: V) {
        if self.by_length.is_empty() {
            self.by_length = (0..=32).map(|_| HashMap::new()).collect();
        }
        if self.by_length[prefix.length as usize]
            .insert(prefix.network, value)
            .is_none()
        {
            self.len += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Most specific prefix containing `addr`.
    pub fn lookup(&self, addr: u32) -> Option<(Prefix, &V)> {
        if self.by_length.is_empty() {
            return None;
        }
        for length in (0..=32u8).rev() {
            let network = addr & mask(length);
            if let Some(value) = self.by_length[length as usize].get(&network) {
                return Some((Prefix { network, length }, value));
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = (Prefix, &V)> {
        self.by_length.iter().enumerate().flat_map(|(length, map)| {
            map.iter().map(move |(network, value)| {
                (Prefix { network: *network, length: length as u8 }, value)
            })
        })
    }
}
