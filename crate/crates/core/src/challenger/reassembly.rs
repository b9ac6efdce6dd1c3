//! IP fragment reassembly for cloned traffic.
//!
//! Datagrams are keyed by (source, destination, identification). A
//! datagram is released only once the byte range `[0, total)` is fully
//! covered and the final fragment (more-fragments clear) has arrived.
//! Buffers are bounded: stale ones time out and the oldest is evicted when
//! the table is full.

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FragmentKey {
    /// IPv4 addresses are embedded in the low 4 bytes.
    pub src: [u8; 16],
    pub dst: [u8; 16],
    pub identification: u32,
}

impl FragmentKey {
    pub fn v4(src: [u8; 4], dst: [u8; 4], identification: u16) -> Self {
        let mut s = [0u8; 16];
        let mut d = [0u8; 16];
        s[12..].copy_from_slice(&src);
        d[12..].copy_from_slice(&dst);
        Self { src: s, dst: d, identification: u32::from(identification) }
    }

    pub fn v6(src: [u8; 16], dst: [u8; 16], identification: u32) -> Self {
        Self { src, dst, identification }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReassemblyConfig {
    pub timeout_ms: u64,
    pub capacity: usize,
}

impl Default for ReassemblyConfig {
    fn default() -> Self {
        Self { timeout_ms: 30_000, capacity: 1024 }
    }
}

struct Buffer {
    fragments: Vec<(u32, Vec<u8>)>,
    /// Total datagram length, known once the final fragment arrives.
    total: Option<u32>,
    created_ms: u64,
}

impl Buffer {
    fn is_complete(&self) -> bool {
        let Some(total) = self.total else { return false };
        // Merge the covered intervals and check they span [0, total).
        let mut ranges: Vec<(u32, u32)> = self
            .fragments
            .iter()
            .map(|(off, data)| (*off, *off + data.len() as u32))
            .collect();
        ranges.sort_unstable();
        let mut covered = 0u32;
        for (start, end) in ranges {
            if start > covered {
                return false;
            }
            covered = covered.max(end);
        }
        covered >= total
    }

    fn assemble(&self) -> Vec<u8> {
        let total = self.total.expect("assemble requires completeness") as usize;
        let mut out = vec![0u8; total];
        // Arrival order; overlapping bytes go to the latest fragment.
        for (off, data) in &self.fragments {
            let start = *off as usize;
            let end = (start + data.len()).min(total);
            out[start..end].copy_from_slice(&data[..end - start]);
        }
        out
    }
}

#[derive(Default)]
pub struct ReassemblyBuffers {
    config: ReassemblyConfig,
    buffers: BTreeMap<FragmentKey, Buffer>,
    pub timeouts: u64,
    pub evictions: u64,
}

impl ReassemblyBuffers {
    pub fn new(config: ReassemblyConfig) -> Self {
        Self { config, ..Default::default() }
    }

    pub fn pending(&self) -> usize {
        self.buffers.len()
    }

    /// Drops buffers older than the timeout; returns how many were dropped.
    pub fn expire(&mut self, now_ms: u64) -> usize {
        let deadline = now_ms.saturating_sub(self.config.timeout_ms);
        let before = self.buffers.len();
        self.buffers.retain(|_, b| b.created_ms >= deadline);
        let dropped = before - self.buffers.len();
        self.timeouts += dropped as u64;
        dropped
    }

    /// Adds one fragment. Returns the reassembled IP payload when this
    /// fragment completes its datagram.
    pub fn push(
        &mut self,
        key: FragmentKey,
        offset: u32,
        payload: &[u8],
        more_fragments: bool,
        now_ms: u64,
    ) -> Option<Vec<u8>> {
        if !self.buffers.contains_key(&key) && self.buffers.len() >= self.config.capacity {
            let oldest = self
                .buffers
                .iter()
                .min_by_key(|(_, b)| b.created_ms)
                .map(|(k, _)| *k)
                .expect("capacity > 0 implies non-empty");
            self.buffers.remove(&oldest);
            self.evictions += 1;
        }
        let buffer = self.buffers.entry(key).or_insert_with(|| Buffer {
            fragments: Vec::new(),
            total: None,
            created_ms: now_ms,
        });
        if !more_fragments {
            buffer.total = Some(offset + payload.len() as u32);
        }
        buffer.fragments.push((offset, payload.to_vec()));
        if buffer.is_complete() {
            let datagram = buffer.assemble();
            self.buffers.remove(&key);
            Some(datagram)
        } else {
            None
        }
    }
}
