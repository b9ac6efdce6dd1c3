//! Deduplicated storage of observed tree heads with an append-only
//! JSON-lines journal.
//!
//! The dedup key is (log id, tree size, root hash): re-observing a known
//! tree head only bumps `last_seen` and the observation count. The journal
//! records the entry state after every accepted observation, so reloading
//! keeps the last line per key.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::merkle::{LogId, SignedTreeHead, TimestampMs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SthSource {
    Aggregated,
    OffPath,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSth {
    pub sth: SignedTreeHead,
    pub first_seen: TimestampMs,
    pub last_seen: TimestampMs,
    pub observation_count: u64,
    pub source: SthSource,
}

type Key = ([u8; 32], u64, [u8; 32]);

fn key_of(sth: &SignedTreeHead) -> Key {
    (sth.log_id.id, sth.tree_size, sth.root_hash.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IngestOutcome {
    New,
    Duplicate,
}

#[derive(Default)]
pub struct SthStore {
    entries: BTreeMap<Key, StoredSth>,
    journal: Option<BufWriter<File>>,
}

impl SthStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (appending) or creates a journal file, loading any existing
    /// entries first.
    pub fn with_journal(path: &Path) -> io::Result<Self> {
        let mut store = Self::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: StoredSth = serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                store.entries.insert(key_of(&entry.sth), entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.journal = Some(BufWriter::new(file));
        Ok(store)
    }

    /// Records an observation. Signature validity is the caller's
    /// responsibility; only verified tree heads belong in the store.
    pub fn ingest(
        &mut self,
        sth: SignedTreeHead,
        source: SthSource,
        now: TimestampMs,
    ) -> IngestOutcome {
        let key = key_of(&sth);
        let (entry, outcome) = match self.entries.get_mut(&key) {
            Some(entry) => {
                entry.last_seen = now;
                entry.observation_count += 1;
                (entry.clone(), IngestOutcome::Duplicate)
            }
            None => {
                let entry = StoredSth {
                    sth,
                    first_seen: now,
                    last_seen: now,
                    observation_count: 1,
                    source,
                };
                self.entries.insert(key, entry.clone());
                (entry, IngestOutcome::New)
            }
        };
        if let Some(journal) = &mut self.journal {
            // Journal failures must not take down ingestion; the store
            // keeps working in memory.
            let _ = serde_json::to_string(&entry)
                .map_err(io::Error::other)
                .and_then(|line| writeln!(journal, "{line}"))
                .and_then(|()| journal.flush());
        }
        outcome
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredSth> {
        self.entries.values()
    }

    /// Entries for one log, ordered by (tree size, root hash).
    pub fn entries_for_log(&self, log_id: &LogId) -> Vec<&StoredSth> {
        let lo = (log_id.id, 0u64, [0u8; 32]);
        let hi = (log_id.id, u64::MAX, [0xFFu8; 32]);
        self.entries.range(lo..=hi).map(|(_, v)| v).collect()
    }

    /// Distinct tree heads for a log first observed inside the window
    /// ending at `now`.
    pub fn distinct_in_window(
        &self,
        log_id: &LogId,
        now: TimestampMs,
        window_ms: u64,
    ) -> usize {
        let start = now.saturating_sub(window_ms);
        self.entries_for_log(log_id)
            .iter()
            .filter(|e| e.first_seen > start && e.first_seen <= now)
            .count()
    }
}
