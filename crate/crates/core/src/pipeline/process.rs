//! Stateful packet processing: forwarding (always, byte-identical), clone
//! sampling, the bounded clone handoff, and the pcap batch runner.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;
use std::sync::mpsc::{Receiver, SyncSender, TrySendError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pcap::{PcapReader, PcapWriter};

use super::{classify, ParseTrace, PipelineConfig, RejectReason, SamplingMode, Verdict};

/// A sampled clone handed to the challenger side, with capture metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClonedPacket {
    pub data: Vec<u8>,
    pub timestamp_us: u64,
    pub ingress: String,
}

/// Outcome of processing one packet. `forwarded` is the input slice: the
/// pipeline never mutates, drops, or reorders what it forwards.
#[derive(Debug)]
pub struct ProcessResult<'a> {
    pub forwarded: &'a [u8],
    pub verdict: Verdict,
    pub trace: ParseTrace,
    pub cloned: bool,
}

/// Counters the pipeline reports. Serializes as the stats JSON document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub packets: u64,
    pub forwarded: u64,
    pub sth_matches: u64,
    pub fragment_matches: u64,
    pub clones_emitted: u64,
    pub clones_dropped: u64,
    pub reject_reasons: BTreeMap<RejectReason, u64>,
    pub stage_count_histogram: BTreeMap<usize, u64>,
}

/// One inline processing instance: a classifier plus per-verdict-class
/// sampling counters and a non-blocking clone handoff. One instance is
/// single-threaded; parallel deployments run one instance per ingress
/// queue.
pub struct Pipeline {
    config: PipelineConfig,
    ingress: String,
    sth_counter: u64,
    fragment_counter: u64,
    rng: Option<ChaCha8Rng>,
    clone_tx: Option<SyncSender<ClonedPacket>>,
    stats: PipelineStats,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, ingress: &str) -> Self {
        let rng = match config.sampling_mode {
            SamplingMode::EveryNth => None,
            SamplingMode::Seeded { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self {
            config,
            ingress: ingress.to_string(),
            sth_counter: 0,
            fragment_counter: 0,
            rng,
            clone_tx: None,
            stats: PipelineStats::default(),
        }
    }

    /// Creates a pipeline with a bounded clone channel and hands back the
    /// receiving end for the challenger side.
    pub fn with_channel(config: PipelineConfig, ingress: &str) -> (Self, Receiver<ClonedPacket>) {
        let capacity = config.clone_channel_capacity;
        let (tx, rx) = std::sync::mpsc::sync_channel(capacity);
        let mut pipeline = Self::new(config, ingress);
        pipeline.clone_tx = Some(tx);
        (pipeline, rx)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    /// Whether the current match should be cloned, by deterministic
    /// every-n-th counting or a seeded coin.
    fn sample(&mut self, counter: u64) -> bool {
        let n = self.config.sampling_n;
        match &mut self.rng {
            None => counter.is_multiple_of(n),
            Some(rng) => rng.gen_range(0..n) == 0,
        }
    }

    /// Processes one frame: classification, sampling, clone emission. The
    /// forwarded bytes are the input, untouched, whatever happens here —
    /// including a full clone channel, which only drops the clone.
    pub fn process<'a>(&mut self, frame: &'a [u8], timestamp_us: u64) -> ProcessResult<'a> {
        let (verdict, trace) = classify(frame, &self.config);
        self.stats.packets += 1;
        self.stats.forwarded += 1;
        *self.stats.stage_count_histogram.entry(trace.len()).or_insert(0) += 1;

        let should_clone = match verdict {
            Verdict::CloneSth => {
                self.stats.sth_matches += 1;
                self.sth_counter += 1;
                self.sample(self.sth_counter)
            }
            Verdict::CloneFragment => {
                self.stats.fragment_matches += 1;
                self.fragment_counter += 1;
                self.sample(self.fragment_counter)
            }
            Verdict::Pass(reason) => {
                *self.stats.reject_reasons.entry(reason).or_insert(0) += 1;
                false
            }
        };

        let mut cloned = false;
        if should_clone {
            let packet = ClonedPacket {
                data: frame.to_vec(),
                timestamp_us,
                ingress: self.ingress.clone(),
            };
            match &self.clone_tx {
                Some(tx) => match tx.try_send(packet) {
                    Ok(()) => cloned = true,
                    Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                        self.stats.clones_dropped += 1;
                    }
                },
                None => cloned = true,
            }
        }
        if cloned {
            self.stats.clones_emitted += 1;
        }

        ProcessResult { forwarded: frame, verdict, trace, cloned }
    }
}

/// Runs a pcap file through a pipeline: the output pcap carries every input
/// packet unmodified and in order, the clones pcap carries the sampled
/// clones, and the returned stats summarize verdicts. The input is fully
/// validated before any packet is processed.
pub fn run_pcap(
    input: &Path,
    output: &Path,
    clones: &Path,
    config: PipelineConfig,
) -> io::Result<PipelineStats> {
    config
        .validate()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    // Validation pass: any framing error surfaces before work starts.
    {
        let mut reader = PcapReader::new(BufReader::new(File::open(input)?))?;
        while reader.next_packet()?.is_some() {}
    }

    let ingress = input.file_name().map_or_else(
        || "pcap".to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let mut pipeline = Pipeline::new(config, &ingress);
    let mut reader = PcapReader::new(BufReader::new(File::open(input)?))?;
    let mut out = PcapWriter::new(BufWriter::new(File::create(output)?))?;
    let mut clone_out = PcapWriter::new(BufWriter::new(File::create(clones)?))?;

    while let Some(packet) = reader.next_packet()? {
        let result = pipeline.process(&packet.data, packet.timestamp_us);
        out.write_packet(packet.timestamp_us, result.forwarded)?;
        if result.cloned {
            clone_out.write_packet(packet.timestamp_us, &packet.data)?;
        }
    }
    out.flush()?;
    clone_out.flush()?;
    Ok(pipeline.stats)
}
