//! TOML configuration shared by the subcommands. Flags override file
//! values; everything is validated before any work starts.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ctgossip_core::challenger::{ChallengerConfig, LogDescriptor, ReassemblyConfig};
use ctgossip_core::merkle::{LogId, LogPublicKey};
use ctgossip_core::pipeline::PipelineConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub challenger: ChallengerSection,
    #[serde(default)]
    pub logs: Vec<LogKeyEntry>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub known_logs: Option<Vec<String>>,
    pub fragment_threshold_bytes: Option<u32>,
    pub sampling_n: Option<u64>,
    pub clone_channel_capacity: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengerSection {
    pub expected_sth_frequency: Option<u32>,
    pub frequency_window_hours: Option<u64>,
    pub reassembly_timeout_ms: Option<u64>,
    pub reassembly_capacity: Option<usize>,
}

/// Verification key material for one log.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogKeyEntry {
    pub name: String,
    pub public_key: LogPublicKey,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: FileConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if let Some(0) = self.pipeline.sampling_n {
            bail!("pipeline.sampling_n must be at least 1");
        }
        if let Some(0) = self.pipeline.fragment_threshold_bytes {
            bail!("pipeline.fragment_threshold_bytes must be positive");
        }
        let mut seen = BTreeSet::new();
        for entry in &self.logs {
            ctgossip_core::merkle::validate_log_name(&entry.name)
                .with_context(|| format!("log entry {:?}", entry.name))?;
            if !seen.insert(entry.name.as_str()) {
                bail!("duplicate log entry {:?}", entry.name);
            }
        }
        Ok(())
    }

    /// Pipeline settings with flag overrides applied.
    pub fn pipeline_config(
        &self,
        known_logs_flag: &[String],
        sampling_n: Option<u64>,
        fragment_threshold: Option<u32>,
    ) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        let mut known: BTreeSet<String> = self
            .pipeline
            .known_logs
            .clone()
            .unwrap_or_default()
            .into_iter()
            .collect();
        known.extend(self.logs.iter().map(|l| l.name.clone()));
        known.extend(known_logs_flag.iter().cloned());
        if known.is_empty() {
            bail!("no known logs: set pipeline.known_logs in the config or pass --known-log");
        }
        config.known_logs = known;
        if let Some(n) = sampling_n.or(self.pipeline.sampling_n) {
            config.sampling_n = n;
        }
        if let Some(t) = fragment_threshold.or(self.pipeline.fragment_threshold_bytes) {
            config.fragment_threshold_bytes = t;
        }
        if let Some(c) = self.pipeline.clone_channel_capacity {
            config.clone_channel_capacity = c;
        }
        config.validate().map_err(anyhow::Error::msg)?;
        Ok(config)
    }

    /// Challenger settings from the config's log key entries plus any
    /// extra descriptors (for instance from imported log state).
    pub fn challenger_config(&self, extra: Vec<LogDescriptor>) -> Result<ChallengerConfig> {
        let mut descriptors: Vec<LogDescriptor> = Vec::new();
        for entry in &self.logs {
            descriptors.push(LogDescriptor {
                log_id: LogId::derive(&entry.name, &entry.public_key)
                    .map_err(anyhow::Error::msg)?,
                public_key: entry.public_key.clone(),
            });
        }
        for descriptor in extra {
            if !descriptors.iter().any(|d| d.log_id == descriptor.log_id) {
                descriptors.push(descriptor);
            }
        }
        if descriptors.is_empty() {
            bail!("no log keys: add [[logs]] entries to the config or pass --log-state");
        }
        let mut config = ChallengerConfig::new(descriptors);
        if let Some(f) = self.challenger.expected_sth_frequency {
            config.expected_sth_frequency = f;
        }
        if let Some(h) = self.challenger.frequency_window_hours {
            config.frequency_window_ms = h * 3_600_000;
        }
        let mut reassembly = ReassemblyConfig::default();
        if let Some(t) = self.challenger.reassembly_timeout_ms {
            reassembly.timeout_ms = t;
        }
        if let Some(c) = self.challenger.reassembly_capacity {
            reassembly.capacity = c;
        }
        config.reassembly = reassembly;
        Ok(config)
    }
}
