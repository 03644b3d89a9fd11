use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::output::ArtifactRecord;

/// A named random stream family: all draws of a stage come from
/// `(seed, domain, index)` streams with this seed and domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamRecord {
    pub stage: String,
    pub seed: u64,
    pub domain: String,
}

impl StreamRecord {
    pub fn new(stage: &str, seed: u64, domain: &str) -> Self {
        Self { stage: stage.to_string(), seed, domain: domain.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub streams: Vec<StreamRecord>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub created_unix: u64,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &ExperimentConfig, streams: Vec<StreamRecord>, artifacts: &[ArtifactRecord]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "ptscrc",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            streams,
            created_unix: timestamp(),
            artifacts: artifacts.to_vec(),
        }
    }
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
