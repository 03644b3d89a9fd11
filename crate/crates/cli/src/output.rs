//! Artifact files and the episode CSV schema.

use std::path::{Path, PathBuf};

use ptscrc::io::format_f64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

/// Writes files into one directory and remembers their digests.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<ArtifactRecord>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.written
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.retain(|r| r.path != name);
        self.written.push(ArtifactRecord { path: name.to_string(), sha256: hex(&Sha256::digest(bytes)) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        self.write(name, &bytes)
    }
}

pub fn f(v: f64) -> String {
    format_f64(v)
}

pub fn opt_f(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
}

pub const EPISODE_HEADER: [&str; 15] = [
    "config",
    "method",
    "seed",
    "episode",
    "feasible",
    "objective",
    "constraint_slack_min",
    "interference",
    "gamma",
    "kkt_residual",
    "delay",
    "decoded",
    "throughput",
    "energy",
    "energy_per_bit",
];

/// One closed- or open-loop episode; fields that do not apply stay empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeRow {
    pub config: String,
    pub method: String,
    pub seed: u64,
    pub episode: usize,
    pub feasible: Option<bool>,
    pub objective: Option<f64>,
    pub constraint_slack_min: Option<f64>,
    pub interference: Option<f64>,
    pub gamma: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub delay: Option<usize>,
    pub decoded: Option<bool>,
    pub throughput: Option<f64>,
    pub energy: Option<f64>,
    pub energy_per_bit: Option<f64>,
}

impl EpisodeRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.config.clone(),
            self.method.clone(),
            self.seed.to_string(),
            self.episode.to_string(),
            opt_bool(self.feasible),
            opt_f(self.objective),
            opt_f(self.constraint_slack_min),
            opt_f(self.interference),
            opt_f(self.gamma),
            opt_f(self.kkt_residual),
            self.delay.map(|d| d.to_string()).unwrap_or_default(),
            opt_bool(self.decoded),
            opt_f(self.throughput),
            opt_f(self.energy),
            opt_f(self.energy_per_bit),
        ]
    }
}

pub fn episode_records(rows: &[EpisodeRow]) -> Vec<Vec<String>> {
    rows.iter().map(EpisodeRow::record).collect()
}
