//! Experiment configuration files (TOML or JSON).

use std::path::{Path, PathBuf};

use ptscrc::calibrate::LossSpec;
use ptscrc::generators::GeneratorConfig;
use ptscrc::models::{FilterSpec, ModelConfig};
use ptscrc::DistanceSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harq: Option<HarqBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<FigureBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    /// Series written by `generate`.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_n")]
    pub n_cal: usize,
    #[serde(default = "default_n")]
    pub n_test: usize,
    /// Series files used instead of generated data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_csv: Option<PathBuf>,
    #[serde(default)]
    pub format: DataFormat,
}

fn default_n() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// Conformal risk control on a union of balls around sampled prototypes.
    PtsCrc,
    /// Split conformal prediction around the predictive mean.
    TsCp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationBlock {
    pub method: CalibrationMethod,
    pub alpha: f64,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default)]
    pub filter: FilterSpec,
    /// Defaults to the unweighted max distance over the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceSpec>,
    /// Defaults to miscoverage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    /// Previously calibrated predictor to load instead of calibrating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMethod {
    /// Calibrated set of `m` sampled prototypes.
    PtsCrc,
    /// Calibrated single sampled prototype.
    TsCrc,
    /// Point forecast treated as exact: no radius, no margin.
    UncertaintyUnaware,
}

impl ControlMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ControlMethod::PtsCrc => "pts_crc",
            ControlMethod::TsCrc => "ts_crc",
            ControlMethod::UncertaintyUnaware => "uncertainty_unaware",
        }
    }
}

fn power_methods() -> Vec<ControlMethod> {
    vec![ControlMethod::PtsCrc, ControlMethod::UncertaintyUnaware]
}

fn harq_methods() -> Vec<ControlMethod> {
    vec![ControlMethod::PtsCrc, ControlMethod::TsCrc, ControlMethod::UncertaintyUnaware]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerBlock {
    #[serde(default = "unit")]
    pub p_max: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "default_noise")]
    pub noise_density: f64,
    /// Interference averaging windows `k`.
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    #[serde(default = "default_power_betas")]
    pub betas: Vec<f64>,
    /// Calibration level in gain units.
    pub alpha: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "power_methods")]
    pub methods: Vec<ControlMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarqBlock {
    #[serde(default = "unit")]
    pub p_max: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "default_noise")]
    pub noise_density: f64,
    #[serde(default = "default_slot")]
    pub slot_duration: f64,
    #[serde(default = "default_harq_betas")]
    pub betas: Vec<f64>,
    /// Calibration level in gain units; ignored when `sweep` is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "harq_methods")]
    pub methods: Vec<ControlMethod>,
}

/// Picks the level from a grid so that held-out decoding reaches `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub alphas: Vec<f64>,
    pub delta: f64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
}

fn unit() -> f64 {
    1.0
}
fn default_bandwidth() -> f64 {
    120e3
}
fn default_noise() -> f64 {
    1e-15
}
fn default_slot() -> f64 {
    1e-3
}
fn default_windows() -> Vec<usize> {
    vec![1]
}
fn default_power_betas() -> Vec<f64> {
    vec![0.5]
}
fn default_harq_betas() -> Vec<f64> {
    vec![0.2]
}
fn default_m() -> usize {
    8
}
fn default_episodes() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureBlock {
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Miscoverage levels swept by the coverage figure.
    #[serde(default = "default_alpha_grid")]
    pub alphas: Vec<f64>,
    /// Prototype counts swept by the inefficiency figure.
    #[serde(default = "default_m_grid")]
    pub ms: Vec<usize>,
    /// Oversampling factor of the likelihood-filtered variant.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_replications() -> usize {
    5
}
fn default_alpha_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
}
fn default_m_grid() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}
fn default_kappa() -> f64 {
    1.0
}

impl Default for FigureBlock {
    fn default() -> Self {
        Self { replications: default_replications(), alphas: default_alpha_grid(), ms: default_m_grid(), kappa: default_kappa() }
    }
}

impl ExperimentConfig {
    /// Parses TOML or JSON, chosen by the file extension (`.json` is JSON,
    /// anything else TOML).
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.check_version()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check_version()?;
        Ok(cfg)
    }

    fn check_version(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            )));
        }
        Ok(())
    }

    /// JSON with sorted keys and shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        // serde_json's map type is ordered by key unless `preserve_order` is on
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn require<'a, T>(&self, block: &'a Option<T>, name: &str, subcommand: &str) -> CliResult<&'a T> {
        block.as_ref().ok_or_else(|| CliError::Config(format!("{name}: block is required by `{subcommand}`")))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
