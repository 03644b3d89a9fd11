//! Experiment runner: configuration files in, CSV/JSON artifacts and a run
//! manifest out.

pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod pipelines;
pub mod summary;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PTSCRC_OUT_DIR";

/// `--out`, then the config's `output_dir`, then the environment, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
