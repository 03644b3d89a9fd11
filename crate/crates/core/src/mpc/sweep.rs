use serde::{Deserialize, Serialize};

use super::harq::{decoding_rate, pooled_energy_per_bit, run_closed_loop_harq, CalibratedStepPredictor, HarqProblem};
use crate::calibrate::{pts_crc_calibrate, PtsCrcSettings};
use crate::error::{invalid, Result};
use crate::generators::GeneratorConfig;
use crate::models::Forecaster;
use crate::trajectory::SeriesSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub lambda: f64,
    pub decoding_rate: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub energy_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub rows: Vec<SweepRow>,
    /// Cheapest level (energy per bit) whose decoding rate reaches the
    /// target; earlier grid entries win ties.
    pub chosen: Option<f64>,
}

/// Calibrates at every level in `alphas`, runs `episodes` held-out
/// closed-loop episodes with `seed`, and picks a level meeting the
/// decoding-probability target `delta`.
#[allow(clippy::too_many_arguments)]
pub fn select_alpha_for_delta(
    model: &dyn Forecaster,
    cal: &[SeriesSample],
    env: &GeneratorConfig,
    problem: &HarqProblem,
    base: &PtsCrcSettings,
    alphas: &[f64],
    delta: f64,
    episodes: usize,
    seed: u64,
) -> Result<AlphaSweep> {
    if alphas.is_empty() || episodes == 0 {
        return Err(invalid("sweep needs at least one level and one episode"));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let spec = pts_crc_calibrate(model, cal, &PtsCrcSettings { alpha, ..base.clone() })?;
        let policy = CalibratedStepPredictor { spec: &spec, model, seed };
        let eps = run_closed_loop_harq(env, problem, &policy, seed, episodes)?;
        rows.push(SweepRow {
            alpha,
            lambda: spec.lambda,
            decoding_rate: decoding_rate(&eps),
            energy_per_bit: pooled_energy_per_bit(&eps, problem),
        });
    }
    let chosen = rows
        .iter()
        .filter(|r| r.decoding_rate >= delta)
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.energy_per_bit <= r.energy_per_bit => Some(b),
            _ => Some(r),
        })
        .map(|r| r.alpha);
    Ok(AlphaSweep { rows, chosen })
}
