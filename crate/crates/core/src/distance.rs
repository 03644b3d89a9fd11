//! Trajectory distances used both as set-predictor radii and as control
//! metrics.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::trajectory::Bounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceSpec {
    /// `max_t w_t |a_t - b_t|` with strictly positive weights.
    WeightedMax { weights: Vec<f64> },
    /// `(1/τ) Σ_t |a_t - b_t|`.
    AvgL1,
    /// Largest average absolute difference over any `window` consecutive
    /// slots.
    MaxWindowAvgL1 { window: usize },
}

impl DistanceSpec {
    pub fn uniform_max(horizon: usize) -> Self {
        DistanceSpec::WeightedMax { weights: vec![1.0; horizon] }
    }

    /// Checks parameter invariants and compatibility with trajectories of
    /// length `horizon`.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if horizon == 0 {
            return Err(invalid("trajectory length must be at least 1"));
        }
        match self {
            DistanceSpec::WeightedMax { weights } => {
                check_len(weights.len(), horizon)?;
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(invalid("weighted-max weights must be finite and strictly positive"));
                }
            }
            DistanceSpec::AvgL1 => {}
            DistanceSpec::MaxWindowAvgL1 { window } => {
                if *window == 0 || *window > horizon {
                    return Err(invalid(format!(
                        "window {window} must lie in 1..={horizon}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(a.len(), b.len())?;
        self.validate(a.len())?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Distance without argument validation; callers guarantee lengths.
    pub(crate) fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceSpec::WeightedMax { weights } => a
                .iter()
                .zip(b)
                .zip(weights)
                .map(|((x, y), w)| w * (x - y).abs())
                .fold(0.0, f64::max),
            DistanceSpec::AvgL1 => {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
            }
            DistanceSpec::MaxWindowAvgL1 { window } => {
                let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
                max_window_mean(&diffs, *window)
            }
        }
    }

    /// Largest possible distance between two trajectories of length
    /// `horizon` whose entries lie in `bounds`.
    pub fn diameter(&self, bounds: &Bounds, horizon: usize) -> Result<f64> {
        self.validate(horizon)?;
        Ok(match self {
            DistanceSpec::WeightedMax { weights } => {
                weights.iter().fold(0.0, |m: f64, w| m.max(*w)) * bounds.width()
            }
            DistanceSpec::AvgL1 | DistanceSpec::MaxWindowAvgL1 { .. } => bounds.width(),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceSpec::WeightedMax { .. } => "weighted_max",
            DistanceSpec::AvgL1 => "avg_l1",
            DistanceSpec::MaxWindowAvgL1 { .. } => "max_window_avg_l1",
        }
    }
}

/// `max_{t'} (1/k) Σ_{t=t'}^{t'+k-1} x_t` over all full windows of `k`
/// consecutive slots.
pub fn max_window_mean(x: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= x.len());
    x.windows(k)
        .map(|w| w.iter().sum::<f64>() / k as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}
