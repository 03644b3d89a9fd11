use serde::{Deserialize, Serialize};

use crate::distance::DistanceSpec;
use crate::error::{invalid, Result};
use crate::predictor::{BallUnionPredictor, PrototypeSet};
use crate::trajectory::Bounds;

/// Set-monotone loss with its upper bound `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `1{y ∉ Γ}`.
    Miscoverage,
    /// Fraction of steps whose value falls outside the per-step set.
    PerSampleRate,
    /// Distance from `y` to the set, `max(0, min_j d(y, ŷ^j) - λ)`, with
    /// distances capped at `bound`.
    MinDistance { bound: f64 },
}

impl LossSpec {
    /// Min-distance loss bounded by the diameter of `bounds` under `distance`.
    pub fn min_distance(distance: &DistanceSpec, bounds: &Bounds, horizon: usize) -> Result<Self> {
        Ok(LossSpec::MinDistance { bound: distance.diameter(bounds, horizon)? })
    }

    pub fn bound(&self) -> f64 {
        match self {
            LossSpec::Miscoverage | LossSpec::PerSampleRate => 1.0,
            LossSpec::MinDistance { bound } => *bound,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Miscoverage => "miscoverage",
            LossSpec::PerSampleRate => "per_sample_rate",
            LossSpec::MinDistance { .. } => "min_distance",
        }
    }

    pub fn validate(&self, distance: &DistanceSpec) -> Result<()> {
        match self {
            LossSpec::Miscoverage => Ok(()),
            LossSpec::PerSampleRate => match distance {
                DistanceSpec::WeightedMax { .. } => Ok(()),
                other => Err(invalid(format!(
                    "per-sample rate loss needs a weighted-max distance, got {}",
                    other.name()
                ))),
            },
            LossSpec::MinDistance { bound } if bound.is_finite() && *bound > 0.0 => Ok(()),
            LossSpec::MinDistance { bound } => Err(invalid(format!("loss bound must be positive, got {bound}"))),
        }
    }

    /// Loss of the predictor on the realised future `y`.
    pub fn loss(&self, pred: &BallUnionPredictor, y: &[f64]) -> Result<f64> {
        self.validate(pred.distance())?;
        self.curve(pred.prototypes(), pred.distance(), y)?.at(pred.lambda())
    }

    /// The item's loss as a function of the threshold.
    pub fn curve(&self, prototypes: &PrototypeSet, distance: &DistanceSpec, y: &[f64]) -> Result<LossCurve> {
        Ok(match self {
            LossSpec::Miscoverage => LossCurve::Step {
                breakpoints: vec![crate::predictor::min_distance_to_prototypes(y, prototypes, distance)?],
                weight: 1.0,
            },
            LossSpec::PerSampleRate => {
                let DistanceSpec::WeightedMax { .. } = distance else {
                    return Err(invalid("per-sample rate loss needs a weighted-max distance"));
                };
                let scores = BallUnionPredictor::new(prototypes.clone(), distance.clone(), 0.0)?.per_step_scores(y)?;
                let weight = 1.0 / scores.len() as f64;
                LossCurve::Step { breakpoints: scores, weight }
            }
            LossSpec::MinDistance { bound } => LossCurve::Hinge {
                distance: crate::predictor::min_distance_to_prototypes(y, prototypes, distance)?.min(*bound),
            },
        })
    }
}

/// Nonincreasing, right-continuous loss of one item as a function of λ.
#[derive(Debug, Clone, PartialEq)]
pub enum LossCurve {
    /// `weight · #{b > λ}`.
    Step { breakpoints: Vec<f64>, weight: f64 },
    /// `max(0, distance - λ)`.
    Hinge { distance: f64 },
}

impl LossCurve {
    pub fn at(&self, lambda: f64) -> Result<f64> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(invalid(format!("threshold must be nonnegative, got {lambda}")));
        }
        Ok(match self {
            LossCurve::Step { breakpoints, weight } => {
                weight * breakpoints.iter().filter(|b| **b > lambda).count() as f64
            }
            LossCurve::Hinge { distance } => (distance - lambda).max(0.0),
        })
    }
}
