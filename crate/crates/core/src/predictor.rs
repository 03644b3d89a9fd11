//! Prototype-based ball-union set predictors and their per-step geometry.

use serde::{Deserialize, Serialize};

use crate::distance::DistanceSpec;
use crate::error::{check_len, invalid, Error, Result};
use crate::interval::{Interval, IntervalUnion};
use crate::trajectory::Bounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    prototypes: Vec<Vec<f64>>,
}

impl PrototypeSet {
    pub fn new(prototypes: Vec<Vec<f64>>) -> Result<Self> {
        let first = prototypes
            .first()
            .ok_or_else(|| invalid("prototype set must contain at least one trajectory"))?;
        if first.is_empty() {
            return Err(invalid("prototypes must have length at least 1"));
        }
        for p in &prototypes {
            check_len(first.len(), p.len())?;
        }
        Ok(Self { prototypes })
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.prototypes.iter().map(Vec::as_slice)
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.prototypes
    }

    /// Keeps the first `horizon` steps of every prototype.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon() {
            return Err(invalid(format!("cannot truncate to {horizon} steps")));
        }
        Ok(Self {
            prototypes: self.prototypes.iter().map(|p| p[..horizon].to_vec()).collect(),
        })
    }
}

/// `min_j d(y, ŷ^j)` over the prototype set.
pub fn min_distance_to_prototypes(y: &[f64], set: &PrototypeSet, spec: &DistanceSpec) -> Result<f64> {
    check_len(set.horizon(), y.len())?;
    spec.validate(y.len())?;
    Ok(set
        .iter()
        .map(|p| spec.distance_unchecked(y, p))
        .fold(f64::INFINITY, f64::min))
}

/// All trajectories within `lambda` of at least one prototype. A `lambda`
/// of `+inf` denotes the full trajectory space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallUnionPredictor {
    prototypes: PrototypeSet,
    distance: DistanceSpec,
    #[serde(with = "crate::io::extended_f64")]
    lambda: f64,
}

impl BallUnionPredictor {
    pub fn new(prototypes: PrototypeSet, distance: DistanceSpec, lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(invalid(format!("threshold must be nonnegative, got {lambda}")));
        }
        distance.validate(prototypes.horizon())?;
        Ok(Self { prototypes, distance, lambda })
    }

    pub fn prototypes(&self) -> &PrototypeSet {
        &self.prototypes
    }

    pub fn distance(&self) -> &DistanceSpec {
        &self.distance
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> usize {
        self.prototypes.horizon()
    }

    pub fn is_full_space(&self) -> bool {
        self.lambda == f64::INFINITY
    }

    pub fn min_distance(&self, y: &[f64]) -> Result<f64> {
        min_distance_to_prototypes(y, &self.prototypes, &self.distance)
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        Ok(self.min_distance(y)? <= self.lambda)
    }

    fn weights(&self) -> Result<&[f64]> {
        match &self.distance {
            DistanceSpec::WeightedMax { weights } => Ok(weights),
            other => Err(Error::Unsupported(format!(
                "per-step sets need a weighted-max distance, predictor uses {}",
                other.name()
            ))),
        }
    }

    /// Values reachable at step `t` by some member of the set: the union of
    /// `[ŷ^j_t - λ/w_t, ŷ^j_t + λ/w_t]` over prototypes.
    pub fn per_step_set(&self, t: usize) -> Result<IntervalUnion> {
        let weights = self.weights()?;
        if t >= self.horizon() {
            return Err(invalid(format!("step {t} outside horizon {}", self.horizon())));
        }
        let r = self.lambda / weights[t];
        let ivs = self
            .prototypes
            .iter()
            .map(|p| Interval { lo: p[t] - r, hi: p[t] + r })
            .collect();
        Ok(IntervalUnion::from_intervals(ivs))
    }

    /// Per-step distances `min_j w_t |y_t - ŷ^j_t|`; `y_t` lies in the step-`t`
    /// set exactly when its entry is at most `lambda`.
    pub fn per_step_scores(&self, y: &[f64]) -> Result<Vec<f64>> {
        let weights = self.weights()?;
        check_len(self.horizon(), y.len())?;
        Ok((0..y.len())
            .map(|t| {
                self.prototypes
                    .iter()
                    .map(|p| weights[t] * (y[t] - p[t]).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// Time-averaged Lebesgue measure of the per-step sets.
    pub fn inefficiency(&self) -> Result<f64> {
        let tau = self.horizon();
        let mut total = 0.0;
        for t in 0..tau {
            total += self.per_step_set(t)?.measure();
        }
        Ok(total / tau as f64)
    }

    /// As [`inefficiency`](Self::inefficiency) with every per-step set
    /// intersected with the value domain. The full-space sentinel measures
    /// the domain width.
    pub fn inefficiency_within(&self, bounds: &Bounds) -> Result<f64> {
        let tau = self.horizon();
        let mut total = 0.0;
        for t in 0..tau {
            total += self.per_step_set(t)?.clip(bounds.lo, bounds.hi).measure();
        }
        Ok(total / tau as f64)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.prototypes.clone(), self.distance.clone(), lambda)
    }
}
