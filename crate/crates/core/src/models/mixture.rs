use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_past, gaussian_log_pdf, sample_categorical, Capability, Forecaster};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::StreamRng;
use crate::trajectory::Bounds;

/// Reference level that branch templates are added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Templates are absolute values.
    #[default]
    Absolute,
    /// Templates are offsets from the last past value.
    LastPast,
    /// Templates are offsets from the least-squares line through the past,
    /// evaluated at the last past index.
    LinearFit,
}

impl Anchor {
    pub fn level(&self, past: &[f64]) -> f64 {
        match self {
            Anchor::Absolute => 0.0,
            Anchor::LastPast => past[past.len() - 1],
            Anchor::LinearFit => {
                let n = past.len();
                if n == 1 {
                    return past[0];
                }
                let nf = n as f64;
                let tbar = (nf - 1.0) / 2.0;
                let ybar = past.iter().sum::<f64>() / nf;
                let (mut sty, mut stt) = (0.0, 0.0);
                for (t, y) in past.iter().enumerate() {
                    let dt = t as f64 - tbar;
                    sty += dt * (y - ybar);
                    stt += dt * dt;
                }
                ybar + sty / stt * (nf - 1.0 - tbar)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkingMixtureParams {
    pub templates: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub noise_std: Vec<f64>,
    #[serde(default)]
    pub anchor: Anchor,
}

/// Picks a branch template by probability and adds i.i.d. Gaussian noise.
#[derive(Debug, Clone)]
pub struct ForkingMixture {
    params: ForkingMixtureParams,
    bounds: Option<Bounds>,
}

impl ForkingMixture {
    pub fn new(params: ForkingMixtureParams, bounds: Option<Bounds>) -> Result<Self> {
        let branches = params.templates.len();
        if branches == 0 {
            return Err(invalid("mixture needs at least one branch"));
        }
        check_len(branches, params.probabilities.len())?;
        check_len(branches, params.noise_std.len())?;
        let horizon = params.templates[0].len();
        if horizon == 0 {
            return Err(invalid("templates must be nonempty"));
        }
        for t in &params.templates {
            check_len(horizon, t.len())?;
            if t.iter().any(|v| !v.is_finite()) {
                return Err(invalid("templates must be finite"));
            }
        }
        if params.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("branch probabilities must be nonnegative"));
        }
        let total: f64 = params.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("branch probabilities sum to {total}, not 1")));
        }
        if params.noise_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("branch noise std must be finite and nonnegative"));
        }
        Ok(Self { params, bounds })
    }

    pub fn params(&self) -> &ForkingMixtureParams {
        &self.params
    }
}

impl Forecaster for ForkingMixture {
    fn capability(&self) -> Capability {
        Capability::Explicit
    }

    fn memory(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.params.templates[0].len()
    }

    fn sample(&self, past: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        check_past(past, 1)?;
        let level = self.params.anchor.level(past);
        let b = sample_categorical(&self.params.probabilities, rng);
        let sd = self.params.noise_std[b];
        Ok(self.params.templates[b]
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                let y = level + v + sd * z;
                self.bounds.map_or(y, |bd| bd.clip(y))
            })
            .collect())
    }

    /// Log of the probability-weighted sum of branch densities (clipping
    /// ignored).
    fn log_density(&self, past: &[f64], future: &[f64]) -> Result<f64> {
        check_past(past, 1)?;
        check_len(self.horizon(), future.len())?;
        if self.params.noise_std.iter().any(|s| *s == 0.0) {
            return Err(Error::Unsupported("zero-noise branch has a degenerate density".into()));
        }
        let level = self.params.anchor.level(past);
        let terms: Vec<f64> = self
            .params
            .templates
            .iter()
            .zip(&self.params.probabilities)
            .zip(&self.params.noise_std)
            .filter(|((_, p), _)| **p > 0.0)
            .map(|((tpl, p), sd)| {
                p.ln()
                    + tpl
                        .iter()
                        .zip(future)
                        .map(|(v, y)| gaussian_log_pdf(*y, level + v, *sd))
                        .sum::<f64>()
            })
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(max);
        }
        Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    fn predictive_mean(&self, past: &[f64]) -> Result<Vec<f64>> {
        check_past(past, 1)?;
        let level = self.params.anchor.level(past);
        Ok((0..self.horizon())
            .map(|t| {
                let y = level
                    + self
                        .params
                        .templates
                        .iter()
                        .zip(&self.params.probabilities)
                        .map(|(tpl, p)| p * tpl[t])
                        .sum::<f64>();
                self.bounds.map_or(y, |bd| bd.clip(y))
            })
            .collect())
    }
}
