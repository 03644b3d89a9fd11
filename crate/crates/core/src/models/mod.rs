//! Probabilistic forecasters and prototype sampling.
//!
//! A forecaster maps a past window to a distribution over future
//! trajectories. Implicit forecasters can only sample; explicit ones also
//! evaluate the log-density of a trajectory, which enables likelihood-aware
//! prototype filtering ([`FilterSpec`]).

mod ar;
mod config;
mod filter;
mod knn;
mod markov;
mod mixture;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub use ar::{GaussianAr, GaussianArParams};
pub use config::{CorpusSource, ModelConfig};
pub use filter::{draw_prototypes, sequence_level_select, top_k_constrained_sample, FilterSpec};
pub use knn::KnnBootstrap;
pub use markov::MarkovChain;
pub use mixture::{Anchor, ForkingMixture, ForkingMixtureParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    /// Sampling only.
    Implicit,
    /// Sampling plus log-density evaluation.
    Explicit,
}

pub trait Forecaster: Send + Sync {
    fn capability(&self) -> Capability;

    /// Minimum past length accepted by [`sample`](Self::sample).
    fn memory(&self) -> usize;

    /// Length of sampled futures.
    fn horizon(&self) -> usize;

    /// Draws one future trajectory. Successive calls on the same stream are
    /// conditionally independent given `past`.
    fn sample(&self, past: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>>;

    /// `count` successive draws; equivalent to calling
    /// [`sample`](Self::sample) `count` times on the same stream.
    fn sample_many(&self, past: &[f64], count: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        (0..count).map(|_| self.sample(past, rng)).collect()
    }

    fn log_density(&self, _past: &[f64], _future: &[f64]) -> Result<f64> {
        Err(Error::Capability("implicit forecaster has no density".into()))
    }

    /// Point forecast used by the single-prototype baseline.
    fn predictive_mean(&self, _past: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Unsupported("forecaster has no predictive mean".into()))
    }

    /// Finite-alphabet view, for per-step top-k sampling.
    fn as_discrete(&self) -> Option<&dyn DiscreteSequenceModel> {
        None
    }
}

/// Explicit model over a finite alphabet of real-valued symbols.
pub trait DiscreteSequenceModel {
    fn alphabet_size(&self) -> usize;

    fn symbol_value(&self, symbol: usize) -> f64;

    /// Next-symbol pmf given the observed past and the symbols sampled so
    /// far in the future.
    fn step_pmf(&self, past: &[f64], prefix: &[usize]) -> Result<Vec<f64>>;
}

pub(crate) fn check_past(past: &[f64], memory: usize) -> Result<()> {
    if past.len() < memory {
        return Err(Error::InvalidArgument(format!(
            "past has {} values, forecaster needs at least {memory}",
            past.len()
        )));
    }
    if past.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("past contains non-finite values".into()));
    }
    Ok(())
}

pub(crate) fn gaussian_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Draws an index from unnormalised nonnegative weights.
pub(crate) fn sample_categorical(weights: &[f64], rng: &mut StreamRng) -> usize {
    use rand::Rng;
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
