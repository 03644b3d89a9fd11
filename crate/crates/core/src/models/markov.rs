use serde::{Deserialize, Serialize};

use super::{check_past, sample_categorical, Capability, DiscreteSequenceModel, Forecaster};
use crate::error::{check_len, invalid, Result};
use crate::rng::StreamRng;

/// First-order Markov chain over a finite alphabet of real values. The last
/// past value is mapped to its nearest symbol (lowest index on ties) and
/// conditions the first future step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    values: Vec<f64>,
    transition: Vec<Vec<f64>>,
    horizon: usize,
}

const SYMBOL_TOL: f64 = 1e-9;

impl MarkovChain {
    pub fn new(values: Vec<f64>, transition: Vec<Vec<f64>>, horizon: usize) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(invalid("alphabet must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("symbol values must be finite"));
        }
        check_len(n, transition.len())?;
        for row in &transition {
            check_len(n, row.len())?;
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(invalid("transition probabilities must be nonnegative"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("transition row sums to {s}, not 1")));
            }
        }
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(Self { values, transition, horizon })
    }

    pub fn nearest_symbol(&self, v: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.values.iter().enumerate() {
            if (s - v).abs() < (self.values[best] - v).abs() {
                best = i;
            }
        }
        best
    }

    fn exact_symbol(&self, v: f64) -> Option<usize> {
        let s = self.nearest_symbol(v);
        ((self.values[s] - v).abs() <= SYMBOL_TOL).then_some(s)
    }
}

impl DiscreteSequenceModel for MarkovChain {
    fn alphabet_size(&self) -> usize {
        self.values.len()
    }

    fn symbol_value(&self, symbol: usize) -> f64 {
        self.values[symbol]
    }

    fn step_pmf(&self, past: &[f64], prefix: &[usize]) -> Result<Vec<f64>> {
        check_past(past, 1)?;
        let state = match prefix.last() {
            Some(&s) => s,
            None => self.nearest_symbol(past[past.len() - 1]),
        };
        Ok(self.transition[state].clone())
    }
}

impl Forecaster for MarkovChain {
    fn capability(&self) -> Capability {
        Capability::Explicit
    }

    fn memory(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample(&self, past: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        let mut prefix = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let pmf = self.step_pmf(past, &prefix)?;
            prefix.push(sample_categorical(&pmf, rng));
        }
        Ok(prefix.into_iter().map(|s| self.values[s]).collect())
    }

    /// Log-probability of the symbol path; `-inf` for values off the
    /// alphabet.
    fn log_density(&self, past: &[f64], future: &[f64]) -> Result<f64> {
        check_past(past, 1)?;
        check_len(self.horizon, future.len())?;
        let mut state = self.nearest_symbol(past[past.len() - 1]);
        let mut total = 0.0;
        for &v in future {
            let Some(s) = self.exact_symbol(v) else {
                return Ok(f64::NEG_INFINITY);
            };
            total += self.transition[state][s].ln();
            state = s;
        }
        Ok(total)
    }

    fn predictive_mean(&self, past: &[f64]) -> Result<Vec<f64>> {
        check_past(past, 1)?;
        let n = self.values.len();
        let mut dist = vec![0.0; n];
        dist[self.nearest_symbol(past[past.len() - 1])] = 1.0;
        let mut out = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let mut next = vec![0.0; n];
            for (i, p) in dist.iter().enumerate() {
                for (j, q) in self.transition[i].iter().enumerate() {
                    next[j] += p * q;
                }
            }
            dist = next;
            out.push(dist.iter().zip(&self.values).map(|(p, v)| p * v).sum());
        }
        Ok(out)
    }

    fn as_discrete(&self) -> Option<&dyn DiscreteSequenceModel> {
        Some(self)
    }
}
