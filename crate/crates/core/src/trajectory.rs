//! Series samples split into a past window and a future horizon.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Closed value range `[lo, hi]` declared for a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("bounds must be finite with lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// One trajectory: `past` holds the memory window, `future` the horizon
/// to be predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub past: Vec<f64>,
    pub future: Vec<f64>,
}

impl SeriesSample {
    pub fn new(past: Vec<f64>, future: Vec<f64>) -> Result<Self> {
        if past.is_empty() || future.is_empty() {
            return Err(invalid("past and future must both be nonempty"));
        }
        if past.iter().chain(&future).any(|v| !v.is_finite()) {
            return Err(invalid("series entries must be finite"));
        }
        Ok(Self { past, future })
    }

    /// Splits a full trajectory of length `memory + horizon`.
    pub fn split(full: &[f64], memory: usize) -> Result<Self> {
        if memory == 0 || memory >= full.len() {
            return Err(invalid(format!(
                "cannot split length {} at memory {memory}",
                full.len()
            )));
        }
        Self::new(full[..memory].to_vec(), full[memory..].to_vec())
    }

    pub fn memory(&self) -> usize {
        self.past.len()
    }

    pub fn horizon(&self) -> usize {
        self.future.len()
    }

    pub fn within(&self, bounds: &Bounds) -> bool {
        self.past.iter().chain(&self.future).all(|&v| bounds.contains(v))
    }
}
