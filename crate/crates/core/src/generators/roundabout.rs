use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::models::{sample_categorical, Anchor, ForkingMixtureParams};
use crate::rng::StreamRng;
use crate::trajectory::{Bounds, SeriesSample};

/// Vehicle angle on a circular road with a random exit branch.
///
/// The angle advances by `angular_speed` per step from a uniform start in
/// `start_angle`. Exit `e` leaves the circle at step `exit_times[e]` and
/// from then on moves by `exit_slopes[e]` per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundaboutConfig {
    pub exit_probabilities: Vec<f64>,
    pub exit_times: Vec<usize>,
    pub exit_slopes: Vec<f64>,
    pub angular_speed: f64,
    pub start_angle: [f64; 2],
    pub noise_std: f64,
    pub memory: usize,
    pub horizon: usize,
    pub bounds: Bounds,
}

impl Default for RoundaboutConfig {
    fn default() -> Self {
        Self {
            exit_probabilities: vec![0.5, 0.5],
            exit_times: vec![31, 31],
            exit_slopes: vec![0.35, -0.15],
            angular_speed: 0.1,
            start_angle: [0.3, 0.6],
            noise_std: 0.02,
            memory: 30,
            horizon: 6,
            bounds: Bounds { lo: 0.0, hi: 2.0 * std::f64::consts::PI },
        }
    }
}

impl RoundaboutConfig {
    pub fn validate(&self) -> Result<()> {
        let exits = self.exit_probabilities.len();
        if exits == 0 {
            return Err(invalid("roundabout needs at least one exit"));
        }
        check_len(exits, self.exit_times.len())?;
        check_len(exits, self.exit_slopes.len())?;
        if self.exit_probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("exit probabilities must be nonnegative"));
        }
        let total: f64 = self.exit_probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("exit probabilities sum to {total}, not 1")));
        }
        if self.memory == 0 || self.horizon == 0 {
            return Err(invalid("memory and horizon must be at least 1"));
        }
        let len = self.memory + self.horizon;
        if let Some(t) = self.exit_times.iter().find(|t| **t >= len) {
            return Err(invalid(format!("exit time {t} not below series length {len}")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(invalid("noise std must be finite and nonnegative"));
        }
        let [a, b] = self.start_angle;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(invalid("start angle range must be finite with lo <= hi"));
        }
        if !self.angular_speed.is_finite() || self.exit_slopes.iter().any(|s| !s.is_finite()) {
            return Err(invalid("speeds must be finite"));
        }
        Bounds::new(self.bounds.lo, self.bounds.hi)?;
        Ok(())
    }

    /// Noise-free angle at step `t` relative to the start angle, on branch `exit`.
    pub fn displacement(&self, exit: usize, t: usize) -> f64 {
        let te = self.exit_times[exit];
        if t <= te {
            self.angular_speed * t as f64
        } else {
            self.angular_speed * te as f64 + self.exit_slopes[exit] * (t - te) as f64
        }
    }

    /// Draws one series and reports the chosen exit.
    pub fn sample_with_exit(&self, rng: &mut StreamRng) -> (SeriesSample, usize) {
        let exit = sample_categorical(&self.exit_probabilities, rng);
        let [a, b] = self.start_angle;
        let start = if a < b { rng.random_range(a..b) } else { a };
        let full: Vec<f64> = (0..self.memory + self.horizon)
            .map(|t| {
                let z: f64 = StandardNormal.sample(rng);
                self.bounds.clip(start + self.displacement(exit, t) + self.noise_std * z)
            })
            .collect();
        let sample = SeriesSample {
            past: full[..self.memory].to_vec(),
            future: full[self.memory..].to_vec(),
        };
        (sample, exit)
    }

    /// Mixture forecaster with one branch per exit, templates measured from
    /// a line fitted to the past. Exact up to noise when every exit happens
    /// at or after the last past step.
    pub fn branch_mixture(&self, noise_std: f64) -> ForkingMixtureParams {
        let last = self.memory - 1;
        let templates = (0..self.exit_probabilities.len())
            .map(|e| {
                (0..self.horizon)
                    .map(|t| self.displacement(e, self.memory + t) - self.displacement(e, last))
                    .collect()
            })
            .collect();
        ForkingMixtureParams {
            templates,
            probabilities: self.exit_probabilities.clone(),
            noise_std: vec![noise_std; self.exit_probabilities.len()],
            anchor: Anchor::LinearFit,
        }
    }
}
