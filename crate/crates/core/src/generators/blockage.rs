use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::rng::StreamRng;
use crate::trajectory::{Bounds, SeriesSample};

/// Gain profile of one propagation path over the full series length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathProfile {
    /// Linear gains, one per step.
    Explicit { gains: Vec<f64> },
    /// `mean_db + amplitude_db * sin(2π t / period + phase)` in dB.
    Smooth { mean_db: f64, amplitude_db: f64, period: f64, phase: f64 },
}

impl PathProfile {
    pub fn gains(&self, len: usize) -> Result<Vec<f64>> {
        let g = match self {
            PathProfile::Explicit { gains } => {
                check_len(len, gains.len())?;
                gains.clone()
            }
            PathProfile::Smooth { mean_db, amplitude_db, period, phase } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(invalid("profile period must be positive"));
                }
                (0..len)
                    .map(|t| {
                        let db = mean_db
                            + amplitude_db
                                * (2.0 * std::f64::consts::PI * t as f64 / period + phase).sin();
                        10f64.powf(db / 10.0)
                    })
                    .collect()
            }
        };
        if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("path gains must be finite and positive"));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    /// Probability that the obstacle is present in a series.
    pub probability: f64,
    pub start: usize,
    pub length: usize,
    /// Gain factor inside the window when present.
    pub attenuation: f64,
}

/// Channel gains along one of several paths, attenuated by randomly present
/// obstacles and perturbed by log-normal fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockageChannelConfig {
    pub paths: Vec<PathProfile>,
    pub obstacles: Vec<Obstacle>,
    /// Std of the natural-log fading factor.
    pub fading_std: f64,
    pub memory: usize,
    pub horizon: usize,
    pub gain_max: f64,
}

impl Default for BlockageChannelConfig {
    fn default() -> Self {
        Self {
            paths: vec![
                PathProfile::Smooth { mean_db: -95.0, amplitude_db: 2.0, period: 40.0, phase: 0.0 },
                PathProfile::Smooth { mean_db: -96.0, amplitude_db: 1.5, period: 25.0, phase: 1.0 },
            ],
            obstacles: vec![Obstacle { probability: 0.5, start: 31, length: 5, attenuation: 0.1 }],
            fading_std: 0.05,
            memory: 30,
            horizon: 6,
            gain_max: 2e-9,
        }
    }
}

impl BlockageChannelConfig {
    pub fn len(&self) -> usize {
        self.memory + self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Bounds {
        Bounds { lo: 0.0, hi: self.gain_max }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(invalid("channel needs at least one path"));
        }
        if self.memory == 0 || self.horizon == 0 {
            return Err(invalid("memory and horizon must be at least 1"));
        }
        for p in &self.paths {
            p.gains(self.len())?;
        }
        for o in &self.obstacles {
            if !(0.0..=1.0).contains(&o.probability) {
                return Err(invalid(format!("blockage probability {} outside [0, 1]", o.probability)));
            }
            if !(o.attenuation > 0.0 && o.attenuation < 1.0) {
                return Err(invalid(format!("attenuation {} outside (0, 1)", o.attenuation)));
            }
        }
        if !(self.fading_std.is_finite() && self.fading_std >= 0.0) {
            return Err(invalid("fading std must be finite and nonnegative"));
        }
        if !(self.gain_max.is_finite() && self.gain_max > 0.0) {
            return Err(invalid("gain_max must be positive"));
        }
        Ok(())
    }

    /// Draws one series and reports which obstacles were present.
    pub fn sample_with_blockage(&self, rng: &mut StreamRng) -> Result<(SeriesSample, Vec<bool>)> {
        let len = self.len();
        let path = rng.random_range(0..self.paths.len());
        let mut g = self.paths[path].gains(len)?;
        let mut active = Vec::with_capacity(self.obstacles.len());
        for o in &self.obstacles {
            let on = rng.random::<f64>() < o.probability;
            if on {
                for v in g.iter_mut().skip(o.start).take(o.length) {
                    *v *= o.attenuation;
                }
            }
            active.push(on);
        }
        for v in g.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = (*v * (self.fading_std * z).exp()).clamp(0.0, self.gain_max);
        }
        let future = g.split_off(self.memory);
        Ok((SeriesSample { past: g, future }, active))
    }
}
