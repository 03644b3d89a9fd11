use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::power::achieved_rate;
use crate::calibrate::{make_test_predictor, CalibratedPredictorSpec};
use crate::distance::DistanceSpec;
use crate::error::{check_len, invalid, Result};
use crate::generators::GeneratorConfig;
use crate::models::Forecaster;
use crate::predictor::{BallUnionPredictor, PrototypeSet};
use crate::rng::{derive_seed, StreamDomain, StreamRng};
use crate::trajectory::SeriesSample;

/// Accumulated rate counts as decoded within this many bits of the target.
pub const RATE_TOLERANCE: f64 = 1e-9;

/// Lipschitz constant of the per-slot rate `log2(1 + P g / (B N0))` in `g`
/// for `P ≤ P_max`.
pub fn lipschitz_rate(p_max: f64, bandwidth: f64, noise_density: f64) -> f64 {
    p_max / (bandwidth * noise_density * std::f64::consts::LN_2)
}

/// Message rate: what the last `horizon` past slots carried at power
/// `β P_max`.
pub fn harq_target_rate(
    past_gains: &[f64],
    beta: f64,
    p_max: f64,
    bandwidth: f64,
    noise_density: f64,
    horizon: usize,
) -> Result<f64> {
    if past_gains.len() < horizon {
        return Err(invalid(format!("past of length {} shorter than horizon {horizon}", past_gains.len())));
    }
    let recent = &past_gains[past_gains.len() - horizon..];
    achieved_rate(recent, &vec![beta * p_max; horizon], bandwidth, noise_density)
}

/// Lower gain envelope of an average-L1 ball union over `horizon` slots:
/// `min_j max(0, ĝ^j_t - horizon·λ)`.
pub fn gain_envelope(pred: &BallUnionPredictor) -> Result<Vec<f64>> {
    if !matches!(pred.distance(), DistanceSpec::AvgL1) {
        return Err(invalid(format!("gain envelope needs the average-L1 distance, got {}", pred.distance().name())));
    }
    let tau = pred.horizon();
    if pred.is_full_space() {
        return Ok(vec![0.0; tau]);
    }
    let drop = tau as f64 * pred.lambda();
    Ok((0..tau)
        .map(|t| pred.prototypes().iter().map(|g| (g[t] - drop).max(0.0)).fold(f64::INFINITY, f64::min))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HarqDecision {
    Transmit(Vec<f64>),
    NoTransmit,
}

/// Minimum total power with `Σ_t log2(1 + P_t g_t / (B N0)) ≥ target` and
/// `0 ≤ P_t ≤ P_max`, by inverse water-filling
/// `P_t = clip(ν - B N0 / g_t, 0, P_max)` with bisection on `ν`.
pub fn inverse_water_filling(
    gains: &[f64],
    target: f64,
    p_max: f64,
    bandwidth: f64,
    noise_density: f64,
) -> Result<HarqDecision> {
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(invalid("gains must be finite and nonnegative"));
    }
    if target <= 0.0 {
        return Ok(HarqDecision::Transmit(vec![0.0; gains.len()]));
    }
    let noise = bandwidth * noise_density;
    let levels: Vec<Option<f64>> = gains.iter().map(|g| (*g > 0.0).then(|| noise / g)).collect();
    let alloc = |nu: f64| -> Vec<f64> {
        levels.iter().map(|l| l.map_or(0.0, |l| (nu - l).clamp(0.0, p_max))).collect()
    };
    let rate = |p: &[f64]| achieved_rate(gains, p, bandwidth, noise_density).unwrap_or(0.0);
    let worst = levels.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY || rate(&alloc(p_max + worst)) < target {
        return Ok(HarqDecision::NoTransmit);
    }
    let (mut lo, mut hi) = (0.0f64, p_max + worst);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(&alloc(mid));
        if r >= target {
            hi = mid;
            if r - target <= 1e-10 {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(HarqDecision::Transmit(alloc(hi)))
}

/// Physical and protocol constants of the retransmission loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarqProblem {
    /// Maximum number of transmissions.
    pub horizon: usize,
    pub p_max: f64,
    pub bandwidth: f64,
    pub noise_density: f64,
    /// Message rate as a fraction of the past full-power rate.
    pub beta: f64,
    /// Slot length in seconds.
    pub slot_duration: f64,
}

impl HarqProblem {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("bandwidth", self.bandwidth),
            ("noise_density", self.noise_density),
            ("slot_duration", self.slot_duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid("beta must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> f64 {
        lipschitz_rate(self.p_max, self.bandwidth, self.noise_density)
    }
}

/// One step of the receding-horizon policy: plan powers over the remaining
/// slots against the envelope of `pred`, with the rate target raised by
/// `L α τ'` bits.
pub fn solve_harq_step(
    residual_rate: f64,
    pred: &BallUnionPredictor,
    alpha: f64,
    problem: &HarqProblem,
) -> Result<HarqDecision> {
    let remaining = pred.horizon();
    if residual_rate <= 0.0 {
        return Ok(HarqDecision::Transmit(vec![0.0; remaining]));
    }
    let envelope = gain_envelope(pred)?;
    let target = residual_rate + problem.lipschitz() * alpha * remaining as f64;
    inverse_water_filling(&envelope, target, problem.p_max, problem.bandwidth, problem.noise_density)
}

/// Source of set predictors for the remaining horizon at each step.
pub trait StepPredictor: Sync {
    /// Predictor over the next `remaining` slots given the latest past
    /// window.
    fn predict(&self, window: &[f64], remaining: usize, episode: usize, step: usize) -> Result<BallUnionPredictor>;

    /// Reliability level that sets the rate margin.
    fn alpha(&self) -> f64;
}

/// Fresh conditional prototypes each step, truncated to the remaining
/// slots, with the calibrated radius reused.
pub struct CalibratedStepPredictor<'a> {
    pub spec: &'a CalibratedPredictorSpec,
    pub model: &'a dyn Forecaster,
    pub seed: u64,
}

impl StepPredictor for CalibratedStepPredictor<'_> {
    fn predict(&self, window: &[f64], remaining: usize, episode: usize, step: usize) -> Result<BallUnionPredictor> {
        let horizon = self.model.horizon() as u64;
        let index = episode as u64 * horizon + step as u64;
        let mut rng = StreamRng::new(derive_seed(self.seed, "harq-prototypes"), StreamDomain::TestPrototypes, index);
        let full = make_test_predictor(self.spec, self.model, window, &mut rng)?;
        BallUnionPredictor::new(full.prototypes().truncated(remaining)?, DistanceSpec::AvgL1, full.lambda())
    }

    fn alpha(&self) -> f64 {
        self.spec.alpha
    }
}

/// Prototypes equal to the realised future, zero radius and margin.
pub struct OracleStepPredictor<'a> {
    pub future: &'a [f64],
}

impl StepPredictor for OracleStepPredictor<'_> {
    fn predict(&self, _window: &[f64], remaining: usize, _episode: usize, _step: usize) -> Result<BallUnionPredictor> {
        let rest = self.future[self.future.len() - remaining..].to_vec();
        BallUnionPredictor::new(PrototypeSet::new(vec![rest])?, DistanceSpec::AvgL1, 0.0)
    }

    fn alpha(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqEpisode {
    pub decoded: bool,
    /// Slot index at which decoding succeeded, or the horizon on failure.
    pub delay: usize,
    pub slots_used: usize,
    /// Message rate in bits/s/Hz.
    pub target_rate: f64,
    /// Joules spent.
    pub energy: f64,
    /// Message bits over airtime, bits/s (0 when not decoded).
    pub throughput: f64,
    /// Joules per delivered bit (`+∞` when not decoded).
    pub energy_per_bit: f64,
    pub powers: Vec<f64>,
}

/// Runs the receding-horizon loop on one series: past gains are observed,
/// future gains are revealed one slot at a time.
pub fn run_harq_episode(
    series: &SeriesSample,
    problem: &HarqProblem,
    predictor: &dyn StepPredictor,
    episode: usize,
) -> Result<HarqEpisode> {
    problem.validate()?;
    let tau = problem.horizon;
    check_len(tau, series.future.len())?;
    let target = harq_target_rate(&series.past, problem.beta, problem.p_max, problem.bandwidth, problem.noise_density, tau)?;
    let memory = series.past.len();
    let full: Vec<f64> = series.past.iter().chain(&series.future).copied().collect();
    let mut accumulated = 0.0;
    let mut energy = 0.0;
    let mut powers = Vec::with_capacity(tau);
    let mut decoded_at = None;
    for t in 0..tau {
        let remaining = tau - t;
        let residual = target - accumulated;
        let power = if residual <= 0.0 {
            0.0
        } else {
            let window = &full[t..memory + t];
            let pred = predictor.predict(window, remaining, episode, t)?;
            match solve_harq_step(residual, &pred, predictor.alpha(), problem)? {
                HarqDecision::Transmit(p) => p[0],
                HarqDecision::NoTransmit => 0.0,
            }
        };
        let g = series.future[t];
        accumulated += achieved_rate(&[g], &[power], problem.bandwidth, problem.noise_density)?;
        energy += power * problem.slot_duration;
        powers.push(power);
        if accumulated >= target - RATE_TOLERANCE {
            decoded_at = Some(t);
            break;
        }
    }
    let slots_used = powers.len();
    let bits = target * problem.bandwidth * problem.slot_duration;
    Ok(match decoded_at {
        Some(t) => HarqEpisode {
            decoded: true,
            delay: t,
            slots_used,
            target_rate: target,
            energy,
            throughput: bits / (slots_used as f64 * problem.slot_duration),
            energy_per_bit: if bits > 0.0 { energy / bits } else { 0.0 },
            powers,
        },
        None => HarqEpisode {
            decoded: false,
            delay: tau,
            slots_used,
            target_rate: target,
            energy,
            throughput: 0.0,
            energy_per_bit: f64::INFINITY,
            powers,
        },
    })
}

/// Episode `i` draws its channel from the episode stream `i` of `seed`.
pub fn episode_series(env: &GeneratorConfig, seed: u64, episode: usize) -> Result<SeriesSample> {
    env.sample(&mut StreamRng::new(seed, StreamDomain::Episode, episode as u64))
}

/// `episodes` independent closed-loop runs.
pub fn run_closed_loop_harq(
    env: &GeneratorConfig,
    problem: &HarqProblem,
    predictor: &dyn StepPredictor,
    seed: u64,
    episodes: usize,
) -> Result<Vec<HarqEpisode>> {
    (0..episodes)
        .into_par_iter()
        .map(|i| run_harq_episode(&episode_series(env, seed, i)?, problem, predictor, i))
        .collect()
}

/// Total energy over total delivered bits across episodes (`+∞` when
/// nothing was delivered).
pub fn pooled_energy_per_bit(episodes: &[HarqEpisode], problem: &HarqProblem) -> f64 {
    let energy: f64 = episodes.iter().map(|e| e.energy).sum();
    let bits: f64 = episodes
        .iter()
        .filter(|e| e.decoded)
        .map(|e| e.target_rate * problem.bandwidth * problem.slot_duration)
        .sum();
    if bits > 0.0 {
        energy / bits
    } else {
        f64::INFINITY
    }
}

pub fn decoding_rate(episodes: &[HarqEpisode]) -> f64 {
    episodes.iter().filter(|e| e.decoded).count() as f64 / episodes.len().max(1) as f64
}
