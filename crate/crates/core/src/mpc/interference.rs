use crate::distance::{max_window_mean, DistanceSpec};
use crate::error::{check_len, invalid, Error, Result};
use crate::predictor::BallUnionPredictor;

use super::solver::LinearConstraints;

/// Lipschitz constant of the windowed interference in the gains under the
/// max-window average metric.
pub fn lipschitz_interference(p_max: f64) -> f64 {
    p_max
}

/// `max_{t'} (1/k) Σ_{t=t'}^{t'+k-1} g_t P_t`.
pub fn max_k_window_interference(gains: &[f64], powers: &[f64], k: usize) -> Result<f64> {
    check_len(gains.len(), powers.len())?;
    if k == 0 || k > gains.len() {
        return Err(invalid(format!("window {k} must lie in 1..={}", gains.len())));
    }
    let prod: Vec<f64> = gains.iter().zip(powers).map(|(g, p)| g * p).collect();
    Ok(max_window_mean(&prod, k))
}

/// `β` times the past worst window interference at full power.
pub fn interference_threshold(past_gains: &[f64], p_max: f64, k: usize, beta: f64) -> Result<f64> {
    if past_gains.len() < k {
        return Err(invalid(format!("past of length {} shorter than window {k}", past_gains.len())));
    }
    let full = vec![p_max; past_gains.len()];
    Ok(beta * max_k_window_interference(past_gains, &full, k)?)
}

fn window_of(pred: &BallUnionPredictor) -> Result<usize> {
    match pred.distance() {
        DistanceSpec::MaxWindowAvgL1 { window } => Ok(*window),
        other => Err(invalid(format!(
            "interference constraints need a max-window distance, predictor uses {}",
            other.name()
        ))),
    }
}

/// Linear constraints on the powers (W) that keep the windowed interference
/// of every gain vector in the set below `gamma - margin`.
///
/// For prototype `j`, window `t'` and slot `s` in the window:
/// `(1/k) Σ_window ĝ^j_t P_t + λ P_s ≤ γ - margin`. The largest window
/// interference over a ball spends the whole budget `kλ` on the slot with
/// the largest power, so the family is exact.
pub fn robust_interference_constraints(
    pred: &BallUnionPredictor,
    gamma: f64,
    margin: f64,
) -> Result<LinearConstraints> {
    let k = window_of(pred)?;
    let rhs = gamma - margin;
    if !(rhs >= 0.0) {
        return Err(Error::InfeasibleControl(format!(
            "interference budget {gamma} is below the reliability margin {margin}"
        )));
    }
    let tau = pred.horizon();
    let mut c = LinearConstraints::default();
    if pred.is_full_space() {
        for s in 0..tau {
            let mut row = vec![0.0; tau];
            row[s] = 1.0;
            c.push(row, 0.0);
        }
        return Ok(c);
    }
    let lambda = pred.lambda();
    for proto in pred.prototypes().iter() {
        for start in 0..=tau - k {
            for s in start..start + k {
                let mut row = vec![0.0; tau];
                for t in start..start + k {
                    row[t] = proto[t] / k as f64;
                }
                row[s] += lambda;
                c.push(row, rhs);
            }
        }
    }
    Ok(c)
}

/// Worst-case window interference over the set for powers `p`, per window
/// start.
pub fn robust_window_interference(pred: &BallUnionPredictor, powers: &[f64]) -> Result<Vec<f64>> {
    let k = window_of(pred)?;
    check_len(pred.horizon(), powers.len())?;
    let tau = pred.horizon();
    Ok((0..=tau - k)
        .map(|start| {
            let w = start..start + k;
            let peak = powers[w.clone()].iter().cloned().fold(0.0, f64::max);
            let spread = if pred.is_full_space() {
                if peak > 0.0 { f64::INFINITY } else { 0.0 }
            } else {
                pred.lambda() * peak
            };
            pred.prototypes()
                .iter()
                .map(|g| w.clone().map(|t| g[t] * powers[t]).sum::<f64>() / k as f64 + spread)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}
