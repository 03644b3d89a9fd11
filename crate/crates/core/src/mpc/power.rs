use serde::{Deserialize, Serialize};

use super::interference::{
    interference_threshold, lipschitz_interference, max_k_window_interference, robust_interference_constraints,
    robust_window_interference,
};
use super::solver::{maximize_log_rate, LinearConstraints, SolverOptions};
use crate::distance::DistanceSpec;
use crate::error::{check_len, invalid, Error, Result};
use crate::predictor::BallUnionPredictor;

/// `Σ_t log2(1 + P_t g_t / (B N0))` in bits/s/Hz.
pub fn achieved_rate(gains: &[f64], powers: &[f64], bandwidth: f64, noise_density: f64) -> Result<f64> {
    check_len(gains.len(), powers.len())?;
    let noise = bandwidth * noise_density;
    Ok(gains.iter().zip(powers).map(|(g, p)| (p * g / noise).ln_1p() / std::f64::consts::LN_2).sum())
}

/// Open-loop power allocation for a secondary link under an interference
/// budget towards a primary link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerControlProblem {
    pub p_max: f64,
    pub bandwidth: f64,
    pub noise_density: f64,
    /// Interference averaging window `k`.
    pub window: usize,
    /// Fraction of the past full-power interference allowed.
    pub beta: f64,
    /// Reliability level the predictor was calibrated at (gain units).
    pub alpha: f64,
    /// Past gains of the protected link.
    pub protected_past: Vec<f64>,
    /// Point forecast of the controlled link's gains over the horizon.
    pub link_forecast: Vec<f64>,
}

impl PowerControlProblem {
    pub fn horizon(&self) -> usize {
        self.link_forecast.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_max", self.p_max), ("bandwidth", self.bandwidth), ("noise_density", self.noise_density)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let tau = self.horizon();
        if self.window == 0 || self.window + 1 > tau {
            return Err(invalid(format!("window {} must lie in 1..={}", self.window, tau.saturating_sub(1))));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha must be finite and nonnegative"));
        }
        if self.link_forecast.iter().chain(&self.protected_past).any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(invalid("gains must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn gamma(&self) -> Result<f64> {
        interference_threshold(&self.protected_past, self.p_max, self.window, self.beta)
    }

    pub fn margin(&self) -> f64 {
        lipschitz_interference(self.p_max) * self.alpha
    }

    /// The problem in `x = P / P_max`: maximise `Σ_t w_t log2(1 + s_t x_t)`
    /// over `[0, 1]^τ ∩ {A x ≤ b}`, rows scaled to unit right-hand side and
    /// pruned. `None` when the margin exceeds the budget.
    pub fn normalized_program(&self, pred: &BallUnionPredictor) -> Result<Option<NormalizedProgram>> {
        let tau = self.horizon();
        let constraints = match robust_interference_constraints(pred, self.gamma()?, self.margin()) {
            Ok(c) => c,
            Err(Error::InfeasibleControl(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut scaled = LinearConstraints::default();
        for (row, rhs) in constraints.rows.iter().zip(&constraints.rhs) {
            let a: Vec<f64> = row.iter().map(|v| v * self.p_max).collect();
            if *rhs > 0.0 {
                scaled.push(a.iter().map(|v| v / rhs).collect(), 1.0);
            } else {
                scaled.push(a, 0.0);
            }
        }
        let noise = self.bandwidth * self.noise_density;
        Ok(Some(NormalizedProgram {
            weights: vec![1.0 / tau as f64; tau],
            snr: self.link_forecast.iter().map(|g| g * self.p_max / noise).collect(),
            constraints: scaled.pruned(&vec![1.0; tau]),
        }))
    }

    /// `(1/τ) Σ_t B log2(1 + P_t ĝ_t / (B N0))` in bits/s.
    pub fn objective(&self, powers: &[f64]) -> Result<f64> {
        Ok(self.bandwidth * achieved_rate(&self.link_forecast, powers, self.bandwidth, self.noise_density)?
            / self.horizon() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProgram {
    pub weights: Vec<f64>,
    pub snr: Vec<f64>,
    pub constraints: LinearConstraints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    /// Powers in W.
    pub powers: Vec<f64>,
    /// Objective in bits/s.
    pub objective: f64,
    /// `γ - margin` minus the worst-case interference, per window (W).
    pub slacks: Vec<f64>,
    pub feasible: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl ControlSolution {
    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Maximises the forecast sum-rate subject to the robust interference
/// constraints built from `pred`. An empty feasible set yields zero power
/// with `feasible = false`.
pub fn solve_open_loop_power(problem: &PowerControlProblem, pred: &BallUnionPredictor) -> Result<ControlSolution> {
    solve_open_loop_power_with(problem, pred, SolverOptions::default())
}

pub fn solve_open_loop_power_with(
    problem: &PowerControlProblem,
    pred: &BallUnionPredictor,
    options: SolverOptions,
) -> Result<ControlSolution> {
    problem.validate()?;
    let tau = problem.horizon();
    check_len(tau, pred.horizon())?;
    match pred.distance() {
        DistanceSpec::MaxWindowAvgL1 { window } if *window == problem.window => {}
        other => {
            return Err(invalid(format!(
                "predictor distance {} does not match the window-{} interference metric",
                other.name(),
                problem.window
            )))
        }
    }
    let gamma = problem.gamma()?;
    let bound = gamma - problem.margin();
    let Some(program) = problem.normalized_program(pred)? else {
        let zeros = vec![0.0; tau];
        let slacks = robust_window_interference(pred, &zeros)?.iter().map(|v| bound - v).collect();
        return Ok(ControlSolution {
            powers: zeros,
            objective: 0.0,
            slacks,
            feasible: false,
            iterations: 0,
            kkt_residual: 0.0,
        });
    };
    let NormalizedProgram { weights, snr, constraints: scaled } = program;
    let out = maximize_log_rate(&weights, &snr, &scaled, options)?;
    let powers: Vec<f64> = out.x.iter().map(|x| x * problem.p_max).collect();
    let slacks = robust_window_interference(pred, &powers)?.iter().map(|v| bound - v).collect();
    Ok(ControlSolution {
        objective: problem.objective(&powers)?,
        powers,
        slacks,
        feasible: true,
        iterations: out.iterations,
        kkt_residual: out.kkt_residual,
    })
}

/// Realised outcome of one open-loop allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEpisode {
    pub feasible: bool,
    pub objective: f64,
    pub min_slack: f64,
    /// Realised windowed interference on the protected link (W).
    pub interference: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Solves the problem and measures the realised interference against the
/// protected link's true future gains.
pub fn run_power_episode(
    problem: &PowerControlProblem,
    pred: &BallUnionPredictor,
    protected_future: &[f64],
) -> Result<PowerEpisode> {
    let sol = solve_open_loop_power(problem, pred)?;
    Ok(PowerEpisode {
        feasible: sol.feasible,
        objective: sol.objective,
        min_slack: sol.min_slack(),
        interference: max_k_window_interference(protected_future, &sol.powers, problem.window)?,
        gamma: problem.gamma()?,
        iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
    })
}
