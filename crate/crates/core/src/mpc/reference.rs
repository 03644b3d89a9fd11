//! Brute-force grid searches used to cross-check the solvers on small
//! horizons. Exponential in the horizon; keep `n ≤ 3`.

use super::solver::{dot, LinearConstraints};
use crate::error::{check_len, invalid, Result};

/// Best grid point found by a search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub x: Vec<f64>,
    pub objective: f64,
}

fn feasible(c: &LinearConstraints, x: &[f64]) -> bool {
    c.rows.iter().zip(&c.rhs).all(|(a, b)| dot(a, x) <= *b + 1e-12 * b.abs().max(1e-300))
}

/// Visits every point of the product grid `lo_t + i (hi_t - lo_t)/(points-1)`.
fn for_each_point(lo: &[f64], hi: &[f64], points: usize, mut visit: impl FnMut(&[f64])) {
    let n = lo.len();
    let mut idx = vec![0usize; n];
    let mut x = lo.to_vec();
    let at = |t: usize, i: usize| {
        if points == 1 {
            lo[t]
        } else {
            lo[t] + (hi[t] - lo[t]) * i as f64 / (points - 1) as f64
        }
    };
    loop {
        visit(&x);
        let mut t = n;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < points {
                x[t] = at(t, idx[t]);
                break;
            }
            idx[t] = 0;
            x[t] = at(t, 0);
        }
    }
}

fn check_inputs(weights: &[f64], snr: &[f64], c: &LinearConstraints, points: usize) -> Result<()> {
    check_len(weights.len(), snr.len())?;
    for row in &c.rows {
        check_len(weights.len(), row.len())?;
    }
    if points < 2 || weights.is_empty() {
        return Err(invalid("grid search needs at least two points per axis and one variable"));
    }
    Ok(())
}

fn search(weights: &[f64], snr: &[f64], c: &LinearConstraints, lo: &[f64], hi: &[f64], points: usize) -> Option<GridOptimum> {
    let n = lo.len();
    // The objective is separable: tabulate each axis once.
    let axis = |t: usize, i: usize| lo[t] + (hi[t] - lo[t]) * i as f64 / (points - 1) as f64;
    let gain: Vec<Vec<f64>> = (0..n)
        .map(|t| (0..points).map(|i| weights[t] * (snr[t] * axis(t, i)).ln_1p() / std::f64::consts::LN_2).collect())
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = (0..n).map(|t| axis(t, 0)).collect();
    loop {
        if feasible(c, &x) {
            let f: f64 = (0..n).map(|t| gain[t][idx[t]]).sum();
            if best.as_ref().is_none_or(|b| f > b.0) {
                best = Some((f, idx.clone()));
            }
        }
        let mut t = n;
        loop {
            if t == 0 {
                return best.map(|(f, i)| GridOptimum {
                    x: i.iter().enumerate().map(|(t, &k)| axis(t, k)).collect(),
                    objective: f,
                });
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < points {
                x[t] = axis(t, idx[t]);
                break;
            }
            idx[t] = 0;
            x[t] = axis(t, 0);
        }
    }
}

/// Maximises `Σ_t w_t log2(1 + s_t x_t)` over the `points`-per-axis grid on
/// `[0, 1]^n` restricted to `A x ≤ b`. `None` if no grid point is feasible.
pub fn grid_max_log_rate(
    weights: &[f64],
    snr: &[f64],
    constraints: &LinearConstraints,
    points: usize,
) -> Result<Option<GridOptimum>> {
    check_inputs(weights, snr, constraints, points)?;
    let n = weights.len();
    Ok(search(weights, snr, constraints, &vec![0.0; n], &vec![1.0; n], points))
}

/// Grid search with `points` per axis followed by `stages` zoomed grids
/// of `zoom_points` per axis, each spanning five cells of the previous grid
/// on either side of its best point.
pub fn zoomed_max_log_rate(
    weights: &[f64],
    snr: &[f64],
    constraints: &LinearConstraints,
    points: usize,
    zoom_points: usize,
    stages: usize,
) -> Result<Option<GridOptimum>> {
    if zoom_points < 2 {
        return Err(invalid("zoomed grids need at least two points per axis"));
    }
    let Some(mut best) = grid_max_log_rate(weights, snr, constraints, points)? else {
        return Ok(None);
    };
    let mut cell = 1.0 / (points - 1) as f64;
    for _ in 0..stages {
        let lo: Vec<f64> = best.x.iter().map(|v| (v - 5.0 * cell).max(0.0)).collect();
        let hi: Vec<f64> = best.x.iter().map(|v| (v + 5.0 * cell).min(1.0)).collect();
        if let Some(b) = search(weights, snr, constraints, &lo, &hi, zoom_points) {
            if b.objective > best.objective {
                best = b;
            }
        }
        cell *= 10.0 / (zoom_points - 1) as f64;
    }
    Ok(Some(best))
}

/// Smallest total power meeting `Σ_t log2(1 + P_t g_t/(B N0)) ≥ target`
/// with `0 ≤ P_t ≤ P_max`. One slot is solved in closed form and the rest
/// are searched on a `points`-per-axis grid; every choice of the exact
/// slot is tried. `None` if unreachable.
pub fn grid_min_total_power(
    gains: &[f64],
    target: f64,
    p_max: f64,
    bandwidth: f64,
    noise_density: f64,
    points: usize,
) -> Result<Option<f64>> {
    let n = gains.len();
    if n == 0 || points < 2 {
        return Err(invalid("grid search needs at least one slot and two points per axis"));
    }
    let noise = bandwidth * noise_density;
    let rate = |p: f64, g: f64| (p * g / noise).ln_1p() / std::f64::consts::LN_2;
    let mut best: Option<f64> = None;
    for exact in 0..n {
        let g_exact = gains[exact];
        let others: Vec<f64> = (0..n).filter(|t| *t != exact).map(|t| gains[t]).collect();
        let mut consider = |prefix: &[f64]| {
            let got: f64 = prefix.iter().zip(&others).map(|(p, g)| rate(*p, *g)).sum();
            let need = target - got;
            let last = if need <= 0.0 {
                0.0
            } else if g_exact > 0.0 {
                (need.exp2() - 1.0) * noise / g_exact
            } else {
                return;
            };
            if last <= p_max * (1.0 + 1e-12) {
                let total = prefix.iter().sum::<f64>() + last.min(p_max);
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        };
        if n == 1 {
            consider(&[]);
        } else {
            for_each_point(&vec![0.0; n - 1], &vec![p_max; n - 1], points, |p| consider(p));
        }
    }
    Ok(best)
}
