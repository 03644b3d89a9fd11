//! Projected gradient ascent for separable log-rate objectives over a box
//! intersected with half-spaces.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Half-spaces `rows[i] · x ≤ rhs[i]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearConstraints {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearConstraints {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// `rhs[i] - rows[i] · x` for every row.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().zip(&self.rhs).map(|(a, b)| b - dot(a, x)).collect()
    }

    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.slacks(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Drops rows that cannot bind inside `[0, upper]` and rows implied by
    /// another row (componentwise smaller coefficients, larger right-hand
    /// side). Coefficients must be nonnegative.
    pub fn pruned(&self, upper: &[f64]) -> Self {
        let n = self.rows.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            if dot(&self.rows[i], upper) <= self.rhs[i] {
                keep[i] = false;
            }
        }
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            for j in 0..n {
                if i == j || !keep[j] {
                    continue;
                }
                let implied = self.rhs[j] <= self.rhs[i]
                    && self.rows[i].iter().zip(&self.rows[j]).all(|(a, b)| a <= b);
                let identical = self.rhs[j] == self.rhs[i] && self.rows[i] == self.rows[j];
                if implied && (!identical || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut out = LinearConstraints::default();
        for i in (0..n).filter(|i| keep[*i]) {
            out.push(self.rows[i].clone(), self.rhs[i]);
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub max_projection_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            kkt_tolerance: 1e-8,
            max_projection_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖x - Π(x + ∇f(x))‖_∞` at the returned point.
    pub kkt_residual: f64,
    pub converged: bool,
}

/// Euclidean projection onto `[0, 1]^n ∩ {A x ≤ b}` by a primal
/// active-set method started from the origin (feasible since `b ≥ 0`).
pub struct Projector {
    // Box faces first (`-x_t ≤ 0`, then `x_t ≤ 1`), then the unit-normalised rows.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    n: usize,
    max_steps: usize,
}

impl Projector {
    pub fn new(constraints: &LinearConstraints, n: usize, options: SolverOptions) -> Self {
        let mut rows = Vec::with_capacity(2 * n + constraints.len());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for t in 0..n {
            let mut r = vec![0.0; n];
            r[t] = -1.0;
            rows.push(r);
            rhs.push(0.0);
        }
        for t in 0..n {
            let mut r = vec![0.0; n];
            r[t] = 1.0;
            rows.push(r);
            rhs.push(1.0);
        }
        for (a, b) in constraints.rows.iter().zip(&constraints.rhs) {
            let norm = dot(a, a).sqrt();
            if norm > 0.0 {
                rows.push(a.iter().map(|v| v / norm).collect());
                rhs.push(b / norm);
            }
        }
        Self { rows, rhs, n, max_steps: options.max_projection_steps }
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        let mut work: Vec<usize> = Vec::new();
        for _ in 0..self.max_steps {
            // Minimise ½‖x + p - z‖² subject to the working rows held at equality.
            let r: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
            let mu = self.multipliers(&work, &r);
            let mut p = r.clone();
            for (k, &i) in work.iter().enumerate() {
                for t in 0..n {
                    p[t] -= mu[k] * self.rows[i][t];
                }
            }
            let size = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // A full working set pins x; otherwise p is zero up to rounding.
            if work.len() == n || size <= 1e-12 * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                let worst = mu
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m < -1e-14)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k);
                match worst {
                    Some(k) => {
                        work.remove(k);
                        continue;
                    }
                    None => break,
                }
            }
            let mut step = 1.0;
            let mut block = None;
            // Rows nearly orthogonal to p are numerically dependent on the working set.
            let floor = 1e-12 * dot(&p, &p).sqrt();
            for (i, (a, b)) in self.rows.iter().zip(&self.rhs).enumerate() {
                if work.contains(&i) {
                    continue;
                }
                let ap = dot(a, &p);
                if ap > floor {
                    let room = ((b - dot(a, &x)) / ap).max(0.0);
                    if room < step {
                        step = room;
                        block = Some(i);
                    }
                }
            }
            for t in 0..n {
                x[t] += step * p[t];
            }
            match block {
                Some(i) if work.len() < n => work.push(i),
                Some(_) => break,
                None => {}
            }
        }
        for v in x.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        // Rounding can leave tiny violations; shrinking towards the origin removes them.
        let mut scale = 1.0f64;
        for (a, b) in self.rows[2 * n..].iter().zip(&self.rhs[2 * n..]) {
            let v = dot(a, &x);
            if v > *b && v > 0.0 {
                scale = scale.min((b / v).max(0.0));
            }
        }
        if scale < 1.0 {
            x.iter_mut().for_each(|v| *v *= scale);
        }
        x
    }

    /// Solves `(G_W G_Wᵀ) μ = G_W r` by Gaussian elimination with pivoting.
    fn multipliers(&self, work: &[usize], r: &[f64]) -> Vec<f64> {
        let k = work.len();
        let mut m = vec![vec![0.0; k + 1]; k];
        for a in 0..k {
            for b in 0..k {
                m[a][b] = dot(&self.rows[work[a]], &self.rows[work[b]]);
            }
            m[a][k] = dot(&self.rows[work[a]], r);
        }
        for col in 0..k {
            let piv = (col..k).max_by(|a, b| m[*a][col].abs().total_cmp(&m[*b][col].abs())).unwrap_or(col);
            m.swap(col, piv);
            let d = m[col][col];
            if d.abs() < 1e-14 {
                continue;
            }
            for row in 0..k {
                if row != col {
                    let f = m[row][col] / d;
                    if f != 0.0 {
                        for c in col..=k {
                            m[row][c] -= f * m[col][c];
                        }
                    }
                }
            }
        }
        (0..k).map(|a| if m[a][a].abs() < 1e-14 { 0.0 } else { m[a][k] / m[a][a] }).collect()
    }
}

/// Maximises `Σ_t c_t log2(1 + s_t x_t)` over `x ∈ [0,1]^n`, `A x ≤ b`,
/// with nonnegative coefficients and right-hand sides.
///
/// Barzilai-Borwein steps with backtracking; each step projects with
/// [`Projector`]. Stops when the projected-gradient residual drops
/// below the tolerance.
pub fn maximize_log_rate(
    weights: &[f64],
    snr: &[f64],
    constraints: &LinearConstraints,
    options: SolverOptions,
) -> Result<SolverOutcome> {
    let n = weights.len();
    check_len(n, snr.len())?;
    if n == 0 {
        return Err(invalid("empty decision vector"));
    }
    if weights.iter().chain(snr).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("objective coefficients must be finite and nonnegative"));
    }
    for (a, b) in constraints.rows.iter().zip(&constraints.rhs) {
        check_len(n, a.len())?;
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(b.is_finite() && *b >= 0.0) {
            return Err(invalid("constraint data must be finite and nonnegative"));
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let f = |x: &[f64]| -> f64 { (0..n).map(|t| weights[t] * (snr[t] * x[t]).ln_1p() / ln2).sum() };
    let grad = |x: &[f64]| -> Vec<f64> { (0..n).map(|t| weights[t] * snr[t] / (ln2 * (1.0 + snr[t] * x[t]))).collect() };
    let projector = Projector::new(constraints, n, options);
    let residual = |x: &[f64], g: &[f64]| -> f64 {
        let z: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
        let p = projector.project(&z);
        x.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };

    let mut x = projector.project(&vec![1.0; n]);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let lipschitz = (0..n).map(|t| weights[t] * snr[t] * snr[t] / ln2).fold(0.0, f64::max);
    let mut step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let mut kkt = residual(&x, &g);
    let mut iterations = 0;
    while kkt >= options.kkt_tolerance && iterations < options.max_iterations {
        iterations += 1;
        let mut trial_step = step;
        let (x_new, f_new) = loop {
            let z: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + trial_step * b).collect();
            let cand = projector.project(&z);
            let f_cand = f(&cand);
            let ascent: f64 = g.iter().zip(cand.iter().zip(&x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            if f_cand >= fx + 1e-4 * ascent || trial_step < 1e-16 {
                break (cand, f_cand);
            }
            trial_step *= 0.5;
        };
        let g_new = grad(&x_new);
        let dx: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let curvature = -dot(&dx, &dg);
        step = if curvature > 0.0 { (dot(&dx, &dx) / curvature).clamp(1e-12, 1e12) } else { trial_step * 2.0 };
        let moved = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x = x_new;
        fx = f_new;
        g = g_new;
        kkt = residual(&x, &g);
        if moved == 0.0 && kkt >= options.kkt_tolerance && trial_step < 1e-16 {
            break;
        }
    }
    Ok(SolverOutcome { objective: fx, converged: kkt < options.kkt_tolerance, x, iterations, kkt_residual: kkt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(row: Vec<f64>, rhs: f64) -> LinearConstraints {
        let mut c = LinearConstraints::default();
        c.push(row, rhs);
        c
    }

    #[test]
    fn unconstrained_optimum_is_box_corner() {
        let out = maximize_log_rate(&[1.0, 1.0], &[2.0, 3.0], &LinearConstraints::default(), SolverOptions::default())
            .unwrap();
        assert_eq!(out.x, vec![1.0, 1.0]);
        assert!(out.converged);
    }

    #[test]
    fn symmetric_budget_splits_evenly() {
        let c = single(vec![1.0, 1.0], 1.0);
        let out = maximize_log_rate(&[1.0, 1.0], &[1.0, 1.0], &c, SolverOptions::default()).unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-7 && (out.x[1] - 0.5).abs() < 1e-7, "{:?}", out.x);
        assert!(out.converged, "{}", out.kkt_residual);
    }

    #[test]
    fn budget_water_filling_matches_closed_form() {
        // max log(1+2x)+log(1+x) s.t. x0+x1 ≤ 1: 2/(1+2x0) = 1/(1+x1) → x0 = 0.75, x1 = 0.25
        let c = single(vec![1.0, 1.0], 1.0);
        let out = maximize_log_rate(&[1.0, 1.0], &[2.0, 1.0], &c, SolverOptions::default()).unwrap();
        assert!((out.x[0] - 0.75).abs() < 1e-7, "{:?}", out.x);
        assert!((out.x[1] - 0.25).abs() < 1e-7, "{:?}", out.x);
    }

    #[test]
    fn zero_rhs_forces_zero() {
        let c = single(vec![1.0, 0.0], 0.0);
        let out = maximize_log_rate(&[1.0, 1.0], &[1.0, 1.0], &c, SolverOptions::default()).unwrap();
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.x[1], 1.0);
    }

    #[test]
    fn projection_lands_in_feasible_set() {
        let mut c = LinearConstraints::default();
        c.push(vec![1.0, 2.0, 0.5], 1.0);
        c.push(vec![0.3, 0.1, 1.0], 0.4);
        let p = Projector::new(&c, 3, SolverOptions::default());
        let x = p.project(&[2.0, -1.0, 3.0]);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(c.min_slack(&x) >= -1e-12);
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..7);
            let mut c = LinearConstraints::default();
            for _ in 0..rng.random_range(0..12) {
                let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
                c.push(row, rng.random_range(0.0..2.0));
            }
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
            let x = Projector::new(&c, n, SolverOptions::default()).project(&z);
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(c.min_slack(&x) >= -1e-12);
            // (z - x)·(y - x) ≤ 0 for every feasible y
            for _ in 0..300 {
                let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let over = c.rows.iter().zip(&c.rhs).map(|(a, b)| dot(a, &y) / b).fold(1.0f64, f64::max);
                y.iter_mut().for_each(|v| *v /= over);
                let vi: f64 = (0..n).map(|t| (z[t] - x[t]) * (y[t] - x[t])).sum();
                assert!(vi <= 1e-9, "{vi}");
            }
        }
    }

    #[test]
    fn pruning_keeps_binding_rows() {
        let mut c = LinearConstraints::default();
        c.push(vec![1.0, 1.0], 1.0);
        c.push(vec![0.5, 1.0], 1.0); // implied by row 0
        c.push(vec![1.0, 1.0], 1.0); // duplicate
        c.push(vec![0.1, 0.1], 1.0); // never binds in the unit box
        c.push(vec![2.0, 0.0], 1.5);
        let p = c.pruned(&[1.0, 1.0]);
        assert_eq!(p.rows, vec![vec![1.0, 1.0], vec![2.0, 0.0]]);
    }

    #[test]
    fn rejects_negative_data() {
        let c = single(vec![-1.0, 1.0], 1.0);
        assert!(maximize_log_rate(&[1.0, 1.0], &[1.0, 1.0], &c, SolverOptions::default()).is_err());
    }
}
