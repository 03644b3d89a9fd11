use super::loss::LossCurve;
use crate::error::{invalid, Error, Result};

/// Slack on the count scale absorbing rounding in `(n+1)(1-α)`-type
/// expressions.
pub const RANK_EPS: f64 = 1e-9;

/// `alpha` is in loss units, so it may exceed 1 for distance losses.
fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Rank `⌈(n+1)(1-α)⌉` of the split-conformal quantile.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let r = ((n as f64 + 1.0) * (1.0 - alpha) - RANK_EPS).ceil();
    r.max(0.0) as usize
}

/// The `⌈(n+1)(1-α)⌉`-th smallest score, or `+∞` (full space) when the rank
/// exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(invalid("need at least one calibration score"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("scores contain NaN"));
    }
    let rank = conformal_rank(scores.len(), alpha);
    if rank > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank.max(1) - 1])
}

/// Aggregate loss `S(λ) = Σ_i loss_i(λ)` evaluated in `O(log N)` per query.
struct Aggregate {
    /// Step breakpoints, ascending, with suffix sums of their weights.
    steps: Vec<f64>,
    step_tail: Vec<f64>,
    /// Hinge distances, ascending, with suffix sums.
    hinges: Vec<f64>,
    hinge_tail: Vec<f64>,
}

fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    for i in (0..values.len()).rev() {
        out[i] = out[i + 1] + values[i];
    }
    out
}

impl Aggregate {
    fn new(curves: &[LossCurve]) -> Result<Self> {
        let mut steps: Vec<(f64, f64)> = Vec::new();
        let mut hinges = Vec::new();
        for c in curves {
            match c {
                LossCurve::Step { breakpoints, weight } => {
                    steps.extend(breakpoints.iter().map(|b| (*b, *weight)));
                }
                LossCurve::Hinge { distance } => hinges.push(*distance),
            }
        }
        if steps.iter().any(|(b, w)| b.is_nan() || w.is_nan()) || hinges.iter().any(|d| d.is_nan()) {
            return Err(invalid("loss curves contain NaN"));
        }
        steps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        hinges.sort_by(f64::total_cmp);
        let weights: Vec<f64> = steps.iter().map(|s| s.1).collect();
        Ok(Self {
            step_tail: suffix_sums(&weights),
            steps: steps.into_iter().map(|s| s.0).collect(),
            hinge_tail: suffix_sums(&hinges),
            hinges,
        })
    }

    /// Index of the first entry strictly above `lambda`.
    fn above(sorted: &[f64], lambda: f64) -> usize {
        sorted.partition_point(|v| *v <= lambda)
    }

    fn step_part(&self, lambda: f64) -> f64 {
        self.step_tail[Self::above(&self.steps, lambda)]
    }

    /// Hinges strictly above `lambda`: their count and distance sum.
    fn hinge_part(&self, lambda: f64) -> (usize, f64) {
        let i = Self::above(&self.hinges, lambda);
        (self.hinges.len() - i, self.hinge_tail[i])
    }

    fn value(&self, lambda: f64) -> f64 {
        let (count, sum) = self.hinge_part(lambda);
        self.step_part(lambda) + sum - count as f64 * lambda
    }

    fn candidates(&self) -> Vec<f64> {
        let mut c: Vec<f64> = std::iter::once(0.0)
            .chain(self.steps.iter().copied())
            .chain(self.hinges.iter().copied())
            .filter(|v| *v >= 0.0)
            .collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }
}

/// Smallest `λ ≥ 0` with `(Σ_i loss_i(λ) + B) / (n+1) ≤ α`.
///
/// Step losses are resolved exactly at their breakpoints; hinge losses are
/// linear between breakpoints and solved in closed form there.
pub fn crc_threshold(curves: &[LossCurve], bound: f64, alpha: f64) -> Result<f64> {
    if curves.is_empty() {
        return Err(invalid("need at least one calibration item"));
    }
    check_alpha(alpha)?;
    if !(bound.is_finite() && bound > 0.0) {
        return Err(invalid(format!("loss bound must be positive, got {bound}")));
    }
    let n = curves.len() as f64;
    let target = (n + 1.0) * alpha - bound;
    let tol = RANK_EPS * bound;
    if target < -tol {
        return Err(Error::Infeasible { smallest_risk: bound / (n + 1.0), alpha });
    }
    let agg = Aggregate::new(curves)?;
    let cand = agg.candidates();
    let ok = |lambda: f64| agg.value(lambda) <= target + tol;
    // S is nonincreasing and vanishes at the largest candidate
    let k = cand.partition_point(|c| !ok(*c));
    if k == cand.len() {
        return Err(Error::Infeasible { smallest_risk: bound / (n + 1.0), alpha });
    }
    if k == 0 {
        return Ok(cand[0]);
    }
    let (lo, hi) = (cand[k - 1], cand[k]);
    // On [lo, hi) the step part is constant and every hinge with distance
    // >= hi contributes d - λ.
    let (count, sum) = agg.hinge_part(lo);
    if count == 0 {
        return Ok(hi);
    }
    let solved = (agg.step_part(lo) + sum - target) / count as f64;
    Ok(solved.clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn miscoverage(ds: &[f64]) -> Vec<LossCurve> {
        ds.iter().map(|d| LossCurve::Step { breakpoints: vec![*d], weight: 1.0 }).collect()
    }

    fn hinge(ds: &[f64]) -> Vec<LossCurve> {
        ds.iter().map(|d| LossCurve::Hinge { distance: *d }).collect()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(conformal_quantile(&[1.0, 2.0, 3.0], 0.25).unwrap(), 3.0);
        assert_eq!(conformal_quantile(&[3.0, 1.0, 2.0], 0.25).unwrap(), 3.0);
        assert_eq!(conformal_quantile(&[0.5], 0.5).unwrap(), 0.5);
        let nine: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert_eq!(conformal_quantile(&nine, 0.1).unwrap(), 0.9);
    }

    #[test]
    fn quantile_sentinel_when_rank_exceeds_n() {
        assert_eq!(conformal_quantile(&[1.0, 2.0], 0.1).unwrap(), f64::INFINITY);
        assert!(conformal_quantile(&[], 0.1).is_err());
        assert!(conformal_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn miscoverage_threshold_example() {
        assert_eq!(crc_threshold(&miscoverage(&[1.0, 2.0, 3.0]), 1.0, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn alpha_one_gives_zero() {
        assert_eq!(crc_threshold(&miscoverage(&[1.0, 2.0, 3.0]), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn hinge_threshold_example() {
        let b = 3.0;
        let alpha = (0.0 + 1.0 + 2.0 + b) / 4.0;
        let lambda = crc_threshold(&hinge(&[1.0, 2.0, 3.0]), b, alpha).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12, "{lambda}");
    }

    #[test]
    fn hinge_threshold_between_breakpoints() {
        // (Σ (d-λ)+ + 3)/4 ≤ 1.25 → Σ ≤ 2 → at λ in [1,2]: (2-λ)+(3-λ) = 2 → λ = 1.5
        let lambda = crc_threshold(&hinge(&[1.0, 2.0, 3.0]), 3.0, 1.25).unwrap();
        assert!((lambda - 1.5).abs() < 1e-8, "{lambda}");
    }

    #[test]
    fn infeasible_reports_smallest_risk() {
        match crc_threshold(&miscoverage(&[1.0, 2.0]), 1.0, 0.1) {
            Err(Error::Infeasible { smallest_risk, alpha }) => {
                assert!((smallest_risk - 1.0 / 3.0).abs() < 1e-15);
                assert_eq!(alpha, 0.1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pcp_reduction_on_fixed_case() {
        let ds = [0.3, 0.1, 0.7, 0.2, 0.9, 0.4, 0.5, 0.8, 0.6];
        for alpha in [0.1, 0.2, 0.3, 0.5] {
            assert_eq!(
                crc_threshold(&miscoverage(&ds), 1.0, alpha).unwrap(),
                conformal_quantile(&ds, alpha).unwrap()
            );
        }
    }

    fn brute_force(curves: &[LossCurve], bound: f64, alpha: f64, grid: &[f64]) -> Option<f64> {
        let n = curves.len() as f64;
        grid.iter().copied().find(|l| {
            let s: f64 = curves.iter().map(|c| c.at(*l).unwrap()).sum();
            (s + bound) / (n + 1.0) <= alpha + 1e-12
        })
    }

    proptest! {
        #[test]
        fn step_threshold_matches_breakpoint_enumeration(
            ds in prop::collection::vec(0.0f64..5.0, 1..20),
            alpha in 0.05f64..1.0,
        ) {
            let curves = miscoverage(&ds);
            let mut grid: Vec<f64> = std::iter::once(0.0).chain(ds.iter().copied()).collect();
            grid.sort_by(f64::total_cmp);
            match crc_threshold(&curves, 1.0, alpha) {
                Ok(l) => prop_assert_eq!(Some(l), brute_force(&curves, 1.0, alpha, &grid)),
                Err(Error::Infeasible { .. }) => prop_assert!((ds.len() as f64 + 1.0) * alpha < 1.0),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }

        #[test]
        fn hinge_threshold_matches_dense_grid(
            ds in prop::collection::vec(0.0f64..5.0, 1..20),
            alpha in 0.3f64..3.0,
        ) {
            let bound = 5.0;
            let curves = hinge(&ds);
            let step = 1e-3;
            let grid: Vec<f64> = (0..=5001).map(|i| i as f64 * step).collect();
            if let Ok(l) = crc_threshold(&curves, bound, alpha.min(1.0) * bound) {
                let g = brute_force(&curves, bound, alpha.min(1.0) * bound, &grid).unwrap();
                prop_assert!(l <= g + 1e-9 && l >= g - step - 1e-9, "{} vs {}", l, g);
            }
        }

        #[test]
        fn threshold_is_nonincreasing_in_alpha(
            ds in prop::collection::vec(0.0f64..5.0, 5..30),
            a in 0.05f64..0.9,
            b in 0.05f64..0.9,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let curves = miscoverage(&ds);
            if let (Ok(l_lo), Ok(l_hi)) = (crc_threshold(&curves, 1.0, lo), crc_threshold(&curves, 1.0, hi)) {
                prop_assert!(l_hi <= l_lo);
            }
        }
    }
}
