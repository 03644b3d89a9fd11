use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_past, gaussian_log_pdf, Capability, Forecaster};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::StreamRng;
use crate::trajectory::Bounds;

/// `y_t = c + Σ_i a_i y_{t-i} + σ ε_t`; `coefficients[0]` multiplies the most
/// recent value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianArParams {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct GaussianAr {
    params: GaussianArParams,
    horizon: usize,
    bounds: Option<Bounds>,
}

impl GaussianAr {
    pub fn new(params: GaussianArParams, horizon: usize, bounds: Option<Bounds>) -> Result<Self> {
        if params.coefficients.is_empty() {
            return Err(invalid("AR lag order must be at least 1"));
        }
        if params.coefficients.iter().any(|a| !a.is_finite()) || !params.intercept.is_finite() {
            return Err(invalid("AR coefficients must be finite"));
        }
        if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
            return Err(invalid("AR innovation std must be finite and nonnegative"));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(Self { params, horizon, bounds })
    }

    pub fn params(&self) -> &GaussianArParams {
        &self.params
    }

    fn step_mean(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.params.intercept
            + self
                .params
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, a)| a * history[n - 1 - i])
                .sum::<f64>()
    }

    fn clip(&self, v: f64) -> f64 {
        self.bounds.map_or(v, |b| b.clip(v))
    }

    fn rollout(&self, past: &[f64], mut noise: impl FnMut() -> f64) -> Vec<f64> {
        let mut history = past.to_vec();
        let mut out = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let v = self.clip(self.step_mean(&history) + self.params.sigma * noise());
            history.push(v);
            out.push(v);
        }
        out
    }
}

impl Forecaster for GaussianAr {
    fn capability(&self) -> Capability {
        Capability::Explicit
    }

    fn memory(&self) -> usize {
        self.params.coefficients.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample(&self, past: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        check_past(past, self.memory())?;
        Ok(self.rollout(past, || StandardNormal.sample(rng)))
    }

    /// Sum of per-step Gaussian log-densities of the residuals, conditioning
    /// each step on the given future values. Clipping is ignored.
    fn log_density(&self, past: &[f64], future: &[f64]) -> Result<f64> {
        check_past(past, self.memory())?;
        check_len(self.horizon, future.len())?;
        if self.params.sigma == 0.0 {
            return Err(Error::Unsupported("zero-noise AR model has a degenerate density".into()));
        }
        let mut history = past.to_vec();
        let mut total = 0.0;
        for &y in future {
            total += gaussian_log_pdf(y, self.step_mean(&history), self.params.sigma);
            history.push(y);
        }
        Ok(total)
    }

    fn predictive_mean(&self, past: &[f64]) -> Result<Vec<f64>> {
        check_past(past, self.memory())?;
        Ok(self.rollout(past, || 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamDomain;

    fn ar(coefficients: Vec<f64>, intercept: f64, sigma: f64, horizon: usize) -> GaussianAr {
        GaussianAr::new(GaussianArParams { coefficients, intercept, sigma }, horizon, None).unwrap()
    }

    #[test]
    fn zero_noise_follows_mean_recursion() {
        let m = ar(vec![0.5, 0.25], 1.0, 0.0, 3);
        let mut rng = StreamRng::new(0, StreamDomain::Auxiliary, 0);
        let y = m.sample(&[4.0, 2.0], &mut rng).unwrap();
        // 1 + 0.5*2 + 0.25*4 = 3; 1 + 1.5 + 0.5 = 3; 1 + 1.5 + 0.75 = 3.25
        assert_eq!(y, vec![3.0, 3.0, 3.25]);
        assert_eq!(m.predictive_mean(&[4.0, 2.0]).unwrap(), y);
    }

    #[test]
    fn constant_intercept_model() {
        let m = ar(vec![0.0], 5.0, 0.0, 4);
        let mut rng = StreamRng::new(0, StreamDomain::Auxiliary, 0);
        assert_eq!(m.sample(&[1.0], &mut rng).unwrap(), vec![5.0; 4]);
    }

    #[test]
    fn short_past_is_rejected() {
        let m = ar(vec![0.1, 0.2, 0.3], 0.0, 1.0, 2);
        let mut rng = StreamRng::new(0, StreamDomain::Auxiliary, 0);
        assert!(m.sample(&[1.0, 2.0], &mut rng).is_err());
    }

    #[test]
    fn first_step_mean_matches_recursion() {
        let m = ar(vec![0.8], 0.5, 1.0, 1);
        let mut rng = StreamRng::new(3, StreamDomain::Auxiliary, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| m.sample(&[2.0], &mut rng).unwrap()[0]).sum::<f64>() / n as f64;
        assert!((mean - 2.1).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn log_density_at_mode() {
        let m = ar(vec![0.0], 0.0, 1.0, 1);
        let ld = m.log_density(&[0.0], &[0.0]).unwrap();
        assert!((ld + 0.918_938_533_204_672_7).abs() < 1e-12);
        let near = m.log_density(&[0.0], &[0.7]).unwrap();
        let far = m.log_density(&[0.0], &[1.4]).unwrap();
        assert!(far < near);
    }

    #[test]
    fn density_integrates_to_one() {
        let m = ar(vec![0.6], 0.3, 0.7, 1);
        let past = [1.2];
        let (lo, hi, n) = (-8.0, 10.0, 20_000);
        let h = (hi - lo) / n as f64;
        // trapezoid rule
        let integral: f64 = (0..=n)
            .map(|i| {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * m.log_density(&past, &[x]).unwrap().exp()
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
    }

    #[test]
    fn zero_sigma_density_unsupported() {
        let m = ar(vec![0.5], 0.0, 0.0, 1);
        assert!(matches!(m.log_density(&[0.0], &[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn clipping_respects_bounds() {
        let m = GaussianAr::new(
            GaussianArParams { coefficients: vec![1.0], intercept: 0.0, sigma: 5.0 },
            8,
            Some(Bounds::new(-1.0, 1.0).unwrap()),
        )
        .unwrap();
        let mut rng = StreamRng::new(9, StreamDomain::Auxiliary, 0);
        for _ in 0..100 {
            assert!(m.sample(&[0.0], &mut rng).unwrap().iter().all(|v| v.abs() <= 1.0));
        }
    }
}
