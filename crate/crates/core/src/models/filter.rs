//! Prototype sampling with optional likelihood-aware filtering.

use serde::{Deserialize, Serialize};

use super::{sample_categorical, Capability, DiscreteSequenceModel, Forecaster};
use crate::error::{invalid, Error, Result};
use crate::predictor::PrototypeSet;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    /// `m` i.i.d. draws.
    #[default]
    None,
    /// Draw `⌈m(1+κ)⌉` candidates and keep the `m` most likely.
    SequenceLevel { kappa: f64 },
    /// Per-step sampling restricted to the `k` most probable symbols.
    TopK { k: usize },
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterSpec::None => Ok(()),
            FilterSpec::SequenceLevel { kappa } if kappa.is_finite() && kappa > 0.0 => Ok(()),
            FilterSpec::SequenceLevel { kappa } => Err(invalid(format!("kappa must be positive, got {kappa}"))),
            FilterSpec::TopK { k } if k >= 1 => Ok(()),
            FilterSpec::TopK { .. } => Err(invalid("top-k needs k >= 1")),
        }
    }

    /// Number of candidates drawn for `m` retained prototypes.
    pub fn pool_size(&self, m: usize) -> usize {
        match *self {
            FilterSpec::SequenceLevel { kappa } => {
                ((m as f64 * (1.0 + kappa)) - 1e-9).ceil().max(m as f64) as usize
            }
            _ => m,
        }
    }
}

/// Indices (ascending) of the `m` candidates with the largest
/// log-density; equal densities favour the earlier draw.
pub fn sequence_level_select(log_densities: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..log_densities.len()).collect();
    let key = |i: usize| {
        let v = log_densities[i];
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order.truncate(m);
    order.sort_unstable();
    order
}

/// Samples `m` prototypes for `past` according to `filter`.
pub fn draw_prototypes(
    model: &dyn Forecaster,
    past: &[f64],
    m: usize,
    filter: &FilterSpec,
    rng: &mut StreamRng,
) -> Result<PrototypeSet> {
    if m == 0 {
        return Err(invalid("number of prototypes must be at least 1"));
    }
    filter.validate()?;
    let protos = match *filter {
        FilterSpec::None => model.sample_many(past, m, rng)?,
        FilterSpec::SequenceLevel { .. } => {
            if model.capability() != Capability::Explicit {
                return Err(Error::Capability("sequence-level filtering needs an explicit model".into()));
            }
            let pool = model.sample_many(past, filter.pool_size(m), rng)?;
            let lds = pool
                .iter()
                .map(|y| model.log_density(past, y))
                .collect::<Result<Vec<_>>>()?;
            let keep = sequence_level_select(&lds, m);
            let mut pool: Vec<Option<Vec<f64>>> = pool.into_iter().map(Some).collect();
            keep.into_iter().map(|i| pool[i].take().expect("distinct indices")).collect()
        }
        FilterSpec::TopK { k } => {
            let discrete = match (model.capability(), model.as_discrete()) {
                (Capability::Explicit, Some(d)) => d,
                _ => {
                    return Err(Error::Capability(
                        "top-k sampling needs an explicit finite-alphabet model".into(),
                    ))
                }
            };
            (0..m)
                .map(|_| top_k_constrained_sample(discrete, k, past, model.horizon(), rng))
                .collect::<Result<Vec<_>>>()?
        }
    };
    PrototypeSet::new(protos)
}

/// Autoregressive sampling where every step keeps only the `k` most
/// probable symbols (lowest index on ties) and renormalises.
pub fn top_k_constrained_sample(
    model: &dyn DiscreteSequenceModel,
    k: usize,
    past: &[f64],
    horizon: usize,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let n = model.alphabet_size();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let mut prefix = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let pmf = model.step_pmf(past, &prefix)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pmf[b].total_cmp(&pmf[a]).then(a.cmp(&b)));
        let mut truncated = vec![0.0; n];
        for &s in &order[..k] {
            truncated[s] = pmf[s];
        }
        if truncated.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("truncated pmf has no mass"));
        }
        prefix.push(sample_categorical(&truncated, rng));
    }
    Ok(prefix.into_iter().map(|s| model.symbol_value(s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        Anchor, ForkingMixture, ForkingMixtureParams, GaussianAr, GaussianArParams, KnnBootstrap, MarkovChain,
    };
    use crate::rng::StreamDomain;
    use crate::trajectory::SeriesSample;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn rng(i: u64) -> StreamRng {
        StreamRng::new(17, StreamDomain::Auxiliary, i)
    }

    fn deterministic_ar() -> GaussianAr {
        GaussianAr::new(
            GaussianArParams { coefficients: vec![0.5], intercept: 1.0, sigma: 0.0 },
            3,
            None,
        )
        .unwrap()
    }

    fn three_state() -> MarkovChain {
        MarkovChain::new(
            vec![-1.0, 0.0, 2.0],
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]],
            2,
        )
        .unwrap()
    }

    #[test]
    fn single_draw_of_deterministic_model_is_mean() {
        let m = deterministic_ar();
        let set = draw_prototypes(&m, &[2.0], 1, &FilterSpec::None, &mut rng(0)).unwrap();
        assert_eq!(set.as_slice(), &[m.predictive_mean(&[2.0]).unwrap()]);
    }

    #[test]
    fn zero_noise_gives_identical_prototypes() {
        let m = deterministic_ar();
        for count in [1, 3, 7] {
            let set = draw_prototypes(&m, &[2.0], count, &FilterSpec::None, &mut rng(1)).unwrap();
            assert_eq!(set.len(), count);
            assert!(set.iter().all(|p| p == set.as_slice()[0].as_slice()));
        }
    }

    #[test]
    fn sequence_level_keeps_most_likely() {
        assert_eq!(sequence_level_select(&[-1.0, -2.0, -3.0], 2), vec![0, 1]);
        assert_eq!(sequence_level_select(&[-3.0, -1.0, -2.0], 2), vec![1, 2]);
        // ties: earliest draw wins
        assert_eq!(sequence_level_select(&[-1.0, -1.0, -1.0], 2), vec![0, 1]);
        assert_eq!(FilterSpec::SequenceLevel { kappa: 0.5 }.pool_size(2), 3);
        assert_eq!(FilterSpec::SequenceLevel { kappa: 0.6 }.pool_size(10), 16);
    }

    #[test]
    fn vanishing_kappa_keeps_everything() {
        let spec = FilterSpec::SequenceLevel { kappa: 1e-12 };
        assert_eq!(spec.pool_size(5), 5);
        assert_eq!(sequence_level_select(&[-4.0, -1.0, -9.0, -2.0, -3.0], 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn filters_require_explicit_models() {
        let corpus = vec![SeriesSample::new(vec![0.0], vec![1.0]).unwrap()];
        let knn = KnnBootstrap::new(corpus, 1).unwrap();
        let seq = FilterSpec::SequenceLevel { kappa: 0.5 };
        assert!(matches!(draw_prototypes(&knn, &[0.0], 2, &seq, &mut rng(0)), Err(Error::Capability(_))));
        let topk = FilterSpec::TopK { k: 1 };
        assert!(matches!(draw_prototypes(&knn, &[0.0], 2, &topk, &mut rng(0)), Err(Error::Capability(_))));
        // explicit but continuous
        let ar = GaussianAr::new(
            GaussianArParams { coefficients: vec![0.5], intercept: 0.0, sigma: 1.0 },
            2,
            None,
        )
        .unwrap();
        assert!(matches!(draw_prototypes(&ar, &[0.0], 2, &topk, &mut rng(0)), Err(Error::Capability(_))));
    }

    #[test]
    fn sequence_level_on_mixture_drops_outliers() {
        let m = ForkingMixture::new(
            ForkingMixtureParams {
                templates: vec![vec![0.0, 0.0], vec![5.0, 5.0]],
                probabilities: vec![0.5, 0.5],
                noise_std: vec![0.1, 1.0],
                anchor: Anchor::Absolute,
            },
            None,
        )
        .unwrap();
        let set = draw_prototypes(&m, &[0.0], 4, &FilterSpec::SequenceLevel { kappa: 1.0 }, &mut rng(3)).unwrap();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn top_one_is_greedy_path() {
        // From state 0 (value -1): argmax row 0 -> symbol 0, then again 0.
        let m = three_state();
        for i in 0..20 {
            let y = top_k_constrained_sample(&m, 1, &[-1.0], 2, &mut rng(i)).unwrap();
            assert_eq!(y, vec![-1.0, -1.0]);
        }
        // From value 2 (state 2): row 2 argmax -> symbol 2 (0.5); then symbol 2 again.
        let y = top_k_constrained_sample(&m, 1, &[2.0], 2, &mut rng(0)).unwrap();
        assert_eq!(y, vec![2.0, 2.0]);
    }

    #[test]
    fn two_step_binary_greedy_matches_enumeration() {
        let m = MarkovChain::new(vec![0.0, 1.0], vec![vec![0.4, 0.6], vec![0.8, 0.2]], 2).unwrap();
        // Hand enumeration from state 0: step 0 argmax is symbol 1 (0.6), step 1
        // from symbol 1 argmax is symbol 0 (0.8).
        let y = top_k_constrained_sample(&m, 1, &[0.0], 2, &mut rng(5)).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
    }

    #[test]
    fn full_alphabet_matches_model_pmf() {
        let m = three_state();
        let n = 10_000;
        let mut counts: HashMap<(i64, i64), usize> = HashMap::new();
        let mut r = rng(9);
        for _ in 0..n {
            let y = top_k_constrained_sample(&m, 3, &[0.0], 2, &mut r).unwrap();
            *counts.entry((y[0] as i64, y[1] as i64)).or_default() += 1;
        }
        let mut chi2 = 0.0;
        for a in [-1.0, 0.0, 2.0] {
            for b in [-1.0, 0.0, 2.0] {
                let p = m.log_density(&[0.0], &[a, b]).unwrap().exp();
                let observed = *counts.get(&(a as i64, b as i64)).unwrap_or(&0) as f64;
                let expected = p * n as f64;
                chi2 += (observed - expected).powi(2) / expected;
            }
        }
        // 99.9% quantile of chi-square with 8 degrees of freedom
        assert!(chi2 < 26.12, "chi2 = {chi2}");
    }

    #[test]
    fn top_k_argument_errors() {
        let m = three_state();
        assert!(top_k_constrained_sample(&m, 0, &[0.0], 2, &mut rng(0)).is_err());
        assert!(top_k_constrained_sample(&m, 4, &[0.0], 2, &mut rng(0)).is_err());
    }

    #[test]
    fn top_k_through_draw_prototypes() {
        let m = three_state();
        let set = draw_prototypes(&m, &[0.0], 3, &FilterSpec::TopK { k: 2 }, &mut rng(2)).unwrap();
        // top-2 from state 1 is {0 (value 0.0), 2 (value 2.0)}
        for p in set.iter() {
            assert!(p[0] == 0.0 || p[0] == 2.0);
        }
    }

    #[test]
    fn same_stream_same_prototypes() {
        let m = three_state();
        let a = draw_prototypes(&m, &[0.0], 5, &FilterSpec::SequenceLevel { kappa: 0.5 }, &mut rng(4)).unwrap();
        let b = draw_prototypes(&m, &[0.0], 5, &FilterSpec::SequenceLevel { kappa: 0.5 }, &mut rng(4)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn filtering_never_lowers_the_worst_retained_density(
            lds in prop::collection::vec(-50.0f64..0.0, 2..30),
            frac in 0.1f64..1.0,
        ) {
            let m = ((lds.len() as f64 * frac).ceil() as usize).clamp(1, lds.len());
            let keep = sequence_level_select(&lds, m);
            prop_assert_eq!(keep.len(), m);
            let worst_kept = keep.iter().map(|&i| lds[i]).fold(f64::INFINITY, f64::min);
            // compare with the m lowest-density draws of the pool
            let mut sorted = lds.clone();
            sorted.sort_by(f64::total_cmp);
            let worst_unfiltered = sorted[..m].iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(worst_kept >= worst_unfiltered);
            // and every dropped draw is no more likely than any kept one
            for i in 0..lds.len() {
                if !keep.contains(&i) {
                    prop_assert!(lds[i] <= worst_kept);
                }
            }
        }
    }
}
