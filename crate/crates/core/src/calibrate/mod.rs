//! Threshold calibration for prototype set predictors and empirical
//! risk evaluation.
//!
//! The single-prototype baseline ([`ts_cp_calibrate`]) centres one ball on
//! the forecaster's point prediction and takes a split-conformal quantile.
//! The multi-prototype path ([`pts_crc_calibrate`]) samples `m` prototypes
//! per calibration item and picks the smallest radius whose corrected mean
//! loss stays below `α`.

mod crc;
mod loss;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crc::{conformal_quantile, conformal_rank, crc_threshold, RANK_EPS};
pub use loss::{LossCurve, LossSpec};

use crate::distance::DistanceSpec;
use crate::error::{check_len, invalid, Error, Result};
use crate::models::{draw_prototypes, FilterSpec, Forecaster, ModelConfig};
use crate::predictor::{BallUnionPredictor, PrototypeSet};
use crate::rng::{StreamDomain, StreamRng};
use crate::stats::{mean, std_dev, Z_99};
use crate::trajectory::{Bounds, SeriesSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeSource {
    /// `m` prototypes sampled from the forecaster.
    Sampled,
    /// The forecaster's predictive mean as the single prototype.
    PredictiveMean,
}

/// Everything needed to rebuild a calibrated predictor for a new input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPredictorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub source: PrototypeSource,
    pub m: usize,
    pub filter: FilterSpec,
    pub distance: DistanceSpec,
    pub loss: LossSpec,
    pub alpha: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub lambda: f64,
    pub n_cal: usize,
    pub seed: u64,
}

impl CalibratedPredictorSpec {
    pub fn is_full_space(&self) -> bool {
        self.lambda == f64::INFINITY
    }

    pub fn with_model(mut self, model: ModelConfig) -> Self {
        self.model = Some(model);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(invalid(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.loss.bound()) {
            return Err(invalid(format!(
                "alpha must lie in (0, {}], got {}",
                self.loss.bound(),
                self.alpha
            )));
        }
        if self.m == 0 || self.n_cal == 0 {
            return Err(invalid("m and n_cal must be at least 1"));
        }
        if self.source == PrototypeSource::PredictiveMean && self.m != 1 {
            return Err(invalid("a predictive-mean predictor has exactly one prototype"));
        }
        self.filter.validate()?;
        self.loss.validate(&self.distance)
    }
}

/// Settings for [`pts_crc_calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsCrcSettings {
    pub alpha: f64,
    pub m: usize,
    #[serde(default)]
    pub filter: FilterSpec,
    pub distance: DistanceSpec,
    pub loss: LossSpec,
    pub seed: u64,
}

fn check_data(data: &[SeriesSample], horizon: usize) -> Result<()> {
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    for s in data {
        check_len(horizon, s.future.len())?;
    }
    Ok(())
}

/// Stream used for the prototypes of calibration item `i`.
pub fn calibration_stream(seed: u64, i: usize) -> StreamRng {
    StreamRng::new(seed, StreamDomain::CalibrationPrototypes, i as u64)
}

/// Stream used for the prototypes of test item `i`.
pub fn test_stream(seed: u64, i: usize) -> StreamRng {
    StreamRng::new(seed, StreamDomain::TestPrototypes, i as u64)
}

/// Single-ball baseline: weighted-max distance from the predictive mean,
/// radius from the split-conformal quantile at level `α`.
pub fn ts_cp_calibrate(
    model: &dyn Forecaster,
    cal: &[SeriesSample],
    alpha: f64,
    weights: Vec<f64>,
) -> Result<CalibratedPredictorSpec> {
    let distance = DistanceSpec::WeightedMax { weights };
    distance.validate(model.horizon())?;
    check_data(cal, model.horizon())?;
    let scores = cal
        .par_iter()
        .map(|s| distance.distance(&model.predictive_mean(&s.past)?, &s.future))
        .collect::<Result<Vec<_>>>()?;
    let lambda = conformal_quantile(&scores, alpha)?;
    Ok(CalibratedPredictorSpec {
        model: None,
        source: PrototypeSource::PredictiveMean,
        m: 1,
        filter: FilterSpec::None,
        distance,
        loss: LossSpec::Miscoverage,
        alpha,
        lambda,
        n_cal: cal.len(),
        seed: 0,
    })
}

/// Per-item loss curves of a sampled-prototype predictor on `data`, item
/// `i` drawing from `stream(i)`.
pub fn loss_curves(
    model: &dyn Forecaster,
    data: &[SeriesSample],
    settings: &PtsCrcSettings,
    stream: impl Fn(usize) -> StreamRng + Sync,
) -> Result<Vec<LossCurve>> {
    data.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let protos = draw_prototypes(model, &s.past, settings.m, &settings.filter, &mut stream(i))?;
            settings.loss.curve(&protos, &settings.distance, &s.future)
        })
        .collect()
}

/// Calibrates the radius of an `m`-prototype ball union. When no finite
/// radius meets the bound at this `n` and `α`, the full-space sentinel
/// `λ = +∞` is returned.
pub fn pts_crc_calibrate(
    model: &dyn Forecaster,
    cal: &[SeriesSample],
    settings: &PtsCrcSettings,
) -> Result<CalibratedPredictorSpec> {
    if settings.m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    settings.distance.validate(model.horizon())?;
    settings.loss.validate(&settings.distance)?;
    settings.filter.validate()?;
    check_data(cal, model.horizon())?;
    let curves = loss_curves(model, cal, settings, |i| calibration_stream(settings.seed, i))?;
    let lambda = match crc_threshold(&curves, settings.loss.bound(), settings.alpha) {
        Ok(l) => l,
        Err(Error::Infeasible { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(CalibratedPredictorSpec {
        model: None,
        source: PrototypeSource::Sampled,
        m: settings.m,
        filter: settings.filter,
        distance: settings.distance.clone(),
        loss: settings.loss,
        alpha: settings.alpha,
        lambda,
        n_cal: cal.len(),
        seed: settings.seed,
    })
}

/// Predictor for a new input: fresh prototypes, calibrated radius.
pub fn make_test_predictor(
    spec: &CalibratedPredictorSpec,
    model: &dyn Forecaster,
    past: &[f64],
    rng: &mut StreamRng,
) -> Result<BallUnionPredictor> {
    let protos = match spec.source {
        PrototypeSource::PredictiveMean => PrototypeSet::new(vec![model.predictive_mean(past)?])?,
        PrototypeSource::Sampled => draw_prototypes(model, past, spec.m, &spec.filter, rng)?,
    };
    BallUnionPredictor::new(protos, spec.distance.clone(), spec.lambda)
}

/// Outcome of one test item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub loss: f64,
    pub covered: bool,
    /// `None` unless the distance is weighted-max.
    pub inefficiency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub risk: f64,
    pub risk_half_width: f64,
    pub coverage: f64,
    pub coverage_half_width: f64,
    pub inefficiency: Option<f64>,
    pub n_test: usize,
}

impl RiskReport {
    /// Means with 99% normal-approximation half-widths.
    pub fn from_outcomes(outcomes: &[ItemOutcome]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(invalid("no test outcomes"));
        }
        let n = outcomes.len();
        let losses: Vec<f64> = outcomes.iter().map(|o| o.loss).collect();
        let covered: Vec<f64> = outcomes.iter().map(|o| if o.covered { 1.0 } else { 0.0 }).collect();
        let half = |xs: &[f64]| if n > 1 { Z_99 * std_dev(xs) / (n as f64).sqrt() } else { 0.0 };
        let inefficiency = outcomes
            .iter()
            .map(|o| o.inefficiency)
            .collect::<Option<Vec<f64>>>()
            .map(|v| mean(&v));
        Ok(Self {
            risk: mean(&losses),
            risk_half_width: half(&losses),
            coverage: mean(&covered),
            coverage_half_width: half(&covered),
            inefficiency,
            n_test: n,
        })
    }
}

/// Per-item outcomes of `spec` on `test` under `loss`; test item `i` draws
/// its prototypes from [`test_stream`]`(spec.seed, i)`. Inefficiency is
/// measured inside `bounds` when given.
pub fn evaluate_items(
    spec: &CalibratedPredictorSpec,
    model: &dyn Forecaster,
    test: &[SeriesSample],
    loss: &LossSpec,
    bounds: Option<&Bounds>,
) -> Result<Vec<ItemOutcome>> {
    spec.validate()?;
    loss.validate(&spec.distance)?;
    check_data(test, model.horizon())?;
    test.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let pred = make_test_predictor(spec, model, &s.past, &mut test_stream(spec.seed, i))?;
            let inefficiency = match (&spec.distance, bounds) {
                (DistanceSpec::WeightedMax { .. }, Some(b)) if pred.is_full_space() => Some(b.width()),
                (DistanceSpec::WeightedMax { .. }, Some(b)) => Some(pred.inefficiency_within(b)?),
                (DistanceSpec::WeightedMax { .. }, None) => Some(pred.inefficiency()?),
                _ => None,
            };
            Ok(ItemOutcome { loss: loss.loss(&pred, &s.future)?, covered: pred.contains(&s.future)?, inefficiency })
        })
        .collect()
}

pub fn evaluate(
    spec: &CalibratedPredictorSpec,
    model: &dyn Forecaster,
    test: &[SeriesSample],
    loss: &LossSpec,
    bounds: Option<&Bounds>,
) -> Result<RiskReport> {
    RiskReport::from_outcomes(&evaluate_items(spec, model, test, loss, bounds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_dataset, GeneratorConfig, RoundaboutConfig};
    use crate::models::{ForkingMixture, GaussianAr, GaussianArParams};
    use crate::predictor::min_distance_to_prototypes;

    /// Deterministic model repeating the last past value.
    fn persistence(horizon: usize) -> GaussianAr {
        GaussianAr::new(
            GaussianArParams { coefficients: vec![1.0], intercept: 0.0, sigma: 0.0 },
            horizon,
            None,
        )
        .unwrap()
    }

    fn constant_series(values: &[f64]) -> Vec<SeriesSample> {
        values.iter().map(|v| SeriesSample::new(vec![0.0], vec![*v, *v]).unwrap()).collect()
    }

    #[test]
    fn exact_model_gives_zero_radius() {
        let m = persistence(2);
        let data = constant_series(&[0.0; 10]);
        let spec = ts_cp_calibrate(&m, &data, 0.1, vec![1.0, 1.0]).unwrap();
        assert_eq!(spec.lambda, 0.0);
    }

    #[test]
    fn constant_offset_gives_offset_radius() {
        let m = persistence(2);
        let data = constant_series(&[-0.7; 10]);
        let spec = ts_cp_calibrate(&m, &data, 0.1, vec![1.0, 1.0]).unwrap();
        assert!((spec.lambda - 0.7).abs() < 1e-15);
    }

    #[test]
    fn three_distinct_scores_take_largest() {
        let m = persistence(2);
        let data = constant_series(&[1.0, 3.0, 2.0]);
        let spec = ts_cp_calibrate(&m, &data, 0.25, vec![1.0, 1.0]).unwrap();
        assert_eq!(spec.lambda, 3.0);
    }

    #[test]
    fn deterministic_single_prototype_reduces_to_crc() {
        let m = persistence(2);
        let data = constant_series(&[1.0, 2.0, 3.0]);
        let settings = PtsCrcSettings {
            alpha: 0.5,
            m: 1,
            filter: FilterSpec::None,
            distance: DistanceSpec::uniform_max(2),
            loss: LossSpec::Miscoverage,
            seed: 0,
        };
        assert_eq!(pts_crc_calibrate(&m, &data, &settings).unwrap().lambda, 2.0);
        let one = PtsCrcSettings { alpha: 1.0, ..settings };
        assert_eq!(pts_crc_calibrate(&m, &data, &one).unwrap().lambda, 0.0);
    }

    #[test]
    fn infeasible_calibration_yields_full_space() {
        let m = persistence(2);
        let data = constant_series(&[1.0, 2.0]);
        let settings = PtsCrcSettings {
            alpha: 0.1,
            m: 1,
            filter: FilterSpec::None,
            distance: DistanceSpec::uniform_max(2),
            loss: LossSpec::Miscoverage,
            seed: 0,
        };
        let spec = pts_crc_calibrate(&m, &data, &settings).unwrap();
        assert!(spec.is_full_space());
        let bounds = Bounds::new(-5.0, 5.0).unwrap();
        let report = evaluate(&spec, &m, &data, &LossSpec::Miscoverage, Some(&bounds)).unwrap();
        assert_eq!(report.coverage, 1.0);
        assert_eq!(report.risk, 0.0);
        assert_eq!(report.inefficiency, Some(10.0));
    }

    fn roundabout_setup() -> (ForkingMixture, Vec<SeriesSample>, RoundaboutConfig) {
        let cfg = RoundaboutConfig::default();
        let model = ForkingMixture::new(cfg.branch_mixture(0.03), Some(cfg.bounds)).unwrap();
        let data = gen_dataset(&GeneratorConfig::Roundabout(cfg.clone()), 300, 7).unwrap();
        (model, data, cfg)
    }

    #[test]
    fn miscoverage_threshold_is_order_statistic_of_min_distances() {
        let (model, data, _) = roundabout_setup();
        for alpha in [0.05, 0.1, 0.3] {
            let settings = PtsCrcSettings {
                alpha,
                m: 4,
                filter: FilterSpec::None,
                distance: DistanceSpec::uniform_max(6),
                loss: LossSpec::Miscoverage,
                seed: 3,
            };
            let spec = pts_crc_calibrate(&model, &data, &settings).unwrap();
            let scores: Vec<f64> = data
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let p = draw_prototypes(&model, &s.past, 4, &FilterSpec::None, &mut calibration_stream(3, i))
                        .unwrap();
                    min_distance_to_prototypes(&s.future, &p, &settings.distance).unwrap()
                })
                .collect();
            assert_eq!(spec.lambda, conformal_quantile(&scores, alpha).unwrap());
        }
    }

    #[test]
    fn lambda_nonincreasing_in_alpha() {
        let (model, data, cfg) = roundabout_setup();
        let distance = DistanceSpec::uniform_max(6);
        for loss in [
            LossSpec::Miscoverage,
            LossSpec::PerSampleRate,
            LossSpec::min_distance(&distance, &cfg.bounds, 6).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for alpha in [0.05, 0.1, 0.15, 0.2, 0.3, 0.5] {
                let settings =
                    PtsCrcSettings { alpha, m: 2, filter: FilterSpec::None, distance: distance.clone(), loss, seed: 1 };
                let l = pts_crc_calibrate(&model, &data, &settings).unwrap().lambda;
                assert!(l <= prev, "{} at {alpha}: {l} > {prev}", loss.name());
                prev = l;
            }
        }
    }

    #[test]
    fn test_predictor_reuses_lambda_and_streams() {
        let (model, data, _) = roundabout_setup();
        let settings = PtsCrcSettings {
            alpha: 0.1,
            m: 3,
            filter: FilterSpec::None,
            distance: DistanceSpec::uniform_max(6),
            loss: LossSpec::Miscoverage,
            seed: 5,
        };
        let spec = pts_crc_calibrate(&model, &data, &settings).unwrap();
        let a = make_test_predictor(&spec, &model, &data[0].past, &mut test_stream(5, 0)).unwrap();
        let b = make_test_predictor(&spec, &model, &data[0].past, &mut test_stream(5, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lambda(), spec.lambda);
        assert_eq!(a.prototypes().len(), 3);
    }

    #[test]
    fn zero_noise_model_gives_identical_prototypes() {
        let m = persistence(2);
        let data = constant_series(&[1.0, 2.0, 3.0]);
        let settings = PtsCrcSettings {
            alpha: 0.5,
            m: 3,
            filter: FilterSpec::None,
            distance: DistanceSpec::uniform_max(2),
            loss: LossSpec::Miscoverage,
            seed: 0,
        };
        let spec = pts_crc_calibrate(&m, &data, &settings).unwrap();
        let p = make_test_predictor(&spec, &m, &[0.0], &mut test_stream(0, 0)).unwrap();
        let single =
            BallUnionPredictor::new(PrototypeSet::new(vec![vec![0.0, 0.0]]).unwrap(), spec.distance.clone(), 2.0)
                .unwrap();
        assert!(p.prototypes().iter().all(|q| q == [0.0, 0.0]));
        assert_eq!(p.inefficiency().unwrap(), single.inefficiency().unwrap());
    }

    #[test]
    fn zero_radius_on_continuous_truth() {
        let (model, data, cfg) = roundabout_setup();
        let spec = CalibratedPredictorSpec {
            model: None,
            source: PrototypeSource::Sampled,
            m: 4,
            filter: FilterSpec::None,
            distance: DistanceSpec::uniform_max(6),
            loss: LossSpec::Miscoverage,
            alpha: 0.1,
            lambda: 0.0,
            n_cal: 1,
            seed: 0,
        };
        let r = evaluate(&spec, &model, &data, &LossSpec::Miscoverage, Some(&cfg.bounds)).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert_eq!(r.risk, 1.0);
        assert_eq!(r.inefficiency, Some(0.0));
    }

    #[test]
    fn spec_json_round_trip_with_sentinel() {
        let spec = CalibratedPredictorSpec {
            model: None,
            source: PrototypeSource::Sampled,
            m: 4,
            filter: FilterSpec::SequenceLevel { kappa: 0.5 },
            distance: DistanceSpec::uniform_max(2),
            loss: LossSpec::MinDistance { bound: 3.0 },
            alpha: 0.1,
            lambda: f64::INFINITY,
            n_cal: 10,
            seed: 9,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"inf\""));
        let back: CalibratedPredictorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
