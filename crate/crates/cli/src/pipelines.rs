//! Subcommand implementations. Each one writes its artifacts and finishes
//! with `manifest.json`.

use std::path::{Path, PathBuf};

use ptscrc::calibrate::{
    evaluate_items, make_test_predictor, pts_crc_calibrate, test_stream, ts_cp_calibrate, CalibratedPredictorSpec,
    LossSpec, PtsCrcSettings, RiskReport,
};
use ptscrc::generators::{gen_dataset, GeneratorConfig};
use ptscrc::io::{parse_series_json, read_series_csv, series_to_csv_string, series_to_json_string};
use ptscrc::models::{Capability, FilterSpec, Forecaster, ModelConfig};
use ptscrc::mpc::{
    achieved_rate, decoding_rate, max_k_window_interference, pooled_energy_per_bit, run_closed_loop_harq,
    select_alpha_for_delta, solve_open_loop_power, CalibratedStepPredictor, HarqEpisode, HarqProblem,
    PowerControlProblem, StepPredictor,
};
use ptscrc::rng::derive_seed;
use ptscrc::stats::{mean, std_dev, Z_99};
use ptscrc::{BallUnionPredictor, DistanceSpec, PrototypeSet, SeriesSample};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CalibrationBlock, CalibrationMethod, ControlMethod, DataFormat, ExperimentConfig, FigureBlock};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, StreamRecord};
use crate::output::{episode_records, f, opt_f, Artifacts, EpisodeRow, EPISODE_HEADER};
use crate::summary::{inverse_cdf, summarize_dir, summarize_records, SUMMARY_HEADER};

/// Plot-ready data sets produced by `reproduce-figure`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Inefficiency of the calibrated sets against the number of prototypes.
    InefficiencyVsM,
    /// Coverage and inefficiency over a grid of miscoverage levels.
    CoverageVsAlpha,
    /// Inverse CDF of the secondary link rate under interference control.
    RateCdf,
    /// Delay, decoding, throughput and energy of retransmission control.
    HarqMetrics,
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::InefficiencyVsM => "inefficiency-vs-m",
            Figure::CoverageVsAlpha => "coverage-vs-alpha",
            Figure::RateCdf => "rate-cdf",
            Figure::HarqMetrics => "harq-metrics",
        }
    }
}

/// A loaded configuration plus where it lives and where outputs go.
pub struct Context {
    pub config: ExperimentConfig,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Context {
    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.config.seed, label)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        self.base.join(path)
    }
}

/// Streams drawn and a possible infeasibility to report after writing.
#[derive(Default)]
struct Outcome {
    streams: Vec<StreamRecord>,
    infeasible: Option<String>,
}

impl Outcome {
    fn stream(&mut self, stage: &str, seed: u64, domain: &str) {
        self.streams.push(StreamRecord::new(stage, seed, domain));
    }
}

fn finish(ctx: &Context, subcommand: &str, mut artifacts: Artifacts, outcome: Outcome) -> CliResult<()> {
    let manifest = RunManifest::new(subcommand, &ctx.config, outcome.streams, artifacts.records());
    artifacts.write_json("manifest.json", &manifest)?;
    match outcome.infeasible {
        Some(msg) => Err(CliError::Infeasible(msg)),
        None => Ok(()),
    }
}

pub fn generate(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let gen = cfg.require(&cfg.generator, "generator", "generate")?;
    let data = cfg.data.clone().unwrap_or_else(default_data);
    let mut outcome = Outcome::default();
    let seed = ctx.seed("data");
    outcome.stream("data", seed, "dataset");
    let series = gen_dataset(gen, data.n, seed)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    match data.format {
        DataFormat::Csv => artifacts.write("data.csv", series_to_csv_string(&series)?.as_bytes())?,
        DataFormat::Json => artifacts.write("data.json", series_to_json_string(&series)?.as_bytes())?,
    };
    finish(ctx, "generate", artifacts, outcome)
}

fn default_data() -> crate::config::DataBlock {
    crate::config::DataBlock {
        n: 1000,
        n_cal: 1000,
        n_test: 1000,
        cal_csv: None,
        test_csv: None,
        format: DataFormat::Csv,
    }
}

fn read_series_file(path: &Path) -> CliResult<Vec<SeriesSample>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(parse_series_json(&text)?)
    } else {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Ok(read_series_csv(file)?)
    }
}

/// Calibration or test series: the configured file, else a generated set.
fn dataset(ctx: &Context, role: &str, subcommand: &str, outcome: &mut Outcome) -> CliResult<Vec<SeriesSample>> {
    let cfg = &ctx.config;
    let data = cfg.data.clone().unwrap_or_else(default_data);
    let (file, n) = match role {
        "cal" => (data.cal_csv, data.n_cal),
        _ => (data.test_csv, data.n_test),
    };
    if let Some(path) = file {
        return read_series_file(&ctx.resolve(&path));
    }
    let gen = cfg.require(&cfg.generator, "generator", subcommand)?;
    let label = format!("{role}-data");
    let seed = ctx.seed(&label);
    outcome.stream(&label, seed, "dataset");
    Ok(gen_dataset(gen, n, seed)?)
}

fn build_model(ctx: &Context, cfg: &ModelConfig) -> CliResult<Box<dyn Forecaster>> {
    Ok(cfg.build_in(&ctx.base)?)
}

fn require_model<'a>(ctx: &'a Context, subcommand: &str) -> CliResult<(&'a ModelConfig, Box<dyn Forecaster>)> {
    let cfg = ctx.config.require(&ctx.config.model, "model", subcommand)?;
    Ok((cfg, build_model(ctx, cfg)?))
}

fn weights_of(distance: &DistanceSpec, horizon: usize) -> CliResult<Vec<f64>> {
    match distance {
        DistanceSpec::WeightedMax { weights } => Ok(weights.clone()),
        other => Err(CliError::Config(format!(
            "calibration.distance: ts_cp needs a weighted_max distance, found {}",
            other.name()
        ))),
    }
    .and_then(|w| {
        if w.len() == horizon {
            Ok(w)
        } else {
            Err(CliError::Config(format!("calibration.distance: expected {horizon} weights, found {}", w.len())))
        }
    })
}

/// Calibrates per the block at level `alpha` with `m` prototypes; prototype
/// streams come from `proto_seed`.
fn calibrate_with(
    model: &dyn Forecaster,
    cal: &[SeriesSample],
    block: &CalibrationBlock,
    method: CalibrationMethod,
    alpha: f64,
    m: usize,
    filter: FilterSpec,
    proto_seed: u64,
) -> CliResult<CalibratedPredictorSpec> {
    let horizon = model.horizon();
    let distance = block.distance.clone().unwrap_or_else(|| DistanceSpec::uniform_max(horizon));
    Ok(match method {
        CalibrationMethod::TsCp => ts_cp_calibrate(model, cal, alpha, weights_of(&distance, horizon)?)?,
        CalibrationMethod::PtsCrc => pts_crc_calibrate(
            model,
            cal,
            &PtsCrcSettings {
                alpha,
                m,
                filter,
                distance,
                loss: block.loss.unwrap_or(LossSpec::Miscoverage),
                seed: proto_seed,
            },
        )?,
    })
}

fn calibrate_from_config(
    ctx: &Context,
    subcommand: &str,
    outcome: &mut Outcome,
) -> CliResult<(CalibratedPredictorSpec, Box<dyn Forecaster>)> {
    let cfg = &ctx.config;
    let block = cfg.require(&cfg.calibration, "calibration", subcommand)?;
    let (model_cfg, model) = require_model(ctx, subcommand)?;
    let cal = dataset(ctx, "cal", subcommand, outcome)?;
    let seed = ctx.seed("prototypes");
    outcome.stream("calibration-prototypes", seed, "calibration_prototypes");
    let spec = calibrate_with(model.as_ref(), &cal, block, block.method, block.alpha, block.m, block.filter, seed)?;
    Ok((spec.with_model(model_cfg.clone()), model))
}

pub fn calibrate(ctx: &Context) -> CliResult<()> {
    let mut outcome = Outcome::default();
    let (spec, _) = calibrate_from_config(ctx, "calibrate", &mut outcome)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    artifacts.write_json("calibrated.json", &spec)?;
    finish(ctx, "calibrate", artifacts, outcome)
}

#[derive(Serialize)]
struct Evaluation<'a> {
    schema_version: u32,
    source: &'a str,
    m: usize,
    alpha: f64,
    #[serde(with = "ptscrc::io::extended_f64")]
    lambda: f64,
    n_cal: usize,
    loss: &'a str,
    #[serde(flatten)]
    report: RiskReport,
}

pub fn evaluate(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let block = cfg.require(&cfg.calibration, "calibration", "evaluate")?;
    let mut outcome = Outcome::default();
    let (spec, model) = match &block.spec {
        Some(path) => {
            let path = ctx.resolve(path);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let spec: CalibratedPredictorSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            spec.validate()?;
            let model_cfg = match (&spec.model, &cfg.model) {
                (Some(m), _) | (None, Some(m)) => m.clone(),
                (None, None) => return Err(CliError::Config("model: block is required by `evaluate`".into())),
            };
            let model = build_model(ctx, &model_cfg)?;
            (spec, model)
        }
        None => calibrate_from_config(ctx, "evaluate", &mut outcome)?,
    };
    let test = dataset(ctx, "test", "evaluate", &mut outcome)?;
    outcome.stream("test-prototypes", spec.seed, "test_prototypes");
    let loss = block.loss.unwrap_or(spec.loss);
    let bounds = cfg.generator.as_ref().map(GeneratorConfig::bounds);
    let items = evaluate_items(&spec, model.as_ref(), &test, &loss, bounds.as_ref())?;
    let report = RiskReport::from_outcomes(&items)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    let source = match spec.source {
        ptscrc::calibrate::PrototypeSource::Sampled => "sampled",
        ptscrc::calibrate::PrototypeSource::PredictiveMean => "predictive_mean",
    };
    artifacts.write_json(
        "evaluation.json",
        &Evaluation {
            schema_version: crate::config::SCHEMA_VERSION,
            source,
            m: spec.m,
            alpha: spec.alpha,
            lambda: spec.lambda,
            n_cal: spec.n_cal,
            loss: loss.name(),
            report,
        },
    )?;
    let rows: Vec<Vec<String>> = items
        .iter()
        .enumerate()
        .map(|(i, o)| vec![i.to_string(), f(o.loss), if o.covered { "1" } else { "0" }.into(), opt_f(o.inefficiency)])
        .collect();
    artifacts.write_csv("items.csv", &["index", "loss", "covered", "inefficiency"], &rows)?;
    finish(ctx, "evaluate", artifacts, outcome)
}

/// Uncertainty-unaware baseline: the point forecast as the only trajectory.
fn point_predictor(
    model: &dyn Forecaster,
    past: &[f64],
    horizon: usize,
    distance: DistanceSpec,
) -> ptscrc::Result<BallUnionPredictor> {
    let mut mean = model.predictive_mean(past)?;
    mean.truncate(horizon);
    BallUnionPredictor::new(PrototypeSet::new(vec![mean])?, distance, 0.0)
}

struct PointStepPredictor<'a> {
    model: &'a dyn Forecaster,
}

impl StepPredictor for PointStepPredictor<'_> {
    fn predict(&self, window: &[f64], remaining: usize, _episode: usize, _step: usize) -> ptscrc::Result<BallUnionPredictor> {
        point_predictor(self.model, window, remaining, DistanceSpec::AvgL1)
    }

    fn alpha(&self) -> f64 {
        0.0
    }
}

fn fmt_label(window: Option<usize>, beta: f64) -> String {
    match window {
        Some(k) => format!("k={k};beta={beta}"),
        None => format!("beta={beta}"),
    }
}

struct PowerRun {
    rows: Vec<EpisodeRow>,
    /// Realised secondary-link rate (bits/s) per (config, method).
    rates: Vec<(String, String, Vec<f64>)>,
}

fn run_power(ctx: &Context, subcommand: &str, outcome: &mut Outcome) -> CliResult<PowerRun> {
    let cfg = &ctx.config;
    let block = cfg.require(&cfg.power, "power", subcommand)?;
    let gen = cfg.require(&cfg.generator, "generator", subcommand)?;
    let (_, model) = require_model(ctx, subcommand)?;
    let model = model.as_ref();
    let horizon = model.horizon();
    let cal = dataset(ctx, "cal", subcommand, outcome)?;
    let proto_seed = ctx.seed("prototypes");
    outcome.stream("calibration-prototypes", proto_seed, "calibration_prototypes");
    outcome.stream("test-prototypes", proto_seed, "test_prototypes");
    let episodes_seed = ctx.seed("episodes");
    outcome.stream("episodes", episodes_seed, "dataset");
    let link_seed = ctx.seed("link");
    outcome.stream("link", link_seed, "dataset");
    let protected = gen_dataset(gen, block.episodes, episodes_seed)?;
    let links = gen_dataset(gen, block.episodes, link_seed)?;
    let forecasts = links.par_iter().map(|s| model.predictive_mean(&s.past)).collect::<ptscrc::Result<Vec<_>>>()?;

    let mut run = PowerRun { rows: Vec::new(), rates: Vec::new() };
    let mut infeasible = 0usize;
    for &k in &block.windows {
        let distance = DistanceSpec::MaxWindowAvgL1 { window: k };
        let loss = LossSpec::min_distance(&distance, &gen.bounds(), horizon)?;
        let settings = |m| PtsCrcSettings {
            alpha: block.alpha,
            m,
            filter: FilterSpec::None,
            distance: distance.clone(),
            loss,
            seed: proto_seed,
        };
        let mut specs = Vec::new();
        for method in &block.methods {
            let spec = match method {
                ControlMethod::PtsCrc => Some(pts_crc_calibrate(model, &cal, &settings(block.m))?),
                ControlMethod::TsCrc => Some(pts_crc_calibrate(model, &cal, &settings(1))?),
                ControlMethod::UncertaintyUnaware => None,
            };
            specs.push((*method, spec));
        }
        for &beta in &block.betas {
            let label = fmt_label(Some(k), beta);
            for (method, spec) in &specs {
                let results = (0..block.episodes)
                    .into_par_iter()
                    .map(|i| {
                        let series = &protected[i];
                        let pred = match spec {
                            Some(spec) => make_test_predictor(spec, model, &series.past, &mut test_stream(spec.seed, i))?,
                            None => point_predictor(model, &series.past, horizon, distance.clone())?,
                        };
                        let problem = PowerControlProblem {
                            p_max: block.p_max,
                            bandwidth: block.bandwidth,
                            noise_density: block.noise_density,
                            window: k,
                            beta,
                            alpha: spec.as_ref().map_or(0.0, |s| s.alpha),
                            protected_past: series.past.clone(),
                            link_forecast: forecasts[i].clone(),
                        };
                        let sol = solve_open_loop_power(&problem, &pred)?;
                        // per-slot average, in the units of the planned objective
                        let rate = block.bandwidth
                            * achieved_rate(&links[i].future, &sol.powers, block.bandwidth, block.noise_density)?
                            / horizon as f64;
                        let interference = max_k_window_interference(&series.future, &sol.powers, k)?;
                        let row = EpisodeRow {
                            config: label.clone(),
                            method: method.name().to_string(),
                            seed: cfg.seed,
                            episode: i,
                            feasible: Some(sol.feasible),
                            objective: Some(sol.objective),
                            constraint_slack_min: Some(sol.min_slack()),
                            interference: Some(interference),
                            gamma: Some(problem.gamma()?),
                            kkt_residual: Some(sol.kkt_residual),
                            throughput: Some(rate),
                            ..Default::default()
                        };
                        Ok((row, rate))
                    })
                    .collect::<ptscrc::Result<Vec<_>>>()?;
                infeasible += results.iter().filter(|(r, _)| r.feasible == Some(false)).count();
                run.rates.push((label.clone(), method.name().to_string(), results.iter().map(|(_, r)| *r).collect()));
                run.rows.extend(results.into_iter().map(|(r, _)| r));
            }
        }
    }
    if infeasible > 0 {
        outcome.infeasible =
            Some(format!("{infeasible} of {} power episodes have no admissible allocation", run.rows.len()));
    }
    Ok(run)
}

fn write_episodes(artifacts: &mut Artifacts, rows: &[EpisodeRow]) -> CliResult<()> {
    let records = episode_records(rows);
    artifacts.write_csv("episodes.csv", &EPISODE_HEADER, &records)?;
    artifacts.write_csv("summary.csv", &SUMMARY_HEADER, &summarize_records(&records))?;
    Ok(())
}

pub fn mpc_power(ctx: &Context) -> CliResult<()> {
    let mut outcome = Outcome::default();
    let run = run_power(ctx, "mpc-power", &mut outcome)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    write_episodes(&mut artifacts, &run.rows)?;
    finish(ctx, "mpc-power", artifacts, outcome)
}

struct HarqRun {
    rows: Vec<EpisodeRow>,
    sweep: Vec<Vec<String>>,
    /// Per (beta, method): chosen level and the episodes.
    groups: Vec<(f64, ControlMethod, f64, Vec<HarqEpisode>)>,
    problem: HarqProblem,
}

const SWEEP_HEADER: [&str; 6] = ["beta", "alpha", "lambda", "decoding_rate", "energy_per_bit", "chosen"];

fn run_harq(ctx: &Context, subcommand: &str, outcome: &mut Outcome) -> CliResult<HarqRun> {
    let cfg = &ctx.config;
    let block = cfg.require(&cfg.harq, "harq", subcommand)?;
    let env = cfg.require(&cfg.generator, "generator", subcommand)?;
    let (_, model) = require_model(ctx, subcommand)?;
    let model = model.as_ref();
    let horizon = model.horizon();
    let cal = dataset(ctx, "cal", subcommand, outcome)?;
    let proto_seed = ctx.seed("prototypes");
    outcome.stream("calibration-prototypes", proto_seed, "calibration_prototypes");
    let sweep_seed = ctx.seed("sweep");
    let episodes_seed = ctx.seed("episodes");
    if block.sweep.is_some() {
        outcome.stream("sweep", sweep_seed, "episode");
    }
    outcome.stream("episodes", episodes_seed, "episode");
    let distance = DistanceSpec::AvgL1;
    let base = PtsCrcSettings {
        alpha: block.alpha.unwrap_or(1.0),
        m: block.m,
        filter: FilterSpec::None,
        distance: distance.clone(),
        loss: LossSpec::min_distance(&distance, &env.bounds(), horizon)?,
        seed: proto_seed,
    };
    let mut problem = HarqProblem {
        horizon,
        p_max: block.p_max,
        bandwidth: block.bandwidth,
        noise_density: block.noise_density,
        beta: 0.0,
        slot_duration: block.slot_duration,
    };
    let mut run = HarqRun { rows: Vec::new(), sweep: Vec::new(), groups: Vec::new(), problem: problem.clone() };
    for &beta in &block.betas {
        problem.beta = beta;
        let alpha = match (&block.sweep, block.alpha) {
            (Some(sweep), _) => {
                let result = select_alpha_for_delta(
                    model,
                    &cal,
                    env,
                    &problem,
                    &base,
                    &sweep.alphas,
                    sweep.delta,
                    sweep.episodes,
                    sweep_seed,
                )?;
                for r in &result.rows {
                    run.sweep.push(vec![
                        f(beta),
                        f(r.alpha),
                        f(r.lambda),
                        f(r.decoding_rate),
                        f(r.energy_per_bit),
                        if result.chosen == Some(r.alpha) { "1" } else { "0" }.into(),
                    ]);
                }
                match result.chosen {
                    Some(a) => a,
                    None => {
                        outcome.infeasible = Some(format!(
                            "no level in the sweep grid reaches decoding rate {} at beta={beta}",
                            sweep.delta
                        ));
                        continue;
                    }
                }
            }
            (None, Some(a)) => a,
            (None, None) => return Err(CliError::Config("harq: either `alpha` or `sweep` is required".into())),
        };
        for method in &block.methods {
            let episodes = match method {
                ControlMethod::PtsCrc | ControlMethod::TsCrc => {
                    let m = if *method == ControlMethod::PtsCrc { block.m } else { 1 };
                    let spec = pts_crc_calibrate(model, &cal, &PtsCrcSettings { alpha, m, ..base.clone() })?;
                    let policy = CalibratedStepPredictor { spec: &spec, model, seed: episodes_seed };
                    run_closed_loop_harq(env, &problem, &policy, episodes_seed, block.episodes)?
                }
                ControlMethod::UncertaintyUnaware => {
                    run_closed_loop_harq(env, &problem, &PointStepPredictor { model }, episodes_seed, block.episodes)?
                }
            };
            let label = fmt_label(None, beta);
            run.rows.extend(episodes.iter().enumerate().map(|(i, e)| EpisodeRow {
                config: label.clone(),
                method: method.name().to_string(),
                seed: cfg.seed,
                episode: i,
                feasible: Some(true),
                delay: Some(e.delay),
                decoded: Some(e.decoded),
                throughput: Some(e.throughput),
                energy: Some(e.energy),
                energy_per_bit: Some(e.energy_per_bit),
                ..Default::default()
            }));
            run.groups.push((beta, *method, alpha, episodes));
        }
    }
    run.problem = problem;
    Ok(run)
}

pub fn mpc_harq(ctx: &Context) -> CliResult<()> {
    let mut outcome = Outcome::default();
    let run = run_harq(ctx, "mpc-harq", &mut outcome)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    if !run.sweep.is_empty() {
        artifacts.write_csv("sweep.csv", &SWEEP_HEADER, &run.sweep)?;
    }
    if !run.rows.is_empty() {
        write_episodes(&mut artifacts, &run.rows)?;
    }
    finish(ctx, "mpc-harq", artifacts, outcome)
}

fn ci99(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let half = if xs.len() > 1 { Z_99 * std_dev(xs) / (xs.len() as f64).sqrt() } else { 0.0 };
    (m - half, m + half)
}

/// One calibrated method evaluated on one replication.
struct FigurePoint {
    replication: usize,
    method: &'static str,
    m: usize,
    alpha: f64,
    lambda: f64,
    report: RiskReport,
}

fn figure_point_row(p: &FigurePoint) -> Vec<String> {
    vec![
        p.replication.to_string(),
        p.method.to_string(),
        p.m.to_string(),
        f(p.alpha),
        f(p.lambda),
        f(p.report.coverage),
        f(p.report.risk),
        opt_f(p.report.inefficiency),
    ]
}

const POINT_HEADER: [&str; 8] = ["replication", "method", "m", "alpha", "lambda", "coverage", "risk", "inefficiency"];
const MEANS_HEADER: [&str; 10] = [
    "method",
    "m",
    "alpha",
    "replications",
    "coverage_mean",
    "coverage_ci99_low",
    "coverage_ci99_high",
    "inefficiency_mean",
    "inefficiency_ci99_low",
    "inefficiency_ci99_high",
];

/// Means over replications, grouped by (method, m, alpha) in first-seen order.
fn figure_means(points: &[FigurePoint]) -> Vec<Vec<String>> {
    let mut keys: Vec<(&str, usize, f64)> = Vec::new();
    for p in points {
        let key = (p.method, p.m, p.alpha);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, m, alpha)| {
            let group: Vec<&FigurePoint> =
                points.iter().filter(|p| p.method == method && p.m == m && p.alpha == alpha).collect();
            let cov: Vec<f64> = group.iter().map(|p| p.report.coverage).collect();
            let ineff: Option<Vec<f64>> = group.iter().map(|p| p.report.inefficiency).collect();
            let (cl, ch) = ci99(&cov);
            let (im, il, ih) = match ineff {
                Some(v) => {
                    let (l, h) = ci99(&v);
                    (f(mean(&v)), f(l), f(h))
                }
                None => Default::default(),
            };
            vec![method.to_string(), m.to_string(), f(alpha), group.len().to_string(), f(mean(&cov)), f(cl), f(ch), im, il, ih]
        })
        .collect()
}

/// Calibrates and evaluates each requested method on fresh replication data.
fn replicate(
    ctx: &Context,
    figure: Figure,
    outcome: &mut Outcome,
    cases: &[(&'static str, CalibrationMethod, usize, FilterSpec)],
    alphas: &[f64],
) -> CliResult<Vec<FigurePoint>> {
    let cfg = &ctx.config;
    let name = figure.name();
    let block = cfg.require(&cfg.calibration, "calibration", name)?;
    let gen = cfg.require(&cfg.generator, "generator", name)?;
    let (_, model) = require_model(ctx, name)?;
    let model = model.as_ref();
    let fig = cfg.figure.clone().unwrap_or_default();
    let data = cfg.data.clone().unwrap_or_else(default_data);
    let bounds = gen.bounds();
    let mut points = Vec::new();
    for r in 0..fig.replications {
        let (cal_seed, test_seed, proto_seed) =
            (ctx.seed(&format!("cal-data-{r}")), ctx.seed(&format!("test-data-{r}")), ctx.seed(&format!("prototypes-{r}")));
        outcome.stream(&format!("cal-data-{r}"), cal_seed, "dataset");
        outcome.stream(&format!("test-data-{r}"), test_seed, "dataset");
        outcome.stream(&format!("prototypes-{r}"), proto_seed, "calibration_prototypes");
        let cal = gen_dataset(gen, data.n_cal, cal_seed)?;
        let test = gen_dataset(gen, data.n_test, test_seed)?;
        for &alpha in alphas {
            for &(method, kind, m, filter) in cases {
                let spec = calibrate_with(model, &cal, block, kind, alpha, m, filter, proto_seed)?;
                let items = evaluate_items(&spec, model, &test, &LossSpec::Miscoverage, Some(&bounds))?;
                points.push(FigurePoint {
                    replication: r,
                    method,
                    m: spec.m,
                    alpha,
                    lambda: spec.lambda,
                    report: RiskReport::from_outcomes(&items)?,
                });
            }
        }
    }
    Ok(points)
}

fn figure_cases(fig: &FigureBlock, ms: &[usize], filtered: bool) -> Vec<(&'static str, CalibrationMethod, usize, FilterSpec)> {
    let mut cases = vec![("ts_cp", CalibrationMethod::TsCp, 1, FilterSpec::None)];
    cases.extend(ms.iter().map(|&m| ("pts_crc", CalibrationMethod::PtsCrc, m, FilterSpec::None)));
    if filtered {
        cases.extend(
            ms.iter().map(|&m| ("pts_crc_filtered", CalibrationMethod::PtsCrc, m, FilterSpec::SequenceLevel { kappa: fig.kappa })),
        );
    }
    cases
}

pub fn reproduce_figure(ctx: &Context, figure: Figure) -> CliResult<()> {
    let cfg = &ctx.config;
    let mut outcome = Outcome::default();
    let mut artifacts;
    match figure {
        Figure::InefficiencyVsM => {
            let block = cfg.require(&cfg.calibration, "calibration", figure.name())?;
            let fig = cfg.figure.clone().unwrap_or_default();
            let cases = figure_cases(&fig, &fig.ms, false);
            let points = replicate(ctx, figure, &mut outcome, &cases, &[block.alpha])?;
            artifacts = Artifacts::new(&ctx.out)?;
            artifacts.write_csv("points.csv", &POINT_HEADER, &points.iter().map(figure_point_row).collect::<Vec<_>>())?;
            artifacts.write_csv("means.csv", &MEANS_HEADER, &figure_means(&points))?;
        }
        Figure::CoverageVsAlpha => {
            let block = cfg.require(&cfg.calibration, "calibration", figure.name())?;
            let fig = cfg.figure.clone().unwrap_or_default();
            let explicit = match &cfg.model {
                Some(m) => build_model(ctx, m)?.capability() == Capability::Explicit,
                None => false,
            };
            let cases = figure_cases(&fig, &[block.m], explicit);
            let points = replicate(ctx, figure, &mut outcome, &cases, &fig.alphas)?;
            artifacts = Artifacts::new(&ctx.out)?;
            artifacts.write_csv("points.csv", &POINT_HEADER, &points.iter().map(figure_point_row).collect::<Vec<_>>())?;
            artifacts.write_csv("means.csv", &MEANS_HEADER, &figure_means(&points))?;
        }
        Figure::RateCdf => {
            let run = run_power(ctx, figure.name(), &mut outcome)?;
            artifacts = Artifacts::new(&ctx.out)?;
            write_episodes(&mut artifacts, &run.rows)?;
            let mut rows = Vec::new();
            for (config, method, rates) in &run.rates {
                for (q, x) in inverse_cdf(rates, 101) {
                    rows.push(vec![config.clone(), method.clone(), f(q), f(x)]);
                }
            }
            artifacts.write_csv("rate_cdf.csv", &["config", "method", "quantile", "rate"], &rows)?;
        }
        Figure::HarqMetrics => {
            let run = run_harq(ctx, figure.name(), &mut outcome)?;
            artifacts = Artifacts::new(&ctx.out)?;
            if !run.sweep.is_empty() {
                artifacts.write_csv("sweep.csv", &SWEEP_HEADER, &run.sweep)?;
            }
            if !run.rows.is_empty() {
                write_episodes(&mut artifacts, &run.rows)?;
            }
            let rows: Vec<Vec<String>> = run
                .groups
                .iter()
                .map(|(beta, method, alpha, eps)| {
                    let mut problem = run.problem.clone();
                    problem.beta = *beta;
                    let delays: Vec<f64> = eps.iter().map(|e| e.delay as f64).collect();
                    let throughput: Vec<f64> = eps.iter().map(|e| e.throughput).collect();
                    vec![
                        f(*beta),
                        method.name().to_string(),
                        f(*alpha),
                        eps.len().to_string(),
                        f(decoding_rate(eps)),
                        f(mean(&delays)),
                        f(mean(&throughput)),
                        f(pooled_energy_per_bit(eps, &problem)),
                    ]
                })
                .collect();
            artifacts.write_csv(
                "harq_metrics.csv",
                &["beta", "method", "alpha", "episodes", "decoding_rate", "delay_mean", "throughput_mean", "energy_per_bit"],
                &rows,
            )?;
        }
    }
    finish(ctx, &format!("reproduce-figure {}", figure.name()), artifacts, outcome)
}

/// Aggregates the episode CSVs in `dir` into `summary.csv`.
pub fn summarize(ctx: &Context, dir: &Path) -> CliResult<()> {
    let rows = summarize_dir(dir)?;
    let mut artifacts = Artifacts::new(&ctx.out)?;
    artifacts.write_csv("summary.csv", &SUMMARY_HEADER, &rows)?;
    finish(ctx, "summarize", artifacts, Outcome::default())
}
