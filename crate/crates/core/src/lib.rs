//! Prototype-based conformal risk control for time series.
//!
//! A probabilistic forecaster (anything that can sample future trajectories
//! given a past window) is wrapped into a set predictor: `m` sampled
//! prototype trajectories, each surrounded by a ball of radius `lambda`
//! under a trajectory distance. The radius is calibrated on held-out series
//! so that the expected value of a bounded, set-monotone loss stays below a
//! target level `alpha`.
//!
//! The calibrated sets then drive two robust model-predictive power
//! controllers for wireless links: an open-loop interference-constrained
//! rate maximisation and a closed-loop HARQ-IR energy minimisation.
//!
//! Module map:
//!
//! - [`trajectory`], [`distance`], [`interval`], [`predictor`]: trajectory
//!   algebra, distances, ball-union sets and their per-step geometry.
//! - [`models`]: forecasters (Gaussian AR, forking mixture, k-NN bootstrap,
//!   tabular Markov chain) and likelihood-aware prototype filtering.
//! - [`generators`]: synthetic forking environments.
//! - [`calibrate`]: losses, split-conformal quantile, risk-control threshold,
//!   evaluation.
//! - [`mpc`]: robust surrogate controllers built on calibrated sets.
//! - [`io`]: CSV/JSON series formats.

pub mod calibrate;
pub mod distance;
pub mod error;
pub mod generators;
pub mod interval;
pub mod io;
pub mod models;
pub mod mpc;
pub mod predictor;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use distance::DistanceSpec;
pub use error::{Error, Result};
pub use interval::{Interval, IntervalUnion};
pub use predictor::{BallUnionPredictor, PrototypeSet};
pub use rng::{StreamDomain, StreamRng};
pub use trajectory::{Bounds, SeriesSample};
