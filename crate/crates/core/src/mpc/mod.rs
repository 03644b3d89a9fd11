//! Robust control on calibrated set predictors.
//!
//! Two wireless problems are covered. Open-loop power control maximises a
//! secondary link's rate while keeping windowed interference towards a
//! protected link below a budget for every gain trajectory in the set.
//! Closed-loop retransmission control spends the least energy needed to
//! deliver a message, replanning each slot against a lower gain envelope.
//! Both tighten their constraint by the Lipschitz margin `L·α`.

mod harq;
mod interference;
mod power;
pub mod reference;
mod solver;
mod sweep;

pub use harq::{
    decoding_rate, episode_series, gain_envelope, harq_target_rate, inverse_water_filling, lipschitz_rate,
    pooled_energy_per_bit, run_closed_loop_harq, run_harq_episode, solve_harq_step, CalibratedStepPredictor,
    HarqDecision, HarqEpisode, HarqProblem, OracleStepPredictor, StepPredictor, RATE_TOLERANCE,
};
pub use interference::{
    interference_threshold, lipschitz_interference, max_k_window_interference, robust_interference_constraints,
    robust_window_interference,
};
pub use power::{
    achieved_rate, run_power_episode, NormalizedProgram, solve_open_loop_power, solve_open_loop_power_with, ControlSolution,
    PowerControlProblem, PowerEpisode,
};
pub use solver::{maximize_log_rate, LinearConstraints, Projector, SolverOptions, SolverOutcome};
pub use sweep::{select_alpha_for_delta, AlphaSweep, SweepRow};
