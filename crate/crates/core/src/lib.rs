//! Trust-aware recommendation engine for a sequential human-robot threat search.
//!
//! A robot recommends, site by site, whether the human should deploy an armored
//! robot before searching. The human's trust in the robot follows a Beta model,
//! the human's compliance follows a bounded-rationality disuse model, and the
//! robot learns the human's health/time trade-off online by Bayesian IRL over a
//! discretized grid. Recommendations come from exact backward induction over the
//! reachable trust lattice.

pub mod action;
pub mod error;
pub mod experiment;
pub mod human_sim;
pub mod irl;
pub mod planner;
pub mod preference;
pub mod scenario;
pub mod service;
pub mod trust;

pub use action::Action;
pub use error::{Error, Result};
pub use experiment::{
    compute_metrics, run_comparison, run_mission, ComparisonTable, ExperimentConfig, Metrics,
    MissionLog, MissionRunner, TrialRecord,
};
pub use human_sim::{PopulationConfig, SimulatedHuman};
pub use irl::{fit_informed_prior, Observation, WeightBelief};
pub use planner::{QValues, RecommenderConfig, RecommenderState, StrategyKind};
pub use preference::{CostModel, RewardWeights};
pub use scenario::{generate_scenario, MissionConfig, Scenario, Site};
pub use trust::{TrustParams, TrustState};
