//! Health/time reward functions and the bounded-rationality disuse choice
//! model. Shared by the planner, which uses it to predict the human, and by
//! the simulated human, which uses it to act.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};

/// Health/time trade-off of one agent.
///
/// Built through [`RewardWeights::new`] the weights sum to one. [`RewardWeights::from_raw`]
/// skips that normalization; it exists for scaling checks on the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    w_health: f64,
    w_time: f64,
}

impl RewardWeights {
    pub fn new(w_health: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w_health) {
            return Err(Error::validation(
                "w_health",
                format!("must lie in [0, 1], got {w_health}"),
            ));
        }
        Ok(RewardWeights {
            w_health,
            w_time: 1.0 - w_health,
        })
    }

    /// Unnormalized weights. Both components must be non-negative.
    pub fn from_raw(w_health: f64, w_time: f64) -> Result<Self> {
        if !(w_health >= 0.0 && w_time >= 0.0 && w_health.is_finite() && w_time.is_finite()) {
            return Err(Error::validation(
                "weights",
                format!("components must be finite and non-negative, got ({w_health}, {w_time})"),
            ));
        }
        Ok(RewardWeights { w_health, w_time })
    }

    pub fn w_health(&self) -> f64 {
        self.w_health
    }

    pub fn w_time(&self) -> f64 {
        self.w_time
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_raw(self.w_health * factor, self.w_time * factor)
    }
}

/// Unit costs of an injury (`h(D, a)`) and of deploying the armored robot (`c(a)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub health_cost_unit: f64,
    pub time_cost_unit: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            health_cost_unit: 1.0,
            time_cost_unit: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.health_cost_unit >= 0.0 && self.time_cost_unit >= 0.0) {
            return Err(Error::validation(
                "cost_model",
                "cost units must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Reward after the threat outcome is known: `-w_h h(D, a) - w_c c(a)`.
pub fn realized_reward(w: &RewardWeights, cm: &CostModel, threat_present: bool, a: Action) -> f64 {
    match a {
        Action::NoRobot if threat_present => -w.w_health * cm.health_cost_unit,
        Action::NoRobot => 0.0,
        Action::UseRobot => -w.w_time * cm.time_cost_unit,
    }
}

/// Expectation of [`realized_reward`] over `D ~ Bernoulli(d)`.
pub fn expected_reward(w: &RewardWeights, cm: &CostModel, d: f64, a: Action) -> f64 {
    match a {
        Action::NoRobot => -w.w_health * d * cm.health_cost_unit,
        Action::UseRobot => -w.w_time * cm.time_cost_unit,
    }
}

/// Softmax over the two expected rewards with rationality coefficient `kappa`.
/// Returns `[q0, q1]`.
pub fn rationality_probs(kappa: f64, er0: f64, er1: f64) -> [f64; 2] {
    let (x0, x1) = (kappa * er0, kappa * er1);
    let m = x0.max(x1);
    let (e0, e1) = ((x0 - m).exp(), (x1 - m).exp());
    let z = e0 + e1;
    let q0 = e0 / z;
    [q0, 1.0 - q0]
}

/// Bounded-rationality probabilities for a human with weights `w` facing scan `d`.
pub fn bounded_rational_probs(kappa: f64, w: &RewardWeights, cm: &CostModel, d: f64) -> [f64; 2] {
    rationality_probs(
        kappa,
        expected_reward(w, cm, d, Action::NoRobot),
        expected_reward(w, cm, d, Action::UseRobot),
    )
}

/// Disuse model given the softmax probabilities `q`: follow with probability
/// `t`, otherwise act bounded-rationally. Returns `[P(a_h = 0), P(a_h = 1)]`.
pub fn disuse_probs(t: f64, q: [f64; 2], recommended: Action) -> [f64; 2] {
    let r = recommended.index();
    let mut out = [0.0; 2];
    out[r] = t + (1.0 - t) * q[r];
    out[1 - r] = (1.0 - t) * (1.0 - q[r]);
    out
}

/// Probability of each human action (indexed by [`Action::index`]) given a
/// recommendation, trust level `t`, and weights `w`.
pub fn choice_distribution(
    t: f64,
    kappa: f64,
    w: &RewardWeights,
    cm: &CostModel,
    d: f64,
    recommended: Action,
) -> [f64; 2] {
    disuse_probs(t, bounded_rational_probs(kappa, w, cm, d), recommended)
}
