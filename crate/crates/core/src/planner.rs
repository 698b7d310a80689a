//! Trust-aware recommender.
//!
//! The robot plans by exact finite-horizon backward induction over the trust
//! lattice reachable from its current estimate `(alpha, beta)`: after `j`
//! further sites the only reachable states are `(alpha + s vs, beta + (j - s) vf)`
//! for `s = 0..=j`, so a horizon of `k` sites touches `(k + 1)(k + 2) / 2`
//! nodes. The current site uses the drone scan; later sites use the priors.
//!
//! Three strategies differ only in which weights feed each role:
//!
//! | strategy       | assessment / behavior model | optimization    |
//! |----------------|-----------------------------|-----------------|
//! | non-learner    | robot weights               | robot weights   |
//! | non-adaptive   | posterior-mean weights      | robot weights   |
//! | adaptive       | posterior-mean weights      | posterior mean  |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::irl::{update_belief, Observation, WeightBelief};
use crate::preference::{
    bounded_rational_probs, disuse_probs, expected_reward, CostModel, RewardWeights,
};
use crate::trust::{
    evaluate_performance, success_probability, update_trust, TrustParams, TrustState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    #[serde(alias = "non_learner", alias = "NON_LEARNER")]
    NonLearner,
    #[serde(
        rename = "non-adaptive",
        alias = "non-adaptive-learner",
        alias = "NON_ADAPTIVE_LEARNER"
    )]
    NonAdaptiveLearner,
    #[serde(
        rename = "adaptive",
        alias = "adaptive-learner",
        alias = "ADAPTIVE_LEARNER"
    )]
    AdaptiveLearner,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::NonLearner,
        StrategyKind::NonAdaptiveLearner,
        StrategyKind::AdaptiveLearner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::NonLearner => "non-learner",
            StrategyKind::NonAdaptiveLearner => "non-adaptive",
            StrategyKind::AdaptiveLearner => "adaptive",
        }
    }

    pub fn learns(self) -> bool {
        !matches!(self, StrategyKind::NonLearner)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "non-learner" => Ok(StrategyKind::NonLearner),
            "non-adaptive" | "non-adaptive-learner" => Ok(StrategyKind::NonAdaptiveLearner),
            "adaptive" | "adaptive-learner" => Ok(StrategyKind::AdaptiveLearner),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy `{other}` (expected non-learner, non-adaptive or adaptive)"
            ))),
        }
    }
}

/// Which weights the planner's model of the human uses inside the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehaviorWeights {
    #[default]
    Assessment,
    Planning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig {
    pub strategy: StrategyKind,
    #[serde(default = "default_robot_w")]
    pub robot_w_health: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub trust_params: TrustParams,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub behavior_weights: BehaviorWeights,
}

fn default_robot_w() -> f64 {
    0.5
}

fn default_kappa() -> f64 {
    1.0
}

impl RecommenderConfig {
    pub fn new(strategy: StrategyKind) -> Self {
        RecommenderConfig {
            strategy,
            robot_w_health: default_robot_w(),
            kappa: default_kappa(),
            trust_params: TrustParams::default(),
            cost_model: CostModel::default(),
            behavior_weights: BehaviorWeights::default(),
        }
    }
}

/// Q values of the two recommendations at the current site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValues {
    pub q: [f64; 2],
    /// Trust-lattice nodes visited, terminal layer included.
    pub nodes: usize,
}

impl QValues {
    /// Argmax, ties going to the protective action.
    pub fn best(&self) -> Action {
        if self.q[1] >= self.q[0] {
            Action::UseRobot
        } else {
            Action::NoRobot
        }
    }

    pub fn value(&self) -> f64 {
        self.q[0].max(self.q[1])
    }
}

/// Everything the backward induction needs, with each weight role explicit.
#[derive(Debug, Clone)]
pub struct HorizonProblem<'a> {
    pub trust_state: TrustState,
    pub trust_params: TrustParams,
    pub planning: RewardWeights,
    pub behavior: RewardWeights,
    pub assessment: RewardWeights,
    pub kappa: f64,
    pub cost_model: CostModel,
    /// Threat probability per remaining site; element 0 is the current site.
    pub threat_probs: &'a [f64],
}

struct Stage {
    softmax: [f64; 2],
    reward: [f64; 2],
    success: [f64; 2],
}

impl Stage {
    fn new(p: &HorizonProblem<'_>, d: f64) -> Stage {
        let cm = &p.cost_model;
        Stage {
            softmax: bounded_rational_probs(p.kappa, &p.behavior, cm, d),
            reward: Action::ALL.map(|a| expected_reward(&p.planning, cm, d, a)),
            success: Action::ALL.map(|a| success_probability(&p.assessment, cm, a, d)),
        }
    }

    fn q(&self, trust: f64, v_success: f64, v_failure: f64) -> [f64; 2] {
        Action::ALL.map(|rec| {
            let choice = disuse_probs(trust, self.softmax, rec);
            let immediate = choice[0] * self.reward[0] + choice[1] * self.reward[1];
            let ps = self.success[rec.index()];
            immediate + ps * v_success + (1.0 - ps) * v_failure
        })
    }
}

/// Backward induction over the reachable trust lattice.
pub fn solve_horizon(p: &HorizonProblem<'_>) -> Result<QValues> {
    let k = p.threat_probs.len();
    if k == 0 {
        return Err(Error::MissionOver);
    }
    let (alpha, beta) = (p.trust_state.alpha, p.trust_state.beta);
    let (vs, vf) = (p.trust_params.vs, p.trust_params.vf);
    let mut next = vec![0.0; k + 1];
    let mut cur = Vec::with_capacity(k);
    let mut nodes = k + 1;
    for j in (0..k).rev() {
        let stage = Stage::new(p, p.threat_probs[j]);
        cur.clear();
        for s in 0..=j {
            let a = alpha + s as f64 * vs;
            let b = beta + (j - s) as f64 * vf;
            let q = stage.q(a / (a + b), next[s + 1], next[s]);
            if j == 0 {
                return Ok(QValues {
                    q,
                    nodes: nodes + 1,
                });
            }
            cur.push(q[0].max(q[1]));
        }
        nodes += j + 1;
        std::mem::swap(&mut next, &mut cur);
    }
    unreachable!("layer 0 returns")
}

/// Recommender: strategy, learned belief, and the robot's trust estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderState {
    pub strategy: StrategyKind,
    pub robot_weights: RewardWeights,
    pub belief: WeightBelief,
    pub trust_state: TrustState,
    pub trust_params: TrustParams,
    pub kappa: f64,
    pub scenario_priors: Vec<f64>,
    pub site_cursor: usize,
    pub cost_model: CostModel,
    pub behavior_weights: BehaviorWeights,
}

/// What happened at one site, as seen by the recommender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteOutcome {
    pub recommended: Action,
    pub chosen: Action,
    pub threat_present: bool,
    pub scan_prob: f64,
}

impl RecommenderState {
    pub fn new(
        config: &RecommenderConfig,
        prior: WeightBelief,
        scenario_priors: Vec<f64>,
    ) -> Result<Self> {
        config.trust_params.validate()?;
        config.cost_model.validate()?;
        prior.validate()?;
        if !(config.kappa >= 0.0 && config.kappa.is_finite()) {
            return Err(Error::validation(
                "kappa",
                format!("must be finite and >= 0, got {}", config.kappa),
            ));
        }
        if let Some(p) = scenario_priors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::validation(
                "scenario_priors",
                format!("{p} outside [0, 1]"),
            ));
        }
        Ok(RecommenderState {
            strategy: config.strategy,
            robot_weights: RewardWeights::new(config.robot_w_health)?,
            belief: prior,
            trust_state: config.trust_params.initial_state(),
            trust_params: config.trust_params,
            kappa: config.kappa,
            scenario_priors,
            site_cursor: 0,
            cost_model: config.cost_model,
            behavior_weights: config.behavior_weights,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.scenario_priors.len()
    }

    pub fn is_done(&self) -> bool {
        self.site_cursor >= self.num_sites()
    }

    /// Weights used to judge recommendations and update trust.
    pub fn assessment_weights(&self) -> RewardWeights {
        match self.strategy {
            StrategyKind::NonLearner => self.robot_weights,
            _ => self.belief.mean_weights(),
        }
    }

    /// Weights the MDP maximizes.
    pub fn planning_weights(&self) -> RewardWeights {
        match self.strategy {
            StrategyKind::AdaptiveLearner => self.belief.mean_weights(),
            _ => self.robot_weights,
        }
    }

    /// Weights of the human model used inside the planner.
    pub fn behavior_model_weights(&self) -> RewardWeights {
        match self.behavior_weights {
            BehaviorWeights::Assessment => self.assessment_weights(),
            BehaviorWeights::Planning => self.planning_weights(),
        }
    }

    fn lookahead(&self, d_current: f64) -> Result<Vec<f64>> {
        if self.is_done() {
            return Err(Error::MissionOver);
        }
        if !(0.0..=1.0).contains(&d_current) {
            return Err(Error::validation(
                "scan probability",
                format!("{d_current} outside [0, 1]"),
            ));
        }
        let mut probs = Vec::with_capacity(self.num_sites() - self.site_cursor);
        probs.push(d_current);
        probs.extend_from_slice(&self.scenario_priors[self.site_cursor + 1..]);
        Ok(probs)
    }

    pub fn plan_value(&self, d_current: f64) -> Result<QValues> {
        let probs = self.lookahead(d_current)?;
        solve_horizon(&HorizonProblem {
            trust_state: self.trust_state,
            trust_params: self.trust_params,
            planning: self.planning_weights(),
            behavior: self.behavior_model_weights(),
            assessment: self.assessment_weights(),
            kappa: self.kappa,
            cost_model: self.cost_model,
            threat_probs: &probs,
        })
    }

    pub fn recommend(&self, d_current: f64) -> Result<Action> {
        Ok(self.plan_value(d_current)?.best())
    }

    /// Performance as judged by the robot for a recommendation at this site.
    pub fn assess(&self, recommended: Action, threat_present: bool) -> bool {
        evaluate_performance(
            &self.assessment_weights(),
            &self.cost_model,
            recommended,
            threat_present,
        )
    }

    /// Advance past one site using the robot's own trust mean in the likelihood.
    pub fn observe_outcome(&self, outcome: &SiteOutcome) -> Result<Self> {
        self.observe_outcome_with_estimate(outcome, self.trust_state.mean())
    }

    /// As [`Self::observe_outcome`], with an explicit trust estimate for the
    /// belief update (e.g. the human's last slider report).
    pub fn observe_outcome_with_estimate(
        &self,
        outcome: &SiteOutcome,
        trust_estimate: f64,
    ) -> Result<Self> {
        if self.is_done() {
            return Err(Error::MissionOver);
        }
        let success = self.assess(outcome.recommended, outcome.threat_present);
        let mut next = self.clone();
        if self.strategy.learns() {
            let obs = Observation {
                recommended: outcome.recommended,
                chosen: outcome.chosen,
                trust_estimate,
                scan_prob: outcome.scan_prob,
            };
            next.belief = update_belief(&self.belief, &obs, self.kappa, &self.cost_model)?;
        }
        next.trust_state = update_trust(&self.trust_state, &self.trust_params, success);
        next.site_cursor += 1;
        Ok(next)
    }
}
