//! Synthetic humans driven by the same generative model the planner assumes:
//! Beta trust dynamics judged with the human's own weights, and the
//! bounded-rationality disuse model for choices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::preference::{bounded_rational_probs, CostModel, RewardWeights};
use crate::scenario::BetaLaw;
use crate::trust::{
    evaluate_performance, sample_trust, trust_mean, update_trust, TrustParams, TrustState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    /// Quantized trust mean.
    #[default]
    Mean,
    /// Quantized draw from the current trust distribution.
    Sampled,
}

#[derive(Debug, Clone)]
pub struct SimulatedHuman {
    pub trust_params: TrustParams,
    pub trust_state: TrustState,
    pub kappa: f64,
    pub true_weights: RewardWeights,
    pub cost_model: CostModel,
    pub report_mode: ReportMode,
    rng: ChaCha8Rng,
}

impl SimulatedHuman {
    pub fn new(
        trust_params: TrustParams,
        kappa: f64,
        true_weights: RewardWeights,
        seed: u64,
    ) -> Result<Self> {
        trust_params.validate()?;
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::validation(
                "kappa",
                format!("must be finite and >= 0, got {kappa}"),
            ));
        }
        Ok(SimulatedHuman {
            trust_params,
            trust_state: trust_params.initial_state(),
            kappa,
            true_weights,
            cost_model: CostModel::default(),
            report_mode: ReportMode::Mean,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_state(mut self, state: TrustState) -> Self {
        self.trust_state = state;
        self
    }

    pub fn trust_mean(&self) -> f64 {
        trust_mean(&self.trust_state)
    }

    /// Sample trust, follow with that probability, otherwise act on the softmax.
    pub fn decide(&mut self, recommended: Action, d: f64) -> Action {
        let t = sample_trust(&self.trust_state, &mut self.rng);
        if self.rng.random::<f64>() < t {
            return recommended;
        }
        let q = bounded_rational_probs(self.kappa, &self.true_weights, &self.cost_model, d);
        if self.rng.random::<f64>() < q[1] {
            Action::UseRobot
        } else {
            Action::NoRobot
        }
    }

    /// Judge the recommendation against the realized threat and update trust.
    /// Returns the performance outcome.
    pub fn experience(&mut self, recommended: Action, threat_present: bool) -> bool {
        let p = evaluate_performance(
            &self.true_weights,
            &self.cost_model,
            recommended,
            threat_present,
        );
        self.trust_state = update_trust(&self.trust_state, &self.trust_params, p);
        p
    }

    /// Trust slider value on the 0..=100 step-2 grid.
    pub fn report_trust(&mut self) -> u32 {
        let t = match self.report_mode {
            ReportMode::Mean => self.trust_mean(),
            ReportMode::Sampled => sample_trust(&self.trust_state, &mut self.rng),
        };
        quantize_slider(t)
    }
}

/// Nearest multiple of 2 on `0..=100` to `t * 100`.
pub fn quantize_slider(t: f64) -> u32 {
    (2.0 * (t.clamp(0.0, 1.0) * 50.0).round()) as u32
}

/// Independent uniform ranges for each trust parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustParamLaw {
    pub alpha0: [f64; 2],
    pub beta0: [f64; 2],
    pub vs: [f64; 2],
    pub vf: [f64; 2],
}

impl TrustParamLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrustParams> {
        let mut draw = |[lo, hi]: [f64; 2]| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        TrustParams::new(
            draw(self.alpha0),
            draw(self.beta0),
            draw(self.vs),
            draw(self.vf),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    #[serde(default = "default_w_law")]
    pub w_law: BetaLaw,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub trust_params: TrustParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_param_law: Option<TrustParamLaw>,
    #[serde(default)]
    pub report_mode: ReportMode,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_w_law() -> BetaLaw {
    BetaLaw::new(4.0, 2.0)
}

fn default_kappa() -> f64 {
    1.0
}

fn default_count() -> usize {
    30
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            w_law: default_w_law(),
            kappa: default_kappa(),
            trust_params: TrustParams::default(),
            trust_param_law: None,
            report_mode: ReportMode::Mean,
            count: default_count(),
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.w_law.validate("population.w_law")?;
        self.trust_params.validate()?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::validation(
                "population.kappa",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// One human, deterministic in `seed`. Its decision stream is seeded from
    /// `seed` as well, so equal seeds give identical humans.
    pub fn sample_human(&self, seed: u64) -> Result<SimulatedHuman> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = RewardWeights::new(self.w_law.sample(&mut rng))?;
        let params = match &self.trust_param_law {
            Some(law) => law.sample(&mut rng)?,
            None => self.trust_params,
        };
        let mut h = SimulatedHuman::new(params, self.kappa, w, rng.random())?;
        h.report_mode = self.report_mode;
        Ok(h)
    }
}
