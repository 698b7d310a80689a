//! Beta-distribution trust dynamics.
//!
//! Trust after `i` interactions is `t_i ~ Beta(alpha_i, beta_i)`. A successful
//! recommendation adds `vs` to `alpha`; a failed one adds `vf` to `beta`. The
//! same model backs the robot's estimate of the human and the simulated
//! human's own trust.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::action::Action;
use crate::error::{Error, Result};
use crate::preference::{realized_reward, CostModel, RewardWeights};

/// Personalized trust dynamics `(alpha0, beta0, vs, vf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub vs: f64,
    pub vf: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            alpha0: 20.0,
            beta0: 10.0,
            vs: 5.0,
            vf: 10.0,
        }
    }
}

impl TrustParams {
    pub fn new(alpha0: f64, beta0: f64, vs: f64, vf: f64) -> Result<Self> {
        let p = TrustParams {
            alpha0,
            beta0,
            vs,
            vf,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("vs", self.vs),
            ("vf", self.vf),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> TrustState {
        TrustState {
            alpha: self.alpha0,
            beta: self.beta0,
            interactions: 0,
        }
    }

    /// State reached from the initial state after `successes` and `failures`.
    pub fn state_after(&self, successes: u32, failures: u32) -> TrustState {
        TrustState {
            alpha: self.alpha0 + successes as f64 * self.vs,
            beta: self.beta0 + failures as f64 * self.vf,
            interactions: successes + failures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    pub alpha: f64,
    pub beta: f64,
    pub interactions: u32,
}

impl TrustState {
    pub fn mean(&self) -> f64 {
        trust_mean(self)
    }

    pub fn updated(&self, params: &TrustParams, success: bool) -> TrustState {
        update_trust(self, params, success)
    }
}

/// Judgment of a recommendation against the realized threat: the
/// recommendation succeeds when its reward is at least that of the other action.
pub fn evaluate_performance(
    assess_weights: &RewardWeights,
    cm: &CostModel,
    recommended: Action,
    threat_present: bool,
) -> bool {
    realized_reward(assess_weights, cm, threat_present, recommended)
        >= realized_reward(assess_weights, cm, threat_present, recommended.other())
}

/// Probability that `recommended` is judged a success when `D ~ Bernoulli(d)`.
pub fn success_probability(
    assess_weights: &RewardWeights,
    cm: &CostModel,
    recommended: Action,
    d: f64,
) -> f64 {
    let mut p = 0.0;
    if evaluate_performance(assess_weights, cm, recommended, true) {
        p += d;
    }
    if evaluate_performance(assess_weights, cm, recommended, false) {
        p += 1.0 - d;
    }
    p
}

pub fn update_trust(state: &TrustState, params: &TrustParams, success: bool) -> TrustState {
    let mut next = *state;
    if success {
        next.alpha += params.vs;
    } else {
        next.beta += params.vf;
    }
    next.interactions += 1;
    next
}

pub fn trust_mean(state: &TrustState) -> f64 {
    state.alpha / (state.alpha + state.beta)
}

pub fn sample_trust<R: Rng + ?Sized>(state: &TrustState, rng: &mut R) -> f64 {
    Beta::new(state.alpha, state.beta)
        .expect("trust state parameters are positive")
        .sample(rng)
}

/// Search grid used by [`fit_trust_params`].
pub const FIT_GRID_ALPHA0: [f64; 12] = [
    1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0, 75.0, 100.0,
];
pub const FIT_GRID_BETA0: [f64; 12] = FIT_GRID_ALPHA0;
pub const FIT_GRID_GAIN: [f64; 11] = [0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0];

/// Reports at exactly 0 or 1 have zero density under every Beta; they are
/// pulled inside by this margin.
const REPORT_MARGIN: f64 = 0.01;

fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

/// Maximum-likelihood trust parameters over a fixed grid.
///
/// `reported_trust[i]` is read as a draw from the trust distribution after the
/// `i + 1`-th performance outcome. Ties go to the lexicographically smallest
/// `(alpha0, beta0, vs, vf)`.
pub fn fit_trust_params(reported_trust: &[f64], performances: &[bool]) -> Result<TrustParams> {
    if reported_trust.is_empty() || performances.is_empty() {
        return Err(Error::InvalidArgument(
            "fit_trust_params needs at least one report".into(),
        ));
    }
    if reported_trust.len() != performances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} trust reports but {} performance outcomes",
            reported_trust.len(),
            performances.len()
        )));
    }
    if let Some(bad) = reported_trust.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::validation(
            "reported_trust",
            format!("{bad} outside [0, 1]"),
        ));
    }
    let reports: Vec<(f64, f64)> = reported_trust
        .iter()
        .map(|&t| {
            let t = t.clamp(REPORT_MARGIN, 1.0 - REPORT_MARGIN);
            (t.ln(), (1.0 - t).ln())
        })
        .collect();
    // cumulative success/failure counts after each interaction
    let mut counts = Vec::with_capacity(performances.len());
    let (mut s, mut f) = (0u32, 0u32);
    for &p in performances {
        if p {
            s += 1;
        } else {
            f += 1;
        }
        counts.push((s as f64, f as f64));
    }

    let mut best: Option<(f64, TrustParams)> = None;
    for &alpha0 in &FIT_GRID_ALPHA0 {
        for &beta0 in &FIT_GRID_BETA0 {
            for &vs in &FIT_GRID_GAIN {
                for &vf in &FIT_GRID_GAIN {
                    let ll: f64 = reports
                        .iter()
                        .zip(&counts)
                        .map(|(&(lx, l1x), &(s, f))| {
                            let a = alpha0 + s * vs;
                            let b = beta0 + f * vf;
                            (a - 1.0) * lx + (b - 1.0) * l1x
                                - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
                        })
                        .sum();
                    if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                        best = Some((
                            ll,
                            TrustParams {
                                alpha0,
                                beta0,
                                vs,
                                vf,
                            },
                        ));
                    }
                }
            }
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Trust-mean trajectory implied by `params` for a sequence of outcomes.
pub fn mean_trajectory(params: &TrustParams, performances: &[bool]) -> Vec<f64> {
    let mut state = params.initial_state();
    performances
        .iter()
        .map(|&p| {
            state = update_trust(&state, params, p);
            state.mean()
        })
        .collect()
}

/// Log-density of a trust report under `state`; exposed for diagnostics.
pub fn report_log_likelihood(state: &TrustState, report: f64) -> f64 {
    let x = report.clamp(REPORT_MARGIN, 1.0 - REPORT_MARGIN);
    beta_ln_pdf(x, state.alpha, state.beta)
}
