//! Bayesian inverse reinforcement learning of the human's health weight on a
//! discretized grid.
//!
//! The belief `b(w)` lives on `n` evenly spaced points of `[0, 1]`. After each
//! site the mass at every grid point is multiplied by the probability, under
//! the disuse model, that a human with that weight would have made the
//! observed choice, then renormalized.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::preference::{choice_distribution, CostModel, RewardWeights};

pub const DEFAULT_GRID_SIZE: usize = 101;

/// Trust estimates are kept inside this margin of `[0, 1]` before the
/// likelihood is evaluated, so a defection never has probability zero.
pub const TRUST_CLAMP: f64 = 1e-6;

/// Loaded beliefs must sum to one within this tolerance.
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBelief {
    grid: Vec<f64>,
    mass: Vec<f64>,
}

/// One accept/reject observation used by the belief update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub recommended: Action,
    pub chosen: Action,
    pub trust_estimate: f64,
    pub scan_prob: f64,
}

impl WeightBelief {
    pub fn new(grid: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        let b = WeightBelief { grid, mass };
        b.validate()?;
        Ok(b)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        uniform_prior(n)
    }

    /// All mass at `w` on a one-point grid.
    pub fn point_mass(w: f64) -> Result<Self> {
        Self::new(vec![w], vec![1.0])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn mean(&self) -> f64 {
        posterior_mean(self)
    }

    pub fn mean_weights(&self) -> RewardWeights {
        RewardWeights::new(self.mean().clamp(0.0, 1.0)).expect("mean of [0, 1] grid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::validation("grid", "must not be empty"));
        }
        if self.grid.len() != self.mass.len() {
            return Err(Error::validation(
                "mass",
                format!(
                    "{} masses for {} grid points",
                    self.mass.len(),
                    self.grid.len()
                ),
            ));
        }
        if let Some(g) = self.grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::validation(
                "grid",
                format!("weight {g} outside [0, 1]"),
            ));
        }
        if self.grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::validation("grid", "must be strictly increasing"));
        }
        if let Some(m) = self.mass.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(Error::validation(
                "mass",
                format!("negative or non-finite mass {m}"),
            ));
        }
        let total: f64 = self.mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::validation(
                "mass",
                format!("sums to {total}, expected 1"),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("belief serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: WeightBelief = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "weight belief".into(),
            source,
        })?;
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Multiply by `likelihood` pointwise and renormalize.
    pub fn reweighted(&self, likelihood: impl Fn(f64) -> f64) -> Result<Self> {
        let mut mass: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.mass)
            .map(|(&w, &m)| m * likelihood(w))
            .collect();
        let total: f64 = mass.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument(
                "observation has zero likelihood under every grid weight".into(),
            ));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(WeightBelief {
            grid: self.grid.clone(),
            mass,
        })
    }
}

/// `n` evenly spaced grid points on `[0, 1]`, equal mass.
pub fn uniform_prior(n: usize) -> Result<WeightBelief> {
    if n < 2 {
        return Err(Error::validation(
            "grid size",
            format!("need at least 2 points, got {n}"),
        ));
    }
    let last = (n - 1) as f64;
    let grid = (0..n).map(|k| k as f64 / last).collect();
    Ok(WeightBelief {
        grid,
        mass: vec![1.0 / n as f64; n],
    })
}

/// Probability that a human with health weight `w` chose `obs.chosen`.
pub fn choice_likelihood(w: f64, obs: &Observation, kappa: f64, cm: &CostModel) -> f64 {
    let t = obs.trust_estimate.clamp(TRUST_CLAMP, 1.0 - TRUST_CLAMP);
    let weights = RewardWeights::new(w).expect("grid weight in [0, 1]");
    choice_distribution(t, kappa, &weights, cm, obs.scan_prob, obs.recommended)[obs.chosen.index()]
}

pub fn update_belief(
    belief: &WeightBelief,
    obs: &Observation,
    kappa: f64,
    cm: &CostModel,
) -> Result<WeightBelief> {
    if !(0.0..=1.0).contains(&obs.trust_estimate) {
        return Err(Error::validation(
            "trust_estimate",
            format!("must lie in [0, 1], got {}", obs.trust_estimate),
        ));
    }
    belief.reweighted(|w| choice_likelihood(w, obs, kappa, cm))
}

pub fn posterior_mean(belief: &WeightBelief) -> f64 {
    belief
        .grid
        .iter()
        .zip(&belief.mass)
        .map(|(g, m)| g * m)
        .sum()
}

/// Population prior: run the update for each logged human from the uniform
/// prior, then average the posteriors pointwise.
pub fn fit_informed_prior(
    logs: &[Vec<Observation>],
    grid_size: usize,
    kappa: f64,
    cm: &CostModel,
) -> Result<WeightBelief> {
    if logs.is_empty() {
        return Err(Error::InvalidArgument(
            "no interaction logs to fit an informed prior from; use the uniform prior instead"
                .into(),
        ));
    }
    let uniform = uniform_prior(grid_size)?;
    let mut acc = vec![0.0; grid_size];
    for log in logs {
        let posterior = log
            .iter()
            .try_fold(uniform.clone(), |b, obs| update_belief(&b, obs, kappa, cm))?;
        acc.iter_mut()
            .zip(&posterior.mass)
            .for_each(|(a, m)| *a += m);
    }
    let total: f64 = acc.iter().sum();
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(WeightBelief {
        grid: uniform.grid,
        mass: acc,
    })
}
