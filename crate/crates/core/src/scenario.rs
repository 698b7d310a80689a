//! Mission definitions: site count, cost constants, per-site threat priors,
//! drone-scan probabilities and ground-truth threat realizations.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a Beta law. Used for threat priors and population weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLaw {
    pub a: f64,
    pub b: f64,
}

impl BetaLaw {
    pub fn new(a: f64, b: f64) -> Self {
        BetaLaw { a, b }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::validation(
                field,
                format!(
                    "Beta shape parameters must be positive, got ({}, {})",
                    self.a, self.b
                ),
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.a, self.b)
            .expect("validated Beta law")
            .sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub num_sites: usize,
    #[serde(default = "defaults::health_per_injury")]
    pub health_per_injury: f64,
    #[serde(default = "defaults::deploy_seconds")]
    pub deploy_seconds: f64,
    #[serde(default = "defaults::base_search_seconds")]
    pub base_search_seconds: f64,
    #[serde(default = "defaults::starting_health")]
    pub starting_health: f64,
    /// `None` means the worst case `num_sites * (base + deploy)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget_seconds: Option<f64>,
    #[serde(default = "defaults::threat_prior_law")]
    pub threat_prior_law: BetaLaw,
    /// Standard deviation of the scan perturbation around the prior.
    #[serde(default = "defaults::scan_noise")]
    pub scan_noise: f64,
}

mod defaults {
    use super::BetaLaw;

    pub fn health_per_injury() -> f64 {
        5.0
    }
    pub fn deploy_seconds() -> f64 {
        15.0
    }
    pub fn base_search_seconds() -> f64 {
        10.0
    }
    pub fn starting_health() -> f64 {
        100.0
    }
    pub fn threat_prior_law() -> BetaLaw {
        BetaLaw::new(2.0, 2.0)
    }
    pub fn scan_noise() -> f64 {
        0.1
    }
}

impl MissionConfig {
    pub fn new(num_sites: usize) -> Self {
        MissionConfig {
            num_sites,
            health_per_injury: defaults::health_per_injury(),
            deploy_seconds: defaults::deploy_seconds(),
            base_search_seconds: defaults::base_search_seconds(),
            starting_health: defaults::starting_health(),
            time_budget_seconds: None,
            threat_prior_law: defaults::threat_prior_law(),
            scan_noise: defaults::scan_noise(),
        }
    }

    pub fn time_budget(&self) -> f64 {
        self.time_budget_seconds
            .unwrap_or(self.num_sites as f64 * (self.base_search_seconds + self.deploy_seconds))
    }

    /// Search duration for a site given the chosen action.
    pub fn site_seconds(&self, use_robot: bool) -> f64 {
        if use_robot {
            self.base_search_seconds + self.deploy_seconds
        } else {
            self.base_search_seconds
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sites == 0 {
            return Err(Error::validation("num_sites", "must be at least 1"));
        }
        for (name, v) in [
            ("health_per_injury", self.health_per_injury),
            ("deploy_seconds", self.deploy_seconds),
            ("base_search_seconds", self.base_search_seconds),
            ("starting_health", self.starting_health),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if let Some(budget) = self.time_budget_seconds {
            let floor = self.num_sites as f64 * self.base_search_seconds;
            if !(budget.is_finite() && budget >= floor) {
                return Err(Error::validation(
                    "time_budget_seconds",
                    format!(
                        "must be at least num_sites * base_search_seconds = {floor}, got {budget}"
                    ),
                ));
            }
        }
        self.threat_prior_law.validate("threat_prior_law")?;
        if !(self.scan_noise >= 0.0 && self.scan_noise.is_finite()) {
            return Err(Error::validation(
                "scan_noise",
                format!("must be non-negative, got {}", self.scan_noise),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub index: usize,
    pub prior_threat_prob: f64,
    pub scan_threat_prob: f64,
    pub threat_present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: MissionConfig,
    pub seed: u64,
    pub sites: Vec<Site>,
}

impl Scenario {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn priors(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.prior_threat_prob).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.sites.len() != self.config.num_sites {
            return Err(Error::validation(
                "sites",
                format!(
                    "expected {} sites (config.num_sites), found {}",
                    self.config.num_sites,
                    self.sites.len()
                ),
            ));
        }
        for (i, site) in self.sites.iter().enumerate() {
            if site.index != i {
                return Err(Error::validation(
                    format!("sites[{i}].index"),
                    format!("expected {i}, found {}", site.index),
                ));
            }
            for (name, p) in [
                ("prior_threat_prob", site.prior_threat_prob),
                ("scan_threat_prob", site.scan_threat_prob),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::validation(
                        format!("sites[{i}].{name}"),
                        format!("probability must lie in [0, 1], got {p}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "scenario".into(),
            source,
        })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Deterministic in `(config, seed)`.
pub fn generate_scenario(config: &MissionConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (config.scan_noise > 0.0)
        .then(|| Normal::new(0.0, config.scan_noise).expect("validated noise"));
    let sites = (0..config.num_sites)
        .map(|index| {
            let prior = config.threat_prior_law.sample(&mut rng);
            let threat_present = rng.random_bool(prior);
            let scan = match &noise {
                // truncated at two standard deviations, then clamped into [0, 1]
                Some(n) => loop {
                    let e: f64 = n.sample(&mut rng);
                    if e.abs() <= 2.0 * config.scan_noise {
                        break (prior + e).clamp(0.0, 1.0);
                    }
                },
                None => prior,
            };
            Site {
                index,
                prior_threat_prob: prior,
                scan_threat_prob: scan,
                threat_present,
            }
        })
        .collect();
    Ok(Scenario {
        config: config.clone(),
        seed,
        sites,
    })
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    fs::write(path, scenario.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text)
}
