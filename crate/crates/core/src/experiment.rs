//! Closed-loop missions, team-level metrics, and the Monte-Carlo strategy
//! comparison.
//!
//! [`MissionRunner`] is the single per-site state machine (briefing, decision,
//! trust feedback). The simulator drives it with a [`SimulatedHuman`]; the
//! session service drives it with requests from a live player, so both paths
//! produce the same [`MissionLog`] for the same inputs.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::human_sim::{PopulationConfig, SimulatedHuman};
use crate::irl::{fit_informed_prior, Observation, WeightBelief, DEFAULT_GRID_SIZE};
use crate::planner::{
    BehaviorWeights, RecommenderConfig, RecommenderState, SiteOutcome, StrategyKind,
};
use crate::preference::{CostModel, RewardWeights};
use crate::scenario::{generate_scenario, MissionConfig, Scenario, Site};
use crate::trust::{fit_trust_params, TrustParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub site_index: usize,
    pub d_scan: f64,
    pub recommended: Action,
    pub chosen: Action,
    pub threat_present: bool,
    /// Performance of the recommendation under the human's (stated) weights.
    pub p_human: u8,
    /// Trust estimate fed to the belief update at this site.
    pub trust_estimate: f64,
    pub slider: u32,
    pub health_after: f64,
    pub time_elapsed_after: f64,
    pub posterior_mean_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub strategy: StrategyKind,
    pub stated_pref: f64,
    pub scenario_seed: u64,
    pub config: MissionConfig,
    pub records: Vec<TrialRecord>,
}

impl MissionLog {
    pub fn observations(&self) -> Vec<Observation> {
        self.records
            .iter()
            .map(|r| Observation {
                recommended: r.recommended,
                chosen: r.chosen,
                trust_estimate: r.trust_estimate,
                scan_prob: r.d_scan,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub average_trust: f64,
    pub end_trust: f64,
    pub agreements: usize,
    pub performance_score: f64,
    pub health_remaining_pct: f64,
    pub time_spent_pct: f64,
}

/// `w_h * health% + w_c * (100 - time%)`.
pub fn performance_score(
    stated_pref: &RewardWeights,
    health_remaining_pct: f64,
    time_spent_pct: f64,
) -> f64 {
    stated_pref.w_health() * health_remaining_pct + stated_pref.w_time() * (100.0 - time_spent_pct)
}

pub fn compute_metrics(log: &MissionLog, stated_pref: &RewardWeights) -> Result<Metrics> {
    let last = log
        .records
        .last()
        .ok_or_else(|| Error::InvalidArgument("mission log has no trials".into()))?;
    let m = log.records.len() as f64;
    let average_trust = log
        .records
        .iter()
        .map(|r| r.slider as f64 / 100.0)
        .sum::<f64>()
        / m;
    let health_remaining_pct = 100.0 * last.health_after / log.config.starting_health;
    let time_spent_pct = 100.0 * last.time_elapsed_after / log.config.time_budget();
    Ok(Metrics {
        average_trust,
        end_trust: last.slider as f64 / 100.0,
        agreements: log
            .records
            .iter()
            .filter(|r| r.chosen == r.recommended)
            .count(),
        performance_score: performance_score(stated_pref, health_remaining_pct, time_spent_pct),
        health_remaining_pct,
        time_spent_pct,
    })
}

/// Where the belief update gets its trust estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrustSource {
    /// Robot-side Beta mean before the site's update.
    #[default]
    Model,
    /// Last slider report, falling back to the model before the first report.
    Slider,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunnerOptions {
    #[serde(default)]
    pub trust_source: TrustSource,
    /// Refit the robot-side trust parameters from the slider history after
    /// every report.
    #[serde(default)]
    pub refit_trust_params: bool,
}

/// What the player sees before deciding at a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Briefing {
    pub site_index: usize,
    pub num_sites: usize,
    pub scan_threat_prob: f64,
    pub seconds_without_robot: f64,
    pub seconds_with_robot: f64,
    pub recommendation: Action,
    pub health: f64,
    pub time_elapsed: f64,
}

/// Revealed after a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub site_index: usize,
    pub scan_threat_prob: f64,
    pub recommendation: Action,
    pub chosen: Action,
    pub threat_present: bool,
    pub health_delta: f64,
    pub site_seconds: f64,
    pub health: f64,
    pub time_elapsed: f64,
}

#[derive(Debug, Clone)]
enum Stage {
    Briefing { recommendation: Action },
    Decided { partial: TrialRecord },
    Done,
}

/// One mission's per-site loop.
#[derive(Debug, Clone)]
pub struct MissionRunner {
    scenario: Scenario,
    recommender: RecommenderState,
    stated_pref: RewardWeights,
    options: RunnerOptions,
    health: f64,
    time: f64,
    stage: Stage,
    records: Vec<TrialRecord>,
    robot_performance: Vec<bool>,
}

impl MissionRunner {
    pub fn new(
        scenario: Scenario,
        recommender: RecommenderState,
        stated_pref: RewardWeights,
        options: RunnerOptions,
    ) -> Result<Self> {
        scenario.validate()?;
        if recommender.num_sites() != scenario.num_sites() {
            return Err(Error::InvalidArgument(format!(
                "recommender plans for {} sites but the scenario has {}",
                recommender.num_sites(),
                scenario.num_sites()
            )));
        }
        if recommender.site_cursor != 0 {
            return Err(Error::InvalidArgument(
                "recommender has already advanced past site 0".into(),
            ));
        }
        let health = scenario.config.starting_health;
        let mut runner = MissionRunner {
            scenario,
            recommender,
            stated_pref,
            options,
            health,
            time: 0.0,
            stage: Stage::Done,
            records: Vec::new(),
            robot_performance: Vec::new(),
        };
        runner.stage = runner.brief()?;
        Ok(runner)
    }

    fn site(&self) -> &Site {
        &self.scenario.sites[self.records.len()]
    }

    fn brief(&self) -> Result<Stage> {
        if self.records.len() == self.scenario.num_sites() {
            return Ok(Stage::Done);
        }
        let recommendation = self.recommender.recommend(self.site().scan_threat_prob)?;
        Ok(Stage::Briefing { recommendation })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn recommender(&self) -> &RecommenderState {
        &self.recommender
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn cursor(&self) -> usize {
        self.records.len()
    }

    pub fn health(&self) -> f64 {
        self.health
    }

    pub fn time_elapsed(&self) -> f64 {
        self.time
    }

    pub fn stated_pref(&self) -> RewardWeights {
        self.stated_pref
    }

    pub fn is_done(&self) -> bool {
        matches!(self.stage, Stage::Done)
    }

    pub fn awaiting_decision(&self) -> bool {
        matches!(self.stage, Stage::Briefing { .. })
    }

    pub fn awaiting_feedback(&self) -> bool {
        matches!(self.stage, Stage::Decided { .. })
    }

    /// Current briefing, if the runner is waiting for a decision.
    pub fn briefing(&self) -> Option<Briefing> {
        let Stage::Briefing { recommendation } = self.stage else {
            return None;
        };
        let site = self.site();
        let cfg = &self.scenario.config;
        Some(Briefing {
            site_index: site.index,
            num_sites: self.scenario.num_sites(),
            scan_threat_prob: site.scan_threat_prob,
            seconds_without_robot: cfg.site_seconds(false),
            seconds_with_robot: cfg.site_seconds(true),
            recommendation,
            health: self.health,
            time_elapsed: self.time,
        })
    }

    fn trust_estimate(&self) -> f64 {
        match (self.options.trust_source, self.records.last()) {
            (TrustSource::Slider, Some(last)) => last.slider as f64 / 100.0,
            _ => self.recommender.trust_state.mean(),
        }
    }

    pub fn decide(&mut self, chosen: Action) -> Result<OutcomeReport> {
        let Stage::Briefing { recommendation } = self.stage else {
            return Err(self.out_of_order("a decision"));
        };
        let site = self.site().clone();
        let cfg = &self.scenario.config;
        let use_robot = chosen == Action::UseRobot;
        let health_delta = if site.threat_present && !use_robot {
            -cfg.health_per_injury
        } else {
            0.0
        };
        let site_seconds = cfg.site_seconds(use_robot);

        let outcome = SiteOutcome {
            recommended: recommendation,
            chosen,
            threat_present: site.threat_present,
            scan_prob: site.scan_threat_prob,
        };
        let trust_estimate = self.trust_estimate();
        self.robot_performance
            .push(self.recommender.assess(recommendation, site.threat_present));
        self.recommender = self
            .recommender
            .observe_outcome_with_estimate(&outcome, trust_estimate)?;
        self.health += health_delta;
        self.time += site_seconds;

        let p_human = crate::trust::evaluate_performance(
            &self.stated_pref,
            &self.recommender.cost_model,
            recommendation,
            site.threat_present,
        );
        self.stage = Stage::Decided {
            partial: TrialRecord {
                site_index: site.index,
                d_scan: site.scan_threat_prob,
                recommended: recommendation,
                chosen,
                threat_present: site.threat_present,
                p_human: p_human as u8,
                trust_estimate,
                slider: 0,
                health_after: self.health,
                time_elapsed_after: self.time,
                posterior_mean_after: self.recommender.belief.mean(),
            },
        };
        Ok(OutcomeReport {
            site_index: site.index,
            scan_threat_prob: site.scan_threat_prob,
            recommendation,
            chosen,
            threat_present: site.threat_present,
            health_delta,
            site_seconds,
            health: self.health,
            time_elapsed: self.time,
        })
    }

    /// Record the trust slider (`0..=100`, even) and move to the next site.
    pub fn feedback(&mut self, slider: u32) -> Result<()> {
        validate_slider(slider)?;
        let Stage::Decided { partial } = &self.stage else {
            return Err(self.out_of_order("trust feedback"));
        };
        let mut record = partial.clone();
        record.slider = slider;
        self.records.push(record);
        if self.options.refit_trust_params {
            self.refit_trust()?;
        }
        self.stage = self.brief()?;
        Ok(())
    }

    fn refit_trust(&mut self) -> Result<()> {
        let reports: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.slider as f64 / 100.0)
            .collect();
        let params = fit_trust_params(&reports, &self.robot_performance)?;
        let successes = self.robot_performance.iter().filter(|p| **p).count() as u32;
        let failures = self.robot_performance.len() as u32 - successes;
        self.recommender.trust_params = params;
        self.recommender.trust_state = params.state_after(successes, failures);
        Ok(())
    }

    fn out_of_order(&self, what: &str) -> Error {
        let expected = match self.stage {
            Stage::Briefing { .. } => "a decision",
            Stage::Decided { .. } => "trust feedback",
            Stage::Done => "nothing (mission finished)",
        };
        Error::OutOfOrder {
            expected: format!("{expected}, got {what}"),
        }
    }

    pub fn log(&self) -> MissionLog {
        MissionLog {
            strategy: self.recommender.strategy,
            stated_pref: self.stated_pref.w_health(),
            scenario_seed: self.scenario.seed,
            config: self.scenario.config.clone(),
            records: self.records.clone(),
        }
    }
}

pub fn validate_slider(slider: u32) -> Result<()> {
    if slider > 100 || !slider.is_multiple_of(2) {
        return Err(Error::validation(
            "slider",
            format!("must be an even integer in 0..=100, got {slider}"),
        ));
    }
    Ok(())
}

/// The human side of a mission.
pub trait HumanChannel {
    fn decide(&mut self, briefing: &Briefing) -> Action;
    fn trust_feedback(&mut self, outcome: &OutcomeReport) -> u32;
}

impl HumanChannel for SimulatedHuman {
    fn decide(&mut self, briefing: &Briefing) -> Action {
        SimulatedHuman::decide(self, briefing.recommendation, briefing.scan_threat_prob)
    }

    fn trust_feedback(&mut self, outcome: &OutcomeReport) -> u32 {
        self.experience(outcome.recommendation, outcome.threat_present);
        self.report_trust()
    }
}

/// Runs a full mission with a simulated human, whose true weights double as
/// the stated preference.
pub fn run_mission(
    recommender: RecommenderState,
    human: &mut SimulatedHuman,
    scenario: &Scenario,
    options: RunnerOptions,
) -> Result<MissionLog> {
    let stated = human.true_weights;
    run_mission_with(recommender, human, scenario, stated, options)
}

pub fn run_mission_with<H: HumanChannel>(
    recommender: RecommenderState,
    human: &mut H,
    scenario: &Scenario,
    stated_pref: RewardWeights,
    options: RunnerOptions,
) -> Result<MissionLog> {
    let mut runner = MissionRunner::new(scenario.clone(), recommender, stated_pref, options)?;
    while let Some(briefing) = runner.briefing() {
        let chosen = human.decide(&briefing);
        let outcome = runner.decide(chosen)?;
        let slider = human.trust_feedback(&outcome);
        runner.feedback(slider)?;
    }
    Ok(runner.log())
}

/// Starting belief for the learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSpec {
    Uniform { grid_size: usize },
    File { path: String },
    Belief(WeightBelief),
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Uniform {
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl PriorSpec {
    pub fn resolve(&self) -> Result<WeightBelief> {
        match self {
            PriorSpec::Uniform { grid_size } => WeightBelief::uniform(*grid_size),
            PriorSpec::File { path } => WeightBelief::load(Path::new(path)),
            PriorSpec::Belief(b) => {
                b.validate()?;
                Ok(b.clone())
            }
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    /// `uniform`, `uniform:N`, or `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(PriorSpec::default());
        }
        if let Some(n) = s.strip_prefix("uniform:") {
            let grid_size = n
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid size in prior `{s}`")))?;
            return Ok(PriorSpec::Uniform { grid_size });
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(PriorSpec::File {
                path: path.to_string(),
            });
        }
        Err(Error::InvalidArgument(format!(
            "unknown prior `{s}` (expected uniform, uniform:N or file:PATH)"
        )))
    }
}

/// The robot's own health weight: fixed, or the mean of the starting prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotWeightSpec {
    Fixed(f64),
    Named(RobotWeightName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobotWeightName {
    PriorMean,
}

impl Default for RobotWeightSpec {
    fn default() -> Self {
        RobotWeightSpec::Fixed(0.5)
    }
}

impl RobotWeightSpec {
    pub fn resolve(&self, prior: &WeightBelief) -> f64 {
        match self {
            RobotWeightSpec::Fixed(w) => *w,
            RobotWeightSpec::Named(RobotWeightName::PriorMean) => prior.mean(),
        }
    }
}

/// Where each replication's scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioSource {
    /// Fresh scenario per replication, seeded from the experiment seed.
    Generate { mission: MissionConfig },
    /// The same scenario for every replication.
    Fixed { scenario: Scenario },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub robot_w_health: RobotWeightSpec,
    /// Rationality coefficient of the planner's human model.
    #[serde(default = "default_kappa")]
    pub robot_kappa: f64,
    #[serde(default)]
    pub robot_trust_params: TrustParams,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub behavior_weights: BehaviorWeights,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub runner: RunnerOptions,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn default_kappa() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// All three strategies on generated `num_sites`-site scenarios, uniform prior,
    /// and default population.
    pub fn new(num_sites: usize, reps: usize, seed: u64) -> Self {
        ExperimentConfig {
            scenario: ScenarioSource::Generate {
                mission: MissionConfig::new(num_sites),
            },
            strategies: all_strategies(),
            prior: PriorSpec::default(),
            robot_w_health: RobotWeightSpec::default(),
            robot_kappa: default_kappa(),
            robot_trust_params: TrustParams::default(),
            cost_model: CostModel::default(),
            behavior_weights: BehaviorWeights::default(),
            population: PopulationConfig::default(),
            runner: RunnerOptions::default(),
            reps,
            seed,
        }
    }

    pub fn recommender_config(
        &self,
        strategy: StrategyKind,
        prior: &WeightBelief,
    ) -> RecommenderConfig {
        RecommenderConfig {
            strategy,
            robot_w_health: self.robot_w_health.resolve(prior),
            kappa: self.robot_kappa,
            trust_params: self.robot_trust_params,
            cost_model: self.cost_model,
            behavior_weights: self.behavior_weights,
        }
    }

    pub fn scenario_for_rep(&self, rep: usize) -> Result<Scenario> {
        match &self.scenario {
            ScenarioSource::Generate { mission } => generate_scenario(
                mission,
                derive_seed(self.seed, Stream::Scenario, rep as u64),
            ),
            ScenarioSource::Fixed { scenario } => {
                scenario.validate()?;
                Ok(scenario.clone())
            }
        }
    }

    pub fn human_for_rep(&self, rep: usize) -> Result<SimulatedHuman> {
        let mut h =
            self.population
                .sample_human(derive_seed(self.seed, Stream::Human, rep as u64))?;
        h.cost_model = self.cost_model;
        Ok(h)
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Scenario = 1,
    Human = 2,
    Order = 3,
}

/// SplitMix64 finalizer over (base, stream, index).
fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let mut z = base
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: StrategyKind,
    pub rep: usize,
    /// Position of this strategy in the replication's randomized order.
    pub order: usize,
    pub human_w_health: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub n: usize,
    pub average_trust: MeanSd,
    pub end_trust: MeanSd,
    pub agreements: MeanSd,
    pub performance: MeanSd,
    pub health_pct: MeanSd,
    pub time_pct: MeanSd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<StrategySummary>,
    pub logs: Vec<(usize, MissionLog)>,
}

impl ComparisonTable {
    pub fn summary_for(&self, strategy: StrategyKind) -> Option<&StrategySummary> {
        self.summary.iter().find(|s| s.strategy == strategy)
    }

    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct CsvRow<'a> {
            strategy: &'a str,
            rep: usize,
            avg_trust: f64,
            end_trust: f64,
            agreements: usize,
            performance: f64,
            health_pct: f64,
            time_pct: f64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow {
                strategy: r.strategy.as_str(),
                rep: r.rep,
                avg_trust: r.metrics.average_trust,
                end_trust: r.metrics.end_trust,
                agreements: r.metrics.agreements,
                performance: r.metrics.performance_score,
                health_pct: r.metrics.health_remaining_pct,
                time_pct: r.metrics.time_spent_pct,
            })?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Measures as rows and strategies as columns.
    pub fn summary_json(&self) -> serde_json::Value {
        use serde_json::{json, Map, Value};
        let measure = |pick: fn(&StrategySummary) -> MeanSd| {
            let mut m = Map::new();
            for s in &self.summary {
                let v = pick(s);
                m.insert(
                    s.strategy.as_str().into(),
                    json!({"mean": v.mean, "sd": v.sd}),
                );
            }
            Value::Object(m)
        };
        json!({
            "strategies": self.summary.iter().map(|s| s.strategy.as_str()).collect::<Vec<_>>(),
            "n": self.summary.iter().map(|s| (s.strategy.as_str().to_string(), json!(s.n))).collect::<Map<_, _>>(),
            "measures": {
                "average_trust": measure(|s| s.average_trust),
                "end_trust": measure(|s| s.end_trust),
                "agreements": measure(|s| s.agreements),
                "performance": measure(|s| s.performance),
                "health_pct": measure(|s| s.health_pct),
                "time_pct": measure(|s| s.time_pct),
            }
        })
    }

    /// Writes `metrics.csv`, `summary.json` and one `mission_<rep>_<strategy>.json` per run.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        write("metrics.csv", self.to_csv()?)?;
        write(
            "summary.json",
            serde_json::to_string_pretty(&self.summary_json()).expect("json"),
        )?;
        for (rep, log) in &self.logs {
            write(
                &format!("mission_{rep}_{}.json", log.strategy),
                serde_json::to_string_pretty(log).expect("json"),
            )?;
        }
        Ok(())
    }
}

struct RepResult {
    rows: Vec<MetricsRow>,
    logs: Vec<MissionLog>,
}

fn run_rep(cfg: &ExperimentConfig, prior: &WeightBelief, rep: usize) -> Result<RepResult> {
    let scenario = cfg.scenario_for_rep(rep)?;
    let mut order = cfg.strategies.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        Stream::Order,
        rep as u64,
    )));
    let mut results = Vec::with_capacity(order.len());
    for (position, &strategy) in order.iter().enumerate() {
        let rec = RecommenderState::new(
            &cfg.recommender_config(strategy, prior),
            prior.clone(),
            scenario.priors(),
        )?;
        let mut human = cfg.human_for_rep(rep)?;
        let w = human.true_weights;
        let log = run_mission(rec, &mut human, &scenario, cfg.runner)?;
        let metrics = compute_metrics(&log, &w)?;
        results.push((
            MetricsRow {
                strategy,
                rep,
                order: position,
                human_w_health: w.w_health(),
                metrics,
            },
            log,
        ));
    }
    // rows follow the configured strategy order, not the randomized one
    results.sort_by_key(|(row, _)| cfg.strategies.iter().position(|s| *s == row.strategy));
    let (rows, logs) = results.into_iter().unzip();
    Ok(RepResult { rows, logs })
}

/// Paired Monte-Carlo comparison: every replication runs each strategy with the
/// same scenario and the same synthetic human.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonTable> {
    if cfg.reps == 0 {
        return Err(Error::InvalidArgument(
            "experiment needs at least one replication".into(),
        ));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::InvalidArgument(
            "experiment needs at least one strategy".into(),
        ));
    }
    cfg.population.validate()?;
    let prior = cfg.prior.resolve()?;
    let reps: Vec<RepResult> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_rep(cfg, &prior, rep))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for (rep, r) in reps.into_iter().enumerate() {
        rows.extend(r.rows);
        logs.extend(r.logs.into_iter().map(|l| (rep, l)));
    }
    let summary = cfg
        .strategies
        .iter()
        .map(|&strategy| {
            let mine: Vec<&Metrics> = rows
                .iter()
                .filter(|r| r.strategy == strategy)
                .map(|r| &r.metrics)
                .collect();
            let col =
                |f: fn(&Metrics) -> f64| MeanSd::of(&mine.iter().map(|m| f(m)).collect::<Vec<_>>());
            StrategySummary {
                strategy,
                n: mine.len(),
                average_trust: col(|m| m.average_trust),
                end_trust: col(|m| m.end_trust),
                agreements: col(|m| m.agreements as f64),
                performance: col(|m| m.performance_score),
                health_pct: col(|m| m.health_remaining_pct),
                time_pct: col(|m| m.time_spent_pct),
            }
        })
        .collect();
    Ok(ComparisonTable {
        rows,
        summary,
        logs,
    })
}

/// Interaction logs from `count` synthetic humans, each playing one mission
/// against an adaptive learner that starts from the uniform prior. These stand
/// in for previously collected data when fitting an informed prior.
pub fn collect_population_logs(
    cfg: &ExperimentConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Observation>>> {
    let mut collection = cfg.clone();
    collection.seed = seed;
    collection.prior = PriorSpec::default();
    let uniform = collection.prior.resolve()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let scenario = collection.scenario_for_rep(i)?;
            let rc = collection.recommender_config(StrategyKind::AdaptiveLearner, &uniform);
            let rec = RecommenderState::new(&rc, uniform.clone(), scenario.priors())?;
            let mut human = collection.human_for_rep(i)?;
            Ok(run_mission(rec, &mut human, &scenario, collection.runner)?.observations())
        })
        .collect()
}

/// Informed prior fitted from [`collect_population_logs`].
pub fn fit_population_prior(
    cfg: &ExperimentConfig,
    count: usize,
    seed: u64,
) -> Result<WeightBelief> {
    let logs = collect_population_logs(cfg, count, seed)?;
    let grid_size = match &cfg.prior {
        PriorSpec::Uniform { grid_size } => *grid_size,
        _ => DEFAULT_GRID_SIZE,
    };
    fit_informed_prior(&logs, grid_size, cfg.robot_kappa, &cfg.cost_model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pref(w: f64) -> RewardWeights {
        RewardWeights::new(w).unwrap()
    }

    fn record(rec: u8, chosen: u8, slider: u32, health: f64, time: f64) -> TrialRecord {
        TrialRecord {
            site_index: 0,
            d_scan: 0.5,
            recommended: Action::try_from(rec).unwrap(),
            chosen: Action::try_from(chosen).unwrap(),
            threat_present: false,
            p_human: 1,
            trust_estimate: 0.5,
            slider,
            health_after: health,
            time_elapsed_after: time,
            posterior_mean_after: 0.5,
        }
    }

    fn log_of(records: Vec<TrialRecord>) -> MissionLog {
        MissionLog {
            strategy: StrategyKind::NonLearner,
            stated_pref: 0.5,
            scenario_seed: 0,
            config: MissionConfig::new(records.len()),
            records,
        }
    }

    #[test]
    fn metric_formula_examples() {
        assert_abs_diff_eq!(performance_score(&pref(0.5), 80.0, 40.0), 70.0);
        assert_abs_diff_eq!(performance_score(&pref(1.0), 100.0, 40.0), 100.0);
    }

    #[test]
    fn metrics_from_log() {
        // 2 sites: budget 50 s
        let log = log_of(vec![
            record(1, 1, 60, 100.0, 25.0),
            record(0, 1, 40, 100.0, 50.0),
        ]);
        let m = compute_metrics(&log, &pref(0.5)).unwrap();
        assert_abs_diff_eq!(m.average_trust, 0.5);
        assert_abs_diff_eq!(m.end_trust, 0.4);
        assert_eq!(m.agreements, 1);
        assert_abs_diff_eq!(m.time_spent_pct, 100.0);
        assert_abs_diff_eq!(m.performance_score, 50.0);
        assert!(compute_metrics(&log_of(vec![]), &pref(0.5)).is_err());
    }

    #[test]
    fn prior_spec_parsing() {
        assert_eq!(
            "uniform".parse::<PriorSpec>().unwrap(),
            PriorSpec::default()
        );
        assert_eq!(
            "uniform:11".parse::<PriorSpec>().unwrap(),
            PriorSpec::Uniform { grid_size: 11 }
        );
        assert_eq!(
            "file:/tmp/p.json".parse::<PriorSpec>().unwrap(),
            PriorSpec::File {
                path: "/tmp/p.json".into()
            }
        );
        assert!("gaussian".parse::<PriorSpec>().is_err());
    }

    #[test]
    fn robot_weight_spec_json() {
        let fixed: RobotWeightSpec = serde_json::from_str("0.7").unwrap();
        assert_eq!(fixed, RobotWeightSpec::Fixed(0.7));
        let named: RobotWeightSpec = serde_json::from_str("\"prior-mean\"").unwrap();
        let b = WeightBelief::point_mass(0.8).unwrap();
        assert_eq!(named.resolve(&b), 0.8);
    }

    #[test]
    fn slider_validation() {
        assert!(validate_slider(0).is_ok());
        assert!(validate_slider(100).is_ok());
        assert!(validate_slider(71).is_err());
        assert!(validate_slider(102).is_err());
    }

    #[test]
    fn runner_enforces_order() {
        let scenario = generate_scenario(&MissionConfig::new(2), 1).unwrap();
        let rec = RecommenderState::new(
            &RecommenderConfig::new(StrategyKind::AdaptiveLearner),
            WeightBelief::uniform(11).unwrap(),
            scenario.priors(),
        )
        .unwrap();
        let mut r = MissionRunner::new(scenario, rec, pref(0.5), RunnerOptions::default()).unwrap();
        assert!(matches!(r.feedback(50), Err(Error::OutOfOrder { .. })));
        r.decide(Action::UseRobot).unwrap();
        assert!(matches!(
            r.decide(Action::UseRobot),
            Err(Error::OutOfOrder { .. })
        ));
        assert!(r.feedback(51).is_err());
        assert!(r.awaiting_feedback());
        r.feedback(50).unwrap();
        r.decide(Action::NoRobot).unwrap();
        r.feedback(50).unwrap();
        assert!(r.is_done());
        assert!(r.briefing().is_none());
        assert!(r.decide(Action::NoRobot).is_err());
    }

    #[test]
    fn length_mismatch_rejected_before_first_trial() {
        let scenario = generate_scenario(&MissionConfig::new(3), 1).unwrap();
        let rec = RecommenderState::new(
            &RecommenderConfig::new(StrategyKind::NonLearner),
            WeightBelief::uniform(11).unwrap(),
            vec![0.5; 2],
        )
        .unwrap();
        assert!(MissionRunner::new(scenario, rec, pref(0.5), RunnerOptions::default()).is_err());
    }

    #[test]
    fn refit_and_slider_trust_source_run() {
        let scenario = generate_scenario(&MissionConfig::new(6), 4).unwrap();
        let rec = RecommenderState::new(
            &RecommenderConfig::new(StrategyKind::AdaptiveLearner),
            WeightBelief::uniform(21).unwrap(),
            scenario.priors(),
        )
        .unwrap();
        let mut human = PopulationConfig::default().sample_human(3).unwrap();
        let opts = RunnerOptions {
            trust_source: TrustSource::Slider,
            refit_trust_params: true,
        };
        let log = run_mission(rec, &mut human, &scenario, opts).unwrap();
        assert_eq!(log.records.len(), 6);
        assert_eq!(
            log.records[1].trust_estimate,
            log.records[0].slider as f64 / 100.0
        );
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(run_comparison(&ExperimentConfig::new(5, 0, 1)).is_err());
    }

    #[test]
    fn one_rep_three_rows() {
        let t = run_comparison(&ExperimentConfig::new(5, 1, 1)).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.logs.len(), 3);
        assert_eq!(t.summary.len(), 3);
        let mut orders: Vec<usize> = t.rows.iter().map(|r| r.order).collect();
        orders.sort();
        assert_eq!(orders, vec![0, 1, 2]);
    }

    #[test]
    fn seeds_are_distinct_across_streams() {
        let a = derive_seed(7, Stream::Scenario, 0);
        let b = derive_seed(7, Stream::Human, 0);
        let c = derive_seed(7, Stream::Scenario, 1);
        assert!(a != b && a != c && b != c);
    }
}
