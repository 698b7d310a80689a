//! Live mission sessions.
//!
//! A session wraps one [`MissionRunner`] behind the per-site protocol
//! `BRIEFING -> AWAITING_DECISION -> AWAITING_TRUST -> BRIEFING | DONE`. Every
//! accepted request is appended to a JSON-lines event log so sessions can be
//! rebuilt after a restart. Mission time is simulated cost only; no wall clock
//! is consulted anywhere.
//!
//! This module is transport-agnostic; the HTTP layer lives in the server crate.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::Error;
use crate::experiment::{
    compute_metrics, validate_slider, Briefing, Metrics, MissionLog, MissionRunner, OutcomeReport,
    PriorSpec, RunnerOptions,
};
use crate::irl::WeightBelief;
use crate::planner::{BehaviorWeights, RecommenderConfig, RecommenderState, StrategyKind};
use crate::preference::{CostModel, RewardWeights};
use crate::scenario::{generate_scenario, load_scenario, MissionConfig, Scenario};
use crate::trust::TrustParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    AwaitingPref,
    Briefing,
    AwaitingDecision,
    AwaitingTrust,
    Done,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::AwaitingPref => "AWAITING_PREF",
            Phase::Briefing => "BRIEFING",
            Phase::AwaitingDecision => "AWAITING_DECISION",
            Phase::AwaitingTrust => "AWAITING_TRUST",
            Phase::Done => "DONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("{message}")]
    Protocol {
        message: String,
        expected_phase: Phase,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Protocol { .. } => "protocol_error",
            ServiceError::Validation(_) => "validation_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn expected_phase(&self) -> Option<Phase> {
        match self {
            ServiceError::Protocol { expected_phase, .. } => Some(*expected_phase),
            _ => None,
        }
    }

    fn wrong_phase(actual: Phase, expected: Phase, action: &str) -> Self {
        ServiceError::Protocol {
            message: format!("cannot accept {action} in phase {actual}; expected phase {expected}"),
            expected_phase: expected,
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. } | Error::InvalidArgument(_) | Error::Parse { .. } => {
                ServiceError::Validation(e.to_string())
            }
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioRef {
    Generate {
        num_sites: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<MissionConfig>,
    },
    Path(String),
    Inline(Scenario),
}

impl Default for ScenarioRef {
    fn default() -> Self {
        ScenarioRef::Generate {
            num_sites: 40,
            seed: 0,
            config: None,
        }
    }
}

impl ScenarioRef {
    fn resolve(&self) -> crate::Result<Scenario> {
        match self {
            ScenarioRef::Generate {
                num_sites,
                seed,
                config,
            } => {
                let mut cfg = config
                    .clone()
                    .unwrap_or_else(|| MissionConfig::new(*num_sites));
                cfg.num_sites = *num_sites;
                generate_scenario(&cfg, *seed)
            }
            ScenarioRef::Path(p) => load_scenario(Path::new(p)),
            ScenarioRef::Inline(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub scenario: ScenarioRef,
    pub strategy: String,
    /// `uniform`, `uniform:N` or `file:PATH`.
    #[serde(default = "default_prior")]
    pub prior: String,
    /// Pre-mission preference slider, `0` = all time, `100` = all health.
    /// When absent the session starts in `AWAITING_PREF`.
    #[serde(default)]
    pub stated_pref: Option<u32>,
    #[serde(default)]
    pub robot_w_health: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub trust_params: Option<TrustParams>,
    #[serde(default)]
    pub runner: RunnerOptions,
}

fn default_prior() -> String {
    "uniform".into()
}

/// Fully resolved session inputs; this is what the event log stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionSetup {
    scenario: Scenario,
    prior: WeightBelief,
    recommender: RecommenderConfig,
    runner: RunnerOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        id: String,
        setup: Box<SessionSetup>,
        stated_pref: Option<u32>,
    },
    Preference {
        slider: u32,
    },
    Ready,
    Decision {
        chosen: Action,
    },
    Trust {
        slider: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub phase: Phase,
    pub strategy: StrategyKind,
    pub cursor: usize,
    pub num_sites: usize,
    pub health: f64,
    pub time_elapsed: f64,
    pub stated_pref: Option<f64>,
    pub briefing: Option<Briefing>,
    /// Outcome of the most recently decided site.
    pub last_outcome: Option<OutcomeReport>,
    pub summary: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub phase: Phase,
    pub briefing: Option<Briefing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustResponse {
    Next(Briefing),
    Summary(Metrics),
}

#[derive(Debug)]
struct Started {
    runner: MissionRunner,
    last_outcome: Option<OutcomeReport>,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    phase: Phase,
    setup: SessionSetup,
    started: Option<Started>,
}

impl Session {
    fn new(id: String, setup: SessionSetup, stated_pref: Option<u32>) -> ServiceResult<Session> {
        let mut s = Session {
            id,
            phase: Phase::AwaitingPref,
            setup,
            started: None,
        };
        if let Some(slider) = stated_pref {
            s.set_preference(slider)?;
        }
        Ok(s)
    }

    fn set_preference(&mut self, slider: u32) -> ServiceResult<()> {
        if self.phase != Phase::AwaitingPref {
            return Err(ServiceError::wrong_phase(
                self.phase,
                Phase::AwaitingPref,
                "a preference",
            ));
        }
        if slider > 100 {
            return Err(ServiceError::Validation(format!(
                "stated_pref must lie in 0..=100, got {slider}"
            )));
        }
        let pref = RewardWeights::new(slider as f64 / 100.0)?;
        let rec = RecommenderState::new(
            &self.setup.recommender,
            self.setup.prior.clone(),
            self.setup.scenario.priors(),
        )?;
        let runner = MissionRunner::new(self.setup.scenario.clone(), rec, pref, self.setup.runner)?;
        self.started = Some(Started {
            runner,
            last_outcome: None,
        });
        self.phase = Phase::Briefing;
        Ok(())
    }

    fn ready(&mut self) -> ServiceResult<()> {
        if self.phase != Phase::Briefing {
            return Err(ServiceError::wrong_phase(
                self.phase,
                Phase::Briefing,
                "ready",
            ));
        }
        self.phase = Phase::AwaitingDecision;
        Ok(())
    }

    fn started_mut(&mut self) -> &mut Started {
        self.started
            .as_mut()
            .expect("phase past AWAITING_PREF implies a runner")
    }

    fn decide(&mut self, chosen: Action) -> ServiceResult<OutcomeReport> {
        // the decision also closes an unacknowledged briefing
        if !matches!(self.phase, Phase::Briefing | Phase::AwaitingDecision) {
            return Err(ServiceError::wrong_phase(
                self.phase,
                Phase::AwaitingDecision,
                "a decision",
            ));
        }
        let started = self.started_mut();
        let outcome = started.runner.decide(chosen)?;
        started.last_outcome = Some(outcome.clone());
        self.phase = Phase::AwaitingTrust;
        Ok(outcome)
    }

    fn trust(&mut self, slider: u32) -> ServiceResult<TrustResponse> {
        if self.phase != Phase::AwaitingTrust {
            return Err(ServiceError::wrong_phase(
                self.phase,
                Phase::AwaitingTrust,
                "trust feedback",
            ));
        }
        validate_slider(slider)?;
        let started = self.started_mut();
        started.runner.feedback(slider)?;
        if started.runner.is_done() {
            self.phase = Phase::Done;
            Ok(TrustResponse::Summary(self.summary()?))
        } else {
            let b = started.runner.briefing().expect("runner is briefing");
            self.phase = Phase::Briefing;
            Ok(TrustResponse::Next(b))
        }
    }

    fn summary(&self) -> ServiceResult<Metrics> {
        if self.phase != Phase::Done {
            return Err(ServiceError::wrong_phase(
                self.phase,
                Phase::Done,
                "a summary request",
            ));
        }
        let runner = &self.started.as_ref().expect("done implies started").runner;
        Ok(compute_metrics(&runner.log(), &runner.stated_pref())?)
    }

    fn briefing(&self) -> Option<Briefing> {
        self.started.as_ref().and_then(|s| s.runner.briefing())
    }

    pub fn snapshot(&self) -> Snapshot {
        let runner = self.started.as_ref().map(|s| &s.runner);
        Snapshot {
            id: self.id.clone(),
            phase: self.phase,
            strategy: self.setup.recommender.strategy,
            cursor: runner.map_or(0, |r| r.cursor()),
            num_sites: self.setup.scenario.num_sites(),
            health: runner.map_or(self.setup.scenario.config.starting_health, |r| r.health()),
            time_elapsed: runner.map_or(0.0, |r| r.time_elapsed()),
            stated_pref: runner.map(|r| r.stated_pref().w_health()),
            briefing: self.briefing(),
            last_outcome: self.started.as_ref().and_then(|s| s.last_outcome.clone()),
            summary: self.summary().ok(),
        }
    }

    fn log(&self) -> Option<MissionLog> {
        self.started.as_ref().map(|s| s.runner.log())
    }

    fn apply(&mut self, event: &Event) -> ServiceResult<()> {
        match event {
            Event::Created { .. } => Err(ServiceError::Internal("duplicate creation event".into())),
            Event::Preference { slider } => self.set_preference(*slider),
            Event::Ready => self.ready(),
            Event::Decision { chosen } => self.decide(*chosen).map(drop),
            Event::Trust { slider } => self.trust(*slider).map(drop),
        }
    }
}

struct Entry {
    session: Session,
    log_file: Option<File>,
}

impl Entry {
    fn record(&mut self, event: &Event) -> ServiceResult<()> {
        if let Some(f) = self.log_file.as_mut() {
            let line = serde_json::to_string(event).expect("event serializes");
            writeln!(f, "{line}").map_err(|e| ServiceError::Internal(format!("event log: {e}")))?;
            f.flush()
                .map_err(|e| ServiceError::Internal(format!("event log: {e}")))?;
        }
        Ok(())
    }
}

/// All live sessions. Requests on one session are serialized by its own lock;
/// sessions share nothing else.
#[derive(Default)]
pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    log_dir: Option<PathBuf>,
    defaults: SessionDefaults,
}

/// Planner settings applied when a request leaves them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDefaults {
    pub robot_w_health: f64,
    pub kappa: f64,
    pub trust_params: TrustParams,
    pub cost_model: CostModel,
    pub behavior_weights: BehaviorWeights,
}

impl Default for SessionDefaults {
    fn default() -> Self {
        let r = RecommenderConfig::new(StrategyKind::AdaptiveLearner);
        SessionDefaults {
            robot_w_health: r.robot_w_health,
            kappa: r.kappa,
            trust_params: r.trust_params,
            cost_model: r.cost_model,
            behavior_weights: r.behavior_weights,
        }
    }
}

impl SessionManager {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_defaults(mut self, defaults: SessionDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    /// Sessions persisted under `dir`, one `<id>.jsonl` per session. Existing
    /// logs are replayed.
    pub fn persistent(dir: impl Into<PathBuf>) -> ServiceResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| ServiceError::Internal(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let session = replay(&path)?;
            let file = OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
            sessions.insert(
                session.id.clone(),
                Arc::new(Mutex::new(Entry {
                    session,
                    log_file: Some(file),
                })),
            );
        }
        Ok(SessionManager {
            sessions: RwLock::new(sessions),
            log_dir: Some(dir),
            defaults: SessionDefaults::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn setup(&self, req: &CreateSession) -> ServiceResult<SessionSetup> {
        let strategy: StrategyKind = req.strategy.parse()?;
        let prior = req.prior.parse::<PriorSpec>()?.resolve()?;
        let scenario = req.scenario.resolve()?;
        let d = &self.defaults;
        Ok(SessionSetup {
            scenario,
            prior,
            recommender: RecommenderConfig {
                strategy,
                robot_w_health: req.robot_w_health.unwrap_or(d.robot_w_health),
                kappa: req.kappa.unwrap_or(d.kappa),
                trust_params: req.trust_params.unwrap_or(d.trust_params),
                cost_model: d.cost_model,
                behavior_weights: d.behavior_weights,
            },
            runner: req.runner,
        })
    }

    pub fn create(&self, req: &CreateSession) -> ServiceResult<Created> {
        let setup = self.setup(req)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), setup.clone(), req.stated_pref)?;
        let log_file = match &self.log_dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                Some(
                    File::create(&path)
                        .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?,
                )
            }
            None => None,
        };
        let created = Created {
            id: id.clone(),
            phase: session.phase,
            briefing: session.briefing(),
        };
        let mut entry = Entry { session, log_file };
        entry.record(&Event::Created {
            id: id.clone(),
            setup: Box::new(setup),
            stated_pref: req.stated_pref,
        })?;
        self.sessions
            .write()
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(created)
    }

    fn entry(&self, id: &str) -> ServiceResult<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Apply `event` under the session lock; it is logged only if accepted.
    fn mutate<T>(
        &self,
        id: &str,
        event: Event,
        f: impl FnOnce(&mut Session) -> ServiceResult<T>,
    ) -> ServiceResult<T> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock();
        let out = f(&mut entry.session)?;
        entry.record(&event)?;
        Ok(out)
    }

    pub fn submit_preference(&self, id: &str, slider: u32) -> ServiceResult<Snapshot> {
        self.mutate(id, Event::Preference { slider }, |s| {
            s.set_preference(slider)?;
            Ok(s.snapshot())
        })
    }

    /// Acknowledge the briefing: `BRIEFING -> AWAITING_DECISION`.
    pub fn ready(&self, id: &str) -> ServiceResult<Snapshot> {
        self.mutate(id, Event::Ready, |s| {
            s.ready()?;
            Ok(s.snapshot())
        })
    }

    pub fn submit_decision(&self, id: &str, chosen: Action) -> ServiceResult<OutcomeReport> {
        self.mutate(id, Event::Decision { chosen }, |s| s.decide(chosen))
    }

    pub fn submit_trust(&self, id: &str, slider: u32) -> ServiceResult<TrustResponse> {
        self.mutate(id, Event::Trust { slider }, |s| s.trust(slider))
    }

    pub fn get_state(&self, id: &str) -> ServiceResult<Snapshot> {
        Ok(self.entry(id)?.lock().session.snapshot())
    }

    pub fn summary(&self, id: &str) -> ServiceResult<Metrics> {
        self.entry(id)?.lock().session.summary()
    }

    /// Trial records so far.
    pub fn mission_log(&self, id: &str) -> ServiceResult<Option<MissionLog>> {
        Ok(self.entry(id)?.lock().session.log())
    }
}

fn replay(path: &Path) -> ServiceResult<Session> {
    let bad = |msg: String| ServiceError::Internal(format!("{}: {msg}", path.display()));
    let file = File::open(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| bad("empty event log".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let Event::Created {
        id,
        setup,
        stated_pref,
    } = serde_json::from_str(&first).map_err(|e| bad(e.to_string()))?
    else {
        return Err(bad("first event is not a creation".into()));
    };
    let mut session = Session::new(id, *setup, stated_pref)?;
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        session.apply(&event)?;
    }
    Ok(session)
}
