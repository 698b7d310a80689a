//! Python bindings. Structured results (scenarios, logs, metrics, snapshots)
//! cross the boundary as plain dicts and lists.

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use trustmdp::experiment::{
    run_mission as core_run_mission, ExperimentConfig, PriorSpec, RobotWeightSpec, RunnerOptions,
};
use trustmdp::irl::update_belief;
use trustmdp::planner::SiteOutcome;
use trustmdp::service::{CreateSession, ServiceError, SessionManager};
use trustmdp::{Action, CostModel, Error, MissionConfig, Observation, RewardWeights};

fn err(e: Error) -> PyErr {
    match e {
        Error::Validation { .. } | Error::InvalidArgument(_) | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn service_err(e: ServiceError) -> PyErr {
    match e {
        ServiceError::Validation(m) => PyValueError::new_err(m),
        ServiceError::NotFound(id) => PyKeyError::new_err(id),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn action(a: u8) -> PyResult<Action> {
    Action::try_from(a)
        .map_err(|_| PyValueError::new_err(format!("action must be 0 or 1, got {a}")))
}

#[pyclass(name = "Scenario", module = "trustmdp", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: trustmdp::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: trustmdp::Scenario::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.inner.num_sites()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn priors(&self) -> Vec<f64> {
        self.inner.priors()
    }

    /// Sites as dicts with `index`, `prior_threat_prob`, `scan_threat_prob`, `threat_present`.
    fn sites<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.sites)
    }

    fn __len__(&self) -> usize {
        self.inner.num_sites()
    }
}

/// `generate_scenario(num_sites, seed, config=None)`; `config` is a dict of
/// mission settings.
#[pyfunction]
#[pyo3(signature = (num_sites, seed, config=None))]
fn generate_scenario(
    num_sites: usize,
    seed: u64,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyScenario> {
    let mut cfg = match config {
        Some(c) => from_py::<MissionConfig>(c)?,
        None => MissionConfig::new(num_sites),
    };
    cfg.num_sites = num_sites;
    Ok(PyScenario {
        inner: trustmdp::generate_scenario(&cfg, seed).map_err(err)?,
    })
}

#[pyclass(name = "TrustParams", module = "trustmdp", from_py_object)]
#[derive(Clone, Copy)]
struct PyTrustParams {
    inner: trustmdp::TrustParams,
}

#[pymethods]
impl PyTrustParams {
    #[new]
    #[pyo3(signature = (alpha0=20.0, beta0=10.0, vs=5.0, vf=10.0))]
    fn new(alpha0: f64, beta0: f64, vs: f64, vf: f64) -> PyResult<Self> {
        Ok(PyTrustParams {
            inner: trustmdp::TrustParams::new(alpha0, beta0, vs, vf).map_err(err)?,
        })
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.inner.alpha0
    }
    #[getter]
    fn beta0(&self) -> f64 {
        self.inner.beta0
    }
    #[getter]
    fn vs(&self) -> f64 {
        self.inner.vs
    }
    #[getter]
    fn vf(&self) -> f64 {
        self.inner.vf
    }

    /// `(alpha, beta)` after the given numbers of successes and failures.
    #[pyo3(signature = (successes=0, failures=0))]
    fn state_after(&self, successes: u32, failures: u32) -> (f64, f64) {
        let s = self.inner.state_after(successes, failures);
        (s.alpha, s.beta)
    }

    /// Trust mean after each performance in sequence.
    fn trajectory(&self, performances: Vec<bool>) -> Vec<f64> {
        trustmdp::trust::mean_trajectory(&self.inner, &performances)
    }

    #[staticmethod]
    fn fit(reported_trust: Vec<f64>, performances: Vec<bool>) -> PyResult<Self> {
        Ok(PyTrustParams {
            inner: trustmdp::trust::fit_trust_params(&reported_trust, &performances)
                .map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        let p = self.inner;
        format!(
            "TrustParams(alpha0={}, beta0={}, vs={}, vf={})",
            p.alpha0, p.beta0, p.vs, p.vf
        )
    }
}

#[pyclass(name = "WeightBelief", module = "trustmdp", from_py_object)]
#[derive(Clone)]
struct PyWeightBelief {
    inner: trustmdp::WeightBelief,
}

#[pymethods]
impl PyWeightBelief {
    #[new]
    fn new(grid: Vec<f64>, mass: Vec<f64>) -> PyResult<Self> {
        Ok(PyWeightBelief {
            inner: trustmdp::WeightBelief::new(grid, mass).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n=101))]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(PyWeightBelief {
            inner: trustmdp::WeightBelief::uniform(n).map_err(err)?,
        })
    }

    #[staticmethod]
    fn point_mass(w: f64) -> PyResult<Self> {
        Ok(PyWeightBelief {
            inner: trustmdp::WeightBelief::point_mass(w).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyWeightBelief {
            inner: trustmdp::WeightBelief::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid().to_vec()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.mass().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    /// Posterior after observing one choice.
    #[pyo3(signature = (recommended, chosen, trust_estimate, scan_prob, kappa=1.0))]
    fn update(
        &self,
        recommended: u8,
        chosen: u8,
        trust_estimate: f64,
        scan_prob: f64,
        kappa: f64,
    ) -> PyResult<Self> {
        let obs = Observation {
            recommended: action(recommended)?,
            chosen: action(chosen)?,
            trust_estimate,
            scan_prob,
        };
        let inner = update_belief(&self.inner, &obs, kappa, &CostModel::default()).map_err(err)?;
        Ok(PyWeightBelief { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Informed prior from logs, each a list of
/// `(recommended, chosen, trust_estimate, scan_prob)` tuples.
#[pyfunction]
#[pyo3(signature = (logs, grid_size=101, kappa=1.0))]
fn fit_informed_prior(
    logs: Vec<Vec<(u8, u8, f64, f64)>>,
    grid_size: usize,
    kappa: f64,
) -> PyResult<PyWeightBelief> {
    let logs = logs
        .into_iter()
        .map(|log| {
            log.into_iter()
                .map(|(r, c, t, d)| {
                    Ok(Observation {
                        recommended: action(r)?,
                        chosen: action(c)?,
                        trust_estimate: t,
                        scan_prob: d,
                    })
                })
                .collect::<PyResult<Vec<_>>>()
        })
        .collect::<PyResult<Vec<_>>>()?;
    let inner = trustmdp::fit_informed_prior(&logs, grid_size, kappa, &CostModel::default())
        .map_err(err)?;
    Ok(PyWeightBelief { inner })
}

#[pyclass(name = "Recommender", module = "trustmdp", from_py_object)]
#[derive(Clone)]
struct PyRecommender {
    inner: trustmdp::RecommenderState,
}

#[pymethods]
impl PyRecommender {
    #[new]
    #[pyo3(signature = (strategy, scenario_priors, prior=None, robot_w_health=0.5, kappa=1.0, trust_params=None))]
    fn new(
        strategy: &str,
        scenario_priors: Vec<f64>,
        prior: Option<PyWeightBelief>,
        robot_w_health: f64,
        kappa: f64,
        trust_params: Option<PyTrustParams>,
    ) -> PyResult<Self> {
        let mut cfg = trustmdp::RecommenderConfig::new(strategy.parse().map_err(err)?);
        cfg.robot_w_health = robot_w_health;
        cfg.kappa = kappa;
        if let Some(p) = trust_params {
            cfg.trust_params = p.inner;
        }
        let prior = match prior {
            Some(p) => p.inner,
            None => trustmdp::WeightBelief::uniform(101).map_err(err)?,
        };
        Ok(PyRecommender {
            inner: trustmdp::RecommenderState::new(&cfg, prior, scenario_priors).map_err(err)?,
        })
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.as_str()
    }

    #[getter]
    fn site_cursor(&self) -> usize {
        self.inner.site_cursor
    }

    #[getter]
    fn trust_mean(&self) -> f64 {
        self.inner.trust_state.mean()
    }

    #[getter]
    fn belief(&self) -> PyWeightBelief {
        PyWeightBelief {
            inner: self.inner.belief.clone(),
        }
    }

    fn assessment_w_health(&self) -> f64 {
        self.inner.assessment_weights().w_health()
    }

    fn planning_w_health(&self) -> f64 {
        self.inner.planning_weights().w_health()
    }

    /// `(Q[no robot], Q[use robot])` at the current site.
    fn q_values(&self, scan_prob: f64) -> PyResult<(f64, f64)> {
        let q = self.inner.plan_value(scan_prob).map_err(err)?;
        Ok((q.q[0], q.q[1]))
    }

    fn recommend(&self, scan_prob: f64) -> PyResult<u8> {
        Ok(self.inner.recommend(scan_prob).map_err(err)?.into())
    }

    /// Advance past the current site.
    fn observe(
        &mut self,
        recommended: u8,
        chosen: u8,
        threat_present: bool,
        scan_prob: f64,
    ) -> PyResult<()> {
        let outcome = SiteOutcome {
            recommended: action(recommended)?,
            chosen: action(chosen)?,
            threat_present,
            scan_prob,
        };
        self.inner = self.inner.observe_outcome(&outcome).map_err(err)?;
        Ok(())
    }
}

#[pyclass(name = "SimulatedHuman", module = "trustmdp")]
struct PySimulatedHuman {
    inner: trustmdp::SimulatedHuman,
}

#[pymethods]
impl PySimulatedHuman {
    #[new]
    #[pyo3(signature = (w_health, kappa=1.0, trust_params=None, seed=0))]
    fn new(
        w_health: f64,
        kappa: f64,
        trust_params: Option<PyTrustParams>,
        seed: u64,
    ) -> PyResult<Self> {
        let params = trust_params.map_or_else(trustmdp::TrustParams::default, |p| p.inner);
        let w = RewardWeights::new(w_health).map_err(err)?;
        Ok(PySimulatedHuman {
            inner: trustmdp::SimulatedHuman::new(params, kappa, w, seed).map_err(err)?,
        })
    }

    #[getter]
    fn trust_mean(&self) -> f64 {
        self.inner.trust_mean()
    }

    #[getter]
    fn w_health(&self) -> f64 {
        self.inner.true_weights.w_health()
    }

    fn decide(&mut self, recommended: u8, scan_prob: f64) -> PyResult<u8> {
        Ok(self.inner.decide(action(recommended)?, scan_prob).into())
    }

    fn experience(&mut self, recommended: u8, threat_present: bool) -> PyResult<bool> {
        Ok(self.inner.experience(action(recommended)?, threat_present))
    }

    fn report_trust(&mut self) -> u32 {
        self.inner.report_trust()
    }
}

/// One mission; returns `{"log": ..., "metrics": ...}`. The human is advanced
/// in place.
#[pyfunction]
#[pyo3(signature = (recommender, human, scenario))]
fn run_mission<'py>(
    py: Python<'py>,
    recommender: &PyRecommender,
    human: &mut PySimulatedHuman,
    scenario: &PyScenario,
) -> PyResult<Bound<'py, PyAny>> {
    let log = core_run_mission(
        recommender.inner.clone(),
        &mut human.inner,
        &scenario.inner,
        RunnerOptions::default(),
    )
    .map_err(err)?;
    let metrics = trustmdp::compute_metrics(&log, &human.inner.true_weights).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("log", to_py(py, &log)?)?;
    out.set_item("metrics", to_py(py, &metrics)?)?;
    Ok(out.into_any())
}

#[pyclass(name = "ComparisonResult", module = "trustmdp")]
struct PyComparison {
    inner: trustmdp::ComparisonTable,
}

#[pymethods]
impl PyComparison {
    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv().map_err(err)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary_json())
    }

    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.rows)
    }

    fn write_outputs(&self, dir: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_outputs(&dir).map_err(err)
    }
}

/// Paired Monte-Carlo comparison. `config`, when given, is a full experiment
/// configuration dict and the keyword arguments are ignored.
#[pyfunction]
#[pyo3(signature = (num_sites=40, reps=200, seed=0, strategies=None, prior="uniform", robot_w_health=0.5, config=None))]
fn run_comparison(
    num_sites: usize,
    reps: usize,
    seed: u64,
    strategies: Option<Vec<String>>,
    prior: &str,
    robot_w_health: f64,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyComparison> {
    let cfg = match config {
        Some(c) => from_py::<ExperimentConfig>(c)?,
        None => {
            let mut cfg = ExperimentConfig::new(num_sites, reps, seed);
            if let Some(names) = strategies {
                cfg.strategies = names
                    .iter()
                    .map(|n| n.parse().map_err(err))
                    .collect::<PyResult<_>>()?;
            }
            cfg.prior = prior.parse::<PriorSpec>().map_err(err)?;
            cfg.robot_w_health = RobotWeightSpec::Fixed(robot_w_health);
            cfg
        }
    };
    Ok(PyComparison {
        inner: trustmdp::run_comparison(&cfg).map_err(err)?,
    })
}

/// In-process interactive sessions, the same engine the HTTP server uses.
#[pyclass(name = "Sessions", module = "trustmdp")]
struct PySessions {
    inner: SessionManager,
}

#[pymethods]
impl PySessions {
    #[new]
    fn new() -> Self {
        PySessions {
            inner: SessionManager::in_memory(),
        }
    }

    /// Takes the same fields as the `POST /sessions` body.
    fn create<'py>(
        &self,
        py: Python<'py>,
        request: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let req: CreateSession = from_py(request)?;
        to_py(py, &self.inner.create(&req).map_err(service_err)?)
    }

    fn state<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.get_state(id).map_err(service_err)?)
    }

    fn preference<'py>(
        &self,
        py: Python<'py>,
        id: &str,
        stated_pref: u32,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &self
                .inner
                .submit_preference(id, stated_pref)
                .map_err(service_err)?,
        )
    }

    fn ready<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.ready(id).map_err(service_err)?)
    }

    fn decision<'py>(&self, py: Python<'py>, id: &str, chosen: u8) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &self
                .inner
                .submit_decision(id, action(chosen)?)
                .map_err(service_err)?,
        )
    }

    fn trust<'py>(&self, py: Python<'py>, id: &str, slider: u32) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &self.inner.submit_trust(id, slider).map_err(service_err)?,
        )
    }

    fn summary<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary(id).map_err(service_err)?)
    }
}

#[pymodule]
#[pyo3(name = "trustmdp")]
fn trustmdp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrustParams>()?;
    m.add_class::<PyWeightBelief>()?;
    m.add_class::<PyRecommender>()?;
    m.add_class::<PySimulatedHuman>()?;
    m.add_class::<PyComparison>()?;
    m.add_class::<PySessions>()?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(fit_informed_prior, m)?)?;
    m.add_function(wrap_pyfunction!(run_mission, m)?)?;
    m.add_function(wrap_pyfunction!(run_comparison, m)?)?;
    m.add("STRATEGIES", ["non-learner", "non-adaptive", "adaptive"])?;
    Ok(())
}
