mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustmdp::experiment::{
    run_mission_with, Briefing, HumanChannel, OutcomeReport, RunnerOptions,
};
use trustmdp::service::{CreateSession, ScenarioRef, SessionManager, TrustResponse};
use trustmdp::{
    compute_metrics, generate_scenario, run_comparison, run_mission, Action, ExperimentConfig,
    MissionConfig, RecommenderConfig, RecommenderState, RewardWeights, SimulatedHuman,
    StrategyKind, TrustParams, WeightBelief,
};

fn recommender(strategy: StrategyKind, robot_w: f64, priors: Vec<f64>) -> RecommenderState {
    let mut cfg = RecommenderConfig::new(strategy);
    cfg.robot_w_health = robot_w;
    RecommenderState::new(&cfg, WeightBelief::uniform(101).unwrap(), priors).unwrap()
}

#[test]
fn forty_site_mission_logs_every_site() {
    let scenario = generate_scenario(&MissionConfig::new(40), 3).unwrap();
    let mut human = SimulatedHuman::new(
        TrustParams::default(),
        1.0,
        RewardWeights::new(0.7).unwrap(),
        4,
    )
    .unwrap();
    let log = run_mission(
        recommender(StrategyKind::AdaptiveLearner, 0.5, scenario.priors()),
        &mut human,
        &scenario,
        RunnerOptions::default(),
    )
    .unwrap();
    assert_eq!(log.records.len(), 40);
    for (i, r) in log.records.iter().enumerate() {
        assert_eq!(r.site_index, i);
        assert_eq!(r.slider % 2, 0);
        assert_eq!(r.d_scan, scenario.sites[i].scan_threat_prob);
    }
    let injuries = log
        .records
        .iter()
        .filter(|r| r.threat_present && r.chosen == Action::NoRobot)
        .count();
    let robots = log
        .records
        .iter()
        .filter(|r| r.chosen == Action::UseRobot)
        .count();
    let last = log.records.last().unwrap();
    assert_eq!(last.health_after, 100.0 - 5.0 * injuries as f64);
    assert_eq!(last.time_elapsed_after, 400.0 + 15.0 * robots as f64);
}

#[test]
fn compliant_human_with_protective_robot_spends_full_budget() {
    let scenario = generate_scenario(&MissionConfig::new(40), 8).unwrap();
    let params = TrustParams::new(1e9, 1.0, 1.0, 1.0).unwrap();
    let mut human = SimulatedHuman::new(params, 1.0, RewardWeights::new(0.2).unwrap(), 1).unwrap();
    let rec = recommender(StrategyKind::NonLearner, 1.0, scenario.priors());
    let log = run_mission(rec, &mut human, &scenario, RunnerOptions::default()).unwrap();
    assert!(log
        .records
        .iter()
        .all(|r| r.recommended == Action::UseRobot && r.chosen == Action::UseRobot));
    let m = compute_metrics(&log, &RewardWeights::new(0.2).unwrap()).unwrap();
    assert_eq!(log.records.last().unwrap().time_elapsed_after, 40.0 * 25.0);
    assert_eq!(m.health_remaining_pct, 100.0);
    assert_eq!(m.time_spent_pct, 100.0);
    assert_eq!(m.agreements, 40);
}

#[test]
fn seeded_missions_reproduce() {
    let run = |seed| {
        let scenario = generate_scenario(&MissionConfig::new(20), seed).unwrap();
        let mut human = SimulatedHuman::new(
            TrustParams::default(),
            2.0,
            RewardWeights::new(0.6).unwrap(),
            seed,
        )
        .unwrap();
        run_mission(
            recommender(StrategyKind::AdaptiveLearner, 0.5, scenario.priors()),
            &mut human,
            &scenario,
            RunnerOptions::default(),
        )
        .unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).records, run(6).records);
}

#[test]
fn comparison_csv_is_byte_identical_across_runs() {
    let cfg = ExperimentConfig::new(10, 12, 99);
    let a = run_comparison(&cfg).unwrap().to_csv().unwrap();
    let b = run_comparison(&cfg).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.lines().next().unwrap(),
        "strategy,rep,avg_trust,end_trust,agreements,performance,health_pct,time_pct"
    );
    assert_eq!(a.lines().count(), 1 + 36);
    let other = run_comparison(&ExperimentConfig::new(10, 12, 100))
        .unwrap()
        .to_csv()
        .unwrap();
    assert_ne!(a, other);
}

#[test]
fn comparison_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let table = run_comparison(&ExperimentConfig::new(5, 2, 1)).unwrap();
    table.write_outputs(dir.path()).unwrap();
    for name in [
        "metrics.csv",
        "summary.json",
        "mission_0_adaptive.json",
        "mission_1_non-learner.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["measures"]["average_trust"]["adaptive"]["mean"].is_number());
}

#[test]
fn metrics_formula_on_random_logs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let (log, pref, want) = common::random_log(&mut rng);
        let got = compute_metrics(&log, &RewardWeights::new(pref).unwrap()).unwrap();
        assert!(common::metrics_match(&got, &want), "{got:?} vs {want:?}");
    }
}

#[test]
fn simulated_follow_rate_matches_model() {
    for (alpha, beta, kappa, d, rec) in [
        (6.0, 4.0, 1.0, 0.3, Action::UseRobot),
        (2.0, 8.0, 5.0, 0.8, Action::NoRobot),
        (1.0, 1.0, 0.0, 0.5, Action::UseRobot),
    ] {
        let params = TrustParams::new(alpha, beta, 1.0, 1.0).unwrap();
        let w = 0.6;
        let mut h = SimulatedHuman::new(params, kappa, RewardWeights::new(w).unwrap(), 77).unwrap();
        let n = 40_000;
        let follows = (0..n).filter(|_| h.decide(rec, d) == rec).count() as f64 / n as f64;
        let t = alpha / (alpha + beta);
        let e0 = (-kappa * w * d).exp();
        let e1 = (-kappa * (1.0 - w)).exp();
        let q_rec = if rec == Action::UseRobot { e1 } else { e0 } / (e0 + e1);
        let p = t + (1.0 - t) * q_rec;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((follows - p).abs() < 3.0 * sigma, "{follows} vs {p}");
    }
}

/// Plays a session through the service with a simulated human's choices.
struct Scripted(SimulatedHuman);

impl HumanChannel for Scripted {
    fn decide(&mut self, b: &Briefing) -> Action {
        self.0.decide(b.recommendation, b.scan_threat_prob)
    }
    fn trust_feedback(&mut self, o: &OutcomeReport) -> u32 {
        self.0.experience(o.recommendation, o.threat_present);
        self.0.report_trust()
    }
}

#[test]
fn service_session_reproduces_simulator_log() {
    for strategy in StrategyKind::ALL {
        let scenario = generate_scenario(&MissionConfig::new(40), 17).unwrap();
        let human = SimulatedHuman::new(
            TrustParams::default(),
            1.0,
            RewardWeights::new(0.7).unwrap(),
            5,
        )
        .unwrap();

        let mut sim_human = Scripted(human.clone());
        let rec = recommender(strategy, 0.5, scenario.priors());
        let expected = run_mission_with(
            rec,
            &mut sim_human,
            &scenario,
            human.true_weights,
            RunnerOptions::default(),
        )
        .unwrap();

        let mgr = SessionManager::in_memory();
        let created = mgr
            .create(&CreateSession {
                scenario: ScenarioRef::Generate {
                    num_sites: 40,
                    seed: 17,
                    config: None,
                },
                strategy: strategy.as_str().into(),
                prior: "uniform".into(),
                stated_pref: Some(70),
                robot_w_health: None,
                kappa: None,
                trust_params: None,
                runner: RunnerOptions::default(),
            })
            .unwrap();
        let mut player = Scripted(human.clone());
        let mut briefing = created.briefing.unwrap();
        loop {
            let chosen = player.decide(&briefing);
            let outcome = mgr.submit_decision(&created.id, chosen).unwrap();
            match mgr
                .submit_trust(&created.id, player.trust_feedback(&outcome))
                .unwrap()
            {
                TrustResponse::Next(b) => briefing = b,
                TrustResponse::Summary(m) => {
                    assert_eq!(m, compute_metrics(&expected, &human.true_weights).unwrap());
                    break;
                }
            }
        }
        assert_eq!(mgr.mission_log(&created.id).unwrap().unwrap(), expected);
    }
}
