mod common;

use common::{brute_posterior, irl_median_errors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustmdp::irl::update_belief;
use trustmdp::{
    fit_informed_prior, Action, CostModel, Observation, RewardWeights, SimulatedHuman, TrustParams,
    WeightBelief,
};

#[test]
fn posterior_error_shrinks_with_data() {
    for w_star in [0.3, 0.7] {
        let med = irl_median_errors(w_star, &[25, 50, 100, 200, 400], 50);
        assert!(med[3] < 0.1, "w*={w_star}: {med:?}");
        assert!(med.windows(2).all(|p| p[1] <= p[0]), "w*={w_star}: {med:?}");
    }
}

#[test]
fn sequential_updates_match_direct_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cm = CostModel::default();
    for _ in 0..50 {
        let kappa = rng.random_range(0.0..8.0);
        let obs: Vec<(usize, usize, f64, f64)> = (0..30)
            .map(|_| {
                (
                    rng.random_range(0..2),
                    rng.random_range(0..2),
                    rng.random_range(0.0..=1.0),
                    rng.random_range(0.0..=1.0),
                )
            })
            .collect();
        let mut belief = WeightBelief::uniform(21).unwrap();
        for &(r, c, t, d) in &obs {
            let o = Observation {
                recommended: Action::from_index(r).unwrap(),
                chosen: Action::from_index(c).unwrap(),
                trust_estimate: t,
                scan_prob: d,
            };
            belief = update_belief(&belief, &o, kappa, &cm).unwrap();
        }
        let want = brute_posterior(belief.grid(), &[1.0 / 21.0; 21], &obs, kappa);
        for (g, w) in belief.mass().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

fn logs_for(ws: &[f64], per_human: usize, seed: u64) -> Vec<Vec<Observation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ws.iter()
        .enumerate()
        .map(|(i, &w)| {
            let params = TrustParams::new(2.0, 8.0, 1.0, 1.0).unwrap();
            let mut h =
                SimulatedHuman::new(params, 1.0, RewardWeights::new(w).unwrap(), seed + i as u64)
                    .unwrap();
            let t = h.trust_mean();
            (0..per_human)
                .map(|_| {
                    let d: f64 = rng.random();
                    let rec = if rng.random::<bool>() {
                        Action::UseRobot
                    } else {
                        Action::NoRobot
                    };
                    let chosen = h.decide(rec, d);
                    Observation {
                        recommended: rec,
                        chosen,
                        trust_estimate: t,
                        scan_prob: d,
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn informed_prior_from_health_minded_humans_leans_high() {
    let logs = logs_for(&[0.9; 5], 300, 1);
    let prior = fit_informed_prior(&logs, 101, 1.0, &CostModel::default()).unwrap();
    assert!(prior.mean() > 0.7, "{}", prior.mean());
}

#[test]
fn informed_prior_from_opposed_humans_is_central() {
    let logs = logs_for(&[0.2, 0.8], 300, 2);
    let prior = fit_informed_prior(&logs, 101, 1.0, &CostModel::default()).unwrap();
    assert!((prior.mean() - 0.5).abs() < 0.1, "{}", prior.mean());
    let total: f64 = prior.mass().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn informed_prior_from_one_simulated_mission() {
    use trustmdp::experiment::RunnerOptions;
    use trustmdp::{
        generate_scenario, run_mission, MissionConfig, RecommenderConfig, RecommenderState,
        StrategyKind,
    };

    let mut means = Vec::new();
    for seed in 0..20 {
        let scenario = generate_scenario(&MissionConfig::new(40), seed).unwrap();
        let uniform = WeightBelief::uniform(101).unwrap();
        let rec = RecommenderState::new(
            &RecommenderConfig::new(StrategyKind::AdaptiveLearner),
            uniform,
            scenario.priors(),
        )
        .unwrap();
        let mut human = SimulatedHuman::new(
            TrustParams::default(),
            1.0,
            RewardWeights::new(0.9).unwrap(),
            seed,
        )
        .unwrap();
        let log = run_mission(rec, &mut human, &scenario, RunnerOptions::default()).unwrap();
        let prior =
            fit_informed_prior(&[log.observations()], 101, 1.0, &CostModel::default()).unwrap();
        means.push(prior.mean());
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(means[10] > 0.7, "median prior mean {}", means[10]);
}
