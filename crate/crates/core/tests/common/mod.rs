//! Reference implementations written from the model definitions alone, with
//! no calls into the planner, trust, or preference code under test.

#![allow(dead_code)]

/// Parameters of one exhaustive-enumeration problem.
#[derive(Debug, Clone)]
pub struct TreeProblem {
    pub alpha: f64,
    pub beta: f64,
    pub vs: f64,
    pub vf: f64,
    /// Health weights for the three roles; time weight is `1 - w`.
    pub w_plan: f64,
    pub w_behavior: f64,
    pub w_assess: f64,
    pub kappa: f64,
    pub threat_probs: Vec<f64>,
}

fn reward(w_h: f64, threat: bool, a: usize) -> f64 {
    match (a, threat) {
        (0, true) => -w_h,
        (0, false) => 0.0,
        _ => -(1.0 - w_h),
    }
}

fn expected(w_h: f64, d: f64, a: usize) -> f64 {
    if a == 0 {
        -w_h * d
    } else {
        -(1.0 - w_h)
    }
}

/// Softmax over the two expected rewards, computed directly.
pub fn softmax(kappa: f64, w_h: f64, d: f64) -> [f64; 2] {
    let e0 = (kappa * expected(w_h, d, 0)).exp();
    let e1 = (kappa * expected(w_h, d, 1)).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// A recommendation succeeds when it earns at least the alternative's reward.
pub fn succeeds(w_h: f64, rec: usize, threat: bool) -> bool {
    reward(w_h, threat, rec) >= reward(w_h, threat, 1 - rec)
}

/// Probability the human ends up taking action `a` after recommendation `rec`.
pub fn take_prob(t: f64, q: [f64; 2], rec: usize, a: usize) -> f64 {
    let follow = if a == rec { t } else { 0.0 };
    follow + (1.0 - t) * q[a]
}

/// Optimal value from site `j` onward with trust state `(alpha, beta)`.
fn value(p: &TreeProblem, j: usize, alpha: f64, beta: f64) -> f64 {
    if j == p.threat_probs.len() {
        return 0.0;
    }
    let q = q_at(p, j, alpha, beta);
    q[0].max(q[1])
}

fn q_at(p: &TreeProblem, j: usize, alpha: f64, beta: f64) -> [f64; 2] {
    let d = p.threat_probs[j];
    let t = alpha / (alpha + beta);
    let soft = softmax(p.kappa, p.w_behavior, d);
    let mut out = [0.0; 2];
    for (rec, slot) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for threat in [false, true] {
            let pd = if threat { d } else { 1.0 - d };
            if pd == 0.0 {
                continue;
            }
            let (a2, b2) = if succeeds(p.w_assess, rec, threat) {
                (alpha + p.vs, beta)
            } else {
                (alpha, beta + p.vf)
            };
            let future = value(p, j + 1, a2, b2);
            for a in 0..2 {
                let pa = take_prob(t, soft, rec, a);
                total += pd * pa * (reward(p.w_plan, threat, a) + future);
            }
        }
        *slot = total;
    }
    out
}

/// Q values at the first site by enumerating every recommendation, threat
/// outcome, and human action.
pub fn enumerate_q(p: &TreeProblem) -> [f64; 2] {
    q_at(p, 0, p.alpha, p.beta)
}

/// Posterior over a weight grid by direct multiplication of likelihoods.
pub fn brute_posterior(
    grid: &[f64],
    prior: &[f64],
    obs: &[(usize, usize, f64, f64)],
    kappa: f64,
) -> Vec<f64> {
    let mut m: Vec<f64> = prior.to_vec();
    for &(rec, chosen, t, d) in obs {
        let t = t.clamp(1e-6, 1.0 - 1e-6);
        for (i, &w) in grid.iter().enumerate() {
            m[i] *= take_prob(t, softmax(kappa, w, d), rec, chosen);
        }
        let z: f64 = m.iter().sum();
        m.iter_mut().for_each(|x| *x /= z);
    }
    m
}

/// Median absolute posterior-mean error over `seeds` synthetic humans with true
/// health weight `w_star`, evaluated after each count in `counts`.
pub fn irl_median_errors(w_star: f64, counts: &[usize], seeds: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use trustmdp::irl::update_belief;
    use trustmdp::{
        Action, CostModel, Observation, RewardWeights, SimulatedHuman, TrustParams, WeightBelief,
    };

    let max = *counts.iter().max().expect("counts");
    let cm = CostModel::default();
    let params = TrustParams::new(1.0, 9.0, 1.0, 1.0).unwrap();
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); counts.len()];
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut human =
            SimulatedHuman::new(params, 1.0, RewardWeights::new(w_star).unwrap(), seed).unwrap();
        let t_hat = human.trust_mean();
        let mut belief = WeightBelief::uniform(101).unwrap();
        for n in 1..=max {
            let d: f64 = rng.random();
            let rec = if rng.random::<bool>() {
                Action::UseRobot
            } else {
                Action::NoRobot
            };
            let chosen = human.decide(rec, d);
            let obs = Observation {
                recommended: rec,
                chosen,
                trust_estimate: t_hat,
                scan_prob: d,
            };
            belief = update_belief(&belief, &obs, 1.0, &cm).unwrap();
            if let Some(i) = counts.iter().position(|&c| c == n) {
                errors[i].push((belief.mean() - w_star).abs());
            }
        }
    }
    errors
        .into_iter()
        .map(|mut e| {
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = e.len();
            if n % 2 == 1 {
                e[n / 2]
            } else {
                0.5 * (e[n / 2 - 1] + e[n / 2])
            }
        })
        .collect()
}

/// A random but internally consistent mission log together with the metric
/// values computed by hand: `(log, stated weight, [avg, end, agreements,
/// health %, time %, score])`.
pub fn random_log(rng: &mut rand_chacha::ChaCha8Rng) -> (trustmdp::MissionLog, f64, [f64; 6]) {
    use rand::Rng;
    use trustmdp::{Action, MissionConfig, MissionLog, StrategyKind, TrialRecord};

    let m = rng.random_range(1..60);
    let mut health = 100.0;
    let mut time = 0.0;
    let records: Vec<TrialRecord> = (0..m)
        .map(|i| {
            let rec = Action::from_index(rng.random_range(0..2)).unwrap();
            let chosen = Action::from_index(rng.random_range(0..2)).unwrap();
            let threat = rng.random::<bool>();
            if threat && chosen == Action::NoRobot {
                health -= 5.0;
            }
            time += if chosen == Action::UseRobot {
                25.0
            } else {
                10.0
            };
            TrialRecord {
                site_index: i,
                d_scan: rng.random(),
                recommended: rec,
                chosen,
                threat_present: threat,
                p_human: 0,
                trust_estimate: 0.5,
                slider: 2 * rng.random_range(0..=50),
                health_after: health,
                time_elapsed_after: time,
                posterior_mean_after: 0.5,
            }
        })
        .collect();
    let pref: f64 = rng.random();
    let avg = records.iter().map(|r| r.slider as f64).sum::<f64>() / (100.0 * m as f64);
    let end = records[m - 1].slider as f64 / 100.0;
    let agree = records.iter().filter(|r| r.recommended == r.chosen).count() as f64;
    let t_pct = 100.0 * time / (25.0 * m as f64);
    let score = pref * health + (1.0 - pref) * (100.0 - t_pct);
    let log = MissionLog {
        strategy: StrategyKind::NonLearner,
        stated_pref: pref,
        scenario_seed: 0,
        config: MissionConfig::new(m),
        records,
    };
    (log, pref, [avg, end, agree, health, t_pct, score])
}

/// Compares computed metrics against [`random_log`]'s hand values.
pub fn metrics_match(got: &trustmdp::Metrics, want: &[f64; 6]) -> bool {
    let got = [
        got.average_trust,
        got.end_trust,
        got.agreements as f64,
        got.health_remaining_pct,
        got.time_spent_pct,
        got.performance_score,
    ];
    got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-9)
}
