"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/python
then run:
    python crates/python/python/smoke_test.py
"""

import math

import trustmdp


def check_scenario():
    s = trustmdp.generate_scenario(40, 7)
    assert len(s) == 40 and s.seed == 7
    again = trustmdp.Scenario.from_json(s.to_json())
    assert again.sites() == s.sites()
    assert all(0.0 <= site["scan_threat_prob"] <= 1.0 for site in s.sites())
    return s


def check_trust():
    p = trustmdp.TrustParams(20, 10, 5, 10)
    alpha, beta = p.state_after(2, 1)
    assert (alpha, beta) == (30.0, 20.0)
    traj = p.trajectory([True, False])
    assert math.isclose(traj[0], 25 / 35) and math.isclose(traj[1], 25 / 45)


def check_belief():
    b = trustmdp.WeightBelief.uniform(101)
    assert len(b) == 101 and math.isclose(b.mean(), 0.5)
    for _ in range(30):
        # defecting to the robot at low threat signals a health-minded human
        b = b.update(recommended=0, chosen=1, trust_estimate=0.3, scan_prob=0.4)
    assert b.mean() > 0.6
    assert math.isclose(sum(b.mass), 1.0, abs_tol=1e-12)
    prior = trustmdp.fit_informed_prior([[(0, 1, 0.3, 0.4)] * 20, [(1, 0, 0.3, 0.4)] * 20])
    assert 0.0 < prior.mean() < 1.0


def check_mission(scenario):
    rec = trustmdp.Recommender("adaptive", scenario.priors())
    q0, q1 = rec.q_values(scenario.sites()[0]["scan_threat_prob"])
    assert rec.recommend(scenario.sites()[0]["scan_threat_prob"]) == (1 if q1 >= q0 else 0)
    human = trustmdp.SimulatedHuman(0.7, seed=3)
    out = trustmdp.run_mission(rec, human, scenario)
    assert len(out["log"]["records"]) == 40
    assert 0.0 <= out["metrics"]["average_trust"] <= 1.0


def check_comparison():
    a = trustmdp.run_comparison(num_sites=10, reps=5, seed=1)
    b = trustmdp.run_comparison(num_sites=10, reps=5, seed=1)
    assert a.to_csv() == b.to_csv()
    summary = a.summary()
    assert set(summary["strategies"]) == set(trustmdp.STRATEGIES)


def check_sessions():
    sessions = trustmdp.Sessions()
    created = sessions.create({"strategy": "non-learner", "stated_pref": 50,
                               "scenario": {"generate": {"num_sites": 3, "seed": 2}}})
    sid = created["id"]
    for _ in range(3):
        sessions.decision(sid, 1)
        last = sessions.trust(sid, 60)
    assert "summary" in last
    assert sessions.summary(sid)["agreements"] >= 0
    try:
        sessions.trust(sid, 61)
    except (ValueError, RuntimeError):
        pass
    else:
        raise AssertionError("odd slider accepted")


def main():
    scenario = check_scenario()
    check_trust()
    check_belief()
    check_mission(scenario)
    check_comparison()
    check_sessions()
    print("python smoke test passed")


if __name__ == "__main__":
    main()
