import math

import numpy as np
import pytest

reap_py = pytest.importorskip("reap_py")


def test_cut_matches_cost_difference():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(3, 3))
    a = g @ g.T
    x0, xi, xj = rng.uniform(size=(3, 3))
    m = reap_py.pair_matrix(xi, xj, x0)
    diff = (xi - x0) @ a @ (xi - x0) - (xj - x0) @ a @ (xj - x0)
    assert np.sum(a * m) == pytest.approx(diff, abs=1e-12)
    assert reap_py.cost(a, xi, x0) == pytest.approx((xi - x0) @ a @ (xi - x0))


def test_empty_cuts_center_is_half_identity():
    r = reap_py.chebyshev_center([], dim=4)
    assert np.array_equal(r["center"], 0.5 * np.eye(4))
    assert r["radius"] == 0.5
    assert r["status"] == "optimal"


def test_scalar_center():
    r = reap_py.chebyshev_center([np.array([[3.0]])], margin=0.01)
    assert r["center"][0, 0] == pytest.approx(0.0, abs=1e-6)
    assert r["radius"] == pytest.approx(1 / 300, abs=1e-6)


def test_worst_case_without_cuts_is_trace():
    s = np.diag([1.0, 2.0, 3.0])
    r = reap_py.max_over_confidence(s, [])
    assert r["value"] == pytest.approx(6.0, abs=1e-7)
    assert r["gap"] <= 1e-5


def test_tolerant_center_drops_one_of_two_contradicting_cuts():
    m = reap_py.pair_matrix(np.array([1.0]), np.array([2.0]), np.array([0.0]))
    r = reap_py.tolerant_center([m, -m], margin=0.0, alpha=0.5)
    assert len(r["violated"]) == 1
    with pytest.raises(reap_py.ReapError):
        reap_py.tolerant_center([m, -m], margin=0.0, alpha=0.0)


def test_lqr_scalar_golden_ratio():
    a = reap_py.gen_truth_lqr(np.ones((1, 1)), np.ones((1, 1)))
    assert a[0, 0] == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-9)


def test_wilcoxon_all_negative():
    assert reap_py.wilcoxon_one_sided([-1.0, -2.0, -3.0, -4.0, -5.0]) == pytest.approx(1 / 32)


def test_simulated_session_shrinks_radius():
    rng = np.random.default_rng(3)
    x0 = np.zeros(2)
    pool = [p for p in rng.uniform(size=(40, 2))]
    truth = reap_py.gen_truth_random(2, 5)
    s = reap_py.Session(x0, pool, budget=3)
    while not s.finished:
        s.next_question()
        s.answer(s.simulated_answer(truth))
    assert s.round == 3
    assert 0 < s.radius < 0.5
    assert len(s.cuts) == 3
    assert reap_py.mean_rank(s.center, truth, pool, x0, 5) >= 0.0


def test_grad_recourse_crosses_boundary():
    plan = reap_py.generate_grad_logistic(np.zeros(2), np.array([4.0, 4.0]), -4.0)
    assert plan["valid"]
    assert plan["terminal"].sum() >= 1.0 - 1e-6


def test_small_experiment_is_deterministic():
    cfg = {
        "dataset": {"name": "synthetic", "synthetic_n": 300},
        "t_values": [0, 2],
        "recourse_t_values": [2],
        "report_t": 2,
        "num_truths": 2,
        "num_subjects": 2,
        "pool_size": 50,
        "graph_nodes": 80,
        "epochs": 30,
        "methods": ["grad", "wachter", "graph", "face"],
        "seed": 4,
    }
    first = reap_py.run_experiment(cfg)
    second = reap_py.run_experiment(cfg)
    assert first["raw_csv"] == second["raw_csv"]
    assert first["raw_csv"].startswith("dataset,method")
