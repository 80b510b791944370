import numpy as np
import pytest

from oracles import offline_exhaustive, random_metric
from umtslab.core import (
    CostLedger,
    ElementaryTask,
    GeneralTask,
    Umts,
    alpha_opt_cost,
    apply_task,
    flat_work_function,
    initial_work_function,
    is_supported,
    moving_cost,
    online_step_cost,
    opt_cost,
    support_headroom,
    task_charges,
)
from umtslab.metricspace import FiniteMetric, make_line, make_star, make_uniform


def u2(d=1.0, r=(1.0, 1.0), s=1.0):
    return Umts(make_uniform(2, d), np.array(r), s)


def test_umts_validation():
    with pytest.raises(ValueError):
        Umts(make_uniform(2, 1.0), np.array([1.0]), 1.0)
    with pytest.raises(ValueError):
        Umts(make_uniform(2, 1.0), np.array([1.0, 1.0]), 0.0)
    with pytest.raises(ValueError):
        Umts(make_uniform(2, 1.0), np.array([1.0, 1.0]), 1.0, initial_state="nope")
    u = u2()
    assert u.initial_state == "v1"


def test_initial_work_function_examples():
    assert initial_work_function(u2()).tolist() == [0.0, 1.0]

    mid = Umts(make_line(3, 1.0), np.ones(3), 1.0, initial_state="v2")
    assert initial_work_function(mid).tolist() == [1.0, 0.0, 1.0]

    star = Umts(make_star([2, 4]), np.ones(2), 1.0)
    assert initial_work_function(star).tolist() == [0.0, 3.0]

    assert flat_work_function(star).tolist() == [0.0, 0.0]


def test_apply_task_examples():
    u = u2()
    w = np.array([0.0, 1.0])
    # v2 is already supported by v1, so further charges there are absorbed
    w2 = apply_task(u, w, ElementaryTask("v2", 0.7))
    assert w2.tolist() == [0.0, 1.0]

    w3 = apply_task(u, w, GeneralTask(np.zeros(2)))
    assert w3.tolist() == [0.0, 1.0]

    w4 = apply_task(u, np.array([0.0, 0.0]), ElementaryTask("v2", 0.4))
    assert w4.tolist() == [0.0, 0.4]


def test_apply_general_matches_elementary():
    rng = np.random.default_rng(3)
    u = Umts(make_line(4, 1.0), np.ones(4), 1.0)
    w = initial_work_function(u)
    for _ in range(30):
        v = int(rng.integers(0, 4))
        delta = float(rng.random())
        charges = np.zeros(4)
        charges[v] = delta
        a = apply_task(u, w, ElementaryTask(u.labels[v], delta))
        b = apply_task(u, w, GeneralTask(charges))
        assert np.allclose(a, b, atol=1e-12)
        w = a


def test_work_function_stays_lipschitz():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 5))
        d = random_metric(rng, n)
        m = FiniteMetric(tuple(f"x{i}" for i in range(n)), d)
        u = Umts(m, np.ones(n), 1.0)
        w = initial_work_function(u)
        for _ in range(12):
            charges = rng.random(n) * rng.integers(0, 2, size=n)
            w2 = apply_task(u, w, GeneralTask(charges))
            assert (w2 >= w - 1e-12).all()
            gap = w2[:, None] - w2[None, :]
            assert (np.abs(gap) <= d + 1e-9).all()
            w = w2


def test_supported_states():
    u = u2()
    assert is_supported(u, np.array([0.0, 1.0]), "v2")
    assert not is_supported(u, np.array([0.0, 1.0]), "v1")
    assert not is_supported(u, np.array([0.0, 0.5]), "v1")
    assert not is_supported(u, np.array([0.0, 0.5]), "v2")

    line = Umts(make_line(3, 1.0), np.ones(3), 1.0)
    w = np.array([0.0, 1.0, 2.0])
    assert not is_supported(line, w, "v1")
    assert is_supported(line, w, "v2")
    assert is_supported(line, w, "v3")

    assert support_headroom(u, np.array([0.0, 0.25]), 1) == pytest.approx(0.75)


def test_moving_cost_scales_by_s():
    u = Umts(make_uniform(2, 2.0), np.ones(2), 3.0)
    assert moving_cost(u, [1, 0], [0, 1]) == pytest.approx(6.0)
    assert moving_cost(u, [0.5, 0.5], [0.5, 0.5]) == 0.0


def test_online_step_cost_examples():
    u = Umts(make_uniform(2, 1.0), np.array([3.0, 3.0]), 1.0)
    stay = np.array([0.5, 0.5])
    got = online_step_cost(u, stay, stay, ElementaryTask("v1", 0.2))
    assert got == pytest.approx(0.3)

    u22 = Umts(make_uniform(2, 2.0), np.ones(2), 1.0)
    got = online_step_cost(u22, np.array([1.0, 0.0]), np.array([0.0, 1.0]), GeneralTask(np.zeros(2)))
    assert got == pytest.approx(2.0)


def test_alpha_opt_cost():
    w = np.array([0.0, 1.0])
    assert alpha_opt_cost(np.array([1.0, 0.0]), w) == 0.0
    assert alpha_opt_cost(np.array([0.5, 0.5]), w) == 0.5

    rng = np.random.default_rng(5)
    u = Umts(make_uniform(3, 1.0), np.ones(3), 1.0)
    w = initial_work_function(u)
    for _ in range(20):
        v = int(rng.integers(0, 3))
        w = apply_task(u, w, ElementaryTask(u.labels[v], float(rng.random())))
        a = rng.random(3)
        a /= a.sum()
        assert alpha_opt_cost(a, w) <= opt_cost(w) + u.diameter() + 1e-9


def test_dp_matches_exhaustive_offline():
    rng = np.random.default_rng(6)
    for _ in range(40):
        n = int(rng.integers(2, 6))
        d = random_metric(rng, n)
        m = FiniteMetric(tuple(f"x{i}" for i in range(n)), d)
        u = Umts(m, np.ones(n), 1.0)
        horizon = int(rng.integers(1, 7))
        rows = [rng.random(n) * (rng.random(n) < 0.6) for _ in range(horizon)]
        w = initial_work_function(u)
        for row in rows:
            w = apply_task(u, w, GeneralTask(row))
        assert opt_cost(w) == pytest.approx(
            offline_exhaustive(d, 0, rows), abs=1e-9
        )


def test_task_charges_and_ledger():
    u = u2()
    c = task_charges(u, ElementaryTask("v2", 0.3))
    assert c.tolist() == [0.0, 0.3]

    ledger = CostLedger()
    ledger.record("v1", 0.5, moving=0.2, local=0.1)
    ledger.record("v2", 0.1, moving=0.0, local=0.05, dhat=0.08)
    assert ledger.total == pytest.approx(0.35)
    assert ledger.steps[1].dhat == 0.08

    with pytest.raises(ValueError):
        ElementaryTask("v1", -0.1)
    with pytest.raises(ValueError):
        GeneralTask(np.array([-0.2, 0.0]))
