"""Adversary generators, offline optimum, and run audits."""

import math

import numpy as np
import pytest

from umtslab.algorithms import odd_exponent, trivial_algorithm, two_stable
from umtslab.core import ElementaryTask, Umts, apply_elementary, flat_work_function, support_headroom
from umtslab.harness import (
    AdversaryConfig,
    audit_run,
    elementarize,
    empirical_ratio,
    generate_sequence,
    offline_opt,
    run_cost,
)
from umtslab.metricspace import make_uniform
from umtslab.portfolio import combined_algorithm, w_combined_algorithm


def uniform_umts(rates, s=1.0, d=1.0):
    rates = np.asarray(rates, dtype=float)
    return Umts(make_uniform(len(rates), d=d), rates, s)


def test_adversary_config_validation():
    with pytest.raises(ValueError, match="kind"):
        AdversaryConfig(kind="chaotic")
    with pytest.raises(ValueError, match="fraction"):
        AdversaryConfig(max_fraction=1.0)
    with pytest.raises(ValueError, match="steps"):
        AdversaryConfig(steps=-1)


def test_generate_sequence_deterministic():
    alg = two_stable(uniform_umts([3.0, 1.0]))
    cfg = AdversaryConfig(kind="uniform-random", steps=50, seed=11)
    first = [(t.state, t.delta) for t in generate_sequence(alg, cfg)]
    second = [(t.state, t.delta) for t in generate_sequence(alg, cfg)]
    assert first == second
    assert len(first) == 50
    other = AdversaryConfig(kind="uniform-random", steps=50, seed=12)
    assert first != [(t.state, t.delta) for t in generate_sequence(alg, other)]


def test_generated_charges_stay_admissible():
    alg = odd_exponent(uniform_umts([1.0, 1.0, 1.0, 1.0]))
    u = alg.umts
    for kind in ("uniform-random", "greedy-pressure", "support-raiser"):
        tasks = generate_sequence(alg, AdversaryConfig(kind=kind, steps=40, seed=3))
        assert tasks
        w = flat_work_function(u)
        for t in tasks:
            v = u.metric.index(t.state)
            assert alg.probabilities(w)[v] > 1e-9
            assert t.delta < alg.zero_crossing(w, v)
            assert t.delta < support_headroom(u, w, v)
            w = apply_elementary(u, w, v, t.delta)


def test_greedy_pressure_spreads_charges():
    alg = two_stable(uniform_umts([1.0, 1.0]))
    tasks = generate_sequence(alg, AdversaryConfig(kind="greedy-pressure", steps=30, seed=0))
    states = {t.state for t in tasks}
    assert states == {"v1", "v2"}


def test_offline_opt_two_point():
    u = uniform_umts([2.0, 1.0])
    assert offline_opt(u, []) == 0.0
    assert offline_opt(u, [ElementaryTask("v1", 10.0)]) == pytest.approx(1.0, abs=1e-12)
    both = [ElementaryTask("v1", 10.0), ElementaryTask("v2", 10.0)]
    assert offline_opt(u, both) == pytest.approx(2.0, abs=1e-12)


def test_elementarize_slices_round_robin():
    u = uniform_umts([1.0, 1.0])
    tasks = elementarize(u, [1.5, 0.5], 0.5)
    assert [t.state for t in tasks] == ["v1", "v2", "v1", "v1"]
    assert all(t.delta == 0.5 for t in tasks)
    remainder = elementarize(u, [0.74, 0.0], 0.25)
    assert [t.state for t in remainder] == ["v1", "v1"]
    with pytest.raises(ValueError, match="positive"):
        elementarize(u, [1.0, 1.0], 0.0)
    with pytest.raises(ValueError, match="per state"):
        elementarize(u, [1.0], 0.5)


def test_audit_passes_two_stable_all_adversaries():
    alg = two_stable(uniform_umts([3.0, 1.0]))
    for kind in ("uniform-random", "greedy-pressure", "support-raiser"):
        tasks = generate_sequence(alg, AdversaryConfig(kind=kind, steps=60, seed=7))
        report = audit_run(alg, tasks)
        assert report["kind"] == "atomic"
        assert report["passed"], report["worst"]
        assert report["cost"] > 0.0


def test_audit_passes_odd_exponent():
    alg = odd_exponent(uniform_umts([1.0, 1.0, 1.0, 1.0]))
    tasks = generate_sequence(alg, AdversaryConfig(kind="support-raiser", steps=80, seed=5))
    report = audit_run(alg, tasks)
    assert report["passed"], report["worst"]
    out = empirical_ratio(alg, tasks)
    assert out["opt"] > 0.0
    assert out["passed"] is True


def test_run_cost_matches_audit_cost():
    alg = two_stable(uniform_umts([3.0, 1.0]))
    tasks = generate_sequence(alg, AdversaryConfig(steps=60, seed=9))
    report = audit_run(alg, tasks)
    assert math.isclose(run_cost(alg, tasks), report["cost"], rel_tol=1e-12)


def test_audit_combined_structural():
    alg = combined_algorithm(uniform_umts([2.0, 1.0, 0.5]))
    tasks = generate_sequence(alg, AdversaryConfig(kind="uniform-random", steps=40, seed=21))
    report = audit_run(alg, tasks)
    assert report["kind"] == "combined"
    assert report["passed"], report["worst"]
    assert report["opt_hat"] <= report["opt"] + report["resadv_allow"]
    tasks = generate_sequence(alg, AdversaryConfig(kind="support-raiser", steps=40, seed=22))
    assert audit_run(alg, tasks)["passed"]


def test_audit_anchored_merge():
    alg = w_combined_algorithm(uniform_umts([3.0, 1.0, 1.0, 1.0], s=2.0))
    tasks = generate_sequence(alg, AdversaryConfig(kind="greedy-pressure", steps=40, seed=2))
    report = audit_run(alg, tasks)
    assert report["kind"] == "combined"
    assert report["passed"], report["worst"]


def test_under_declared_ratio_is_flagged():
    alg = trivial_algorithm(uniform_umts([5.0, 1.0]))
    alg.declared_ratio = 5.0 / 3.0
    tasks = generate_sequence(alg, AdversaryConfig(kind="uniform-random", steps=60, seed=4))
    report = audit_run(alg, tasks)
    assert not report["passed"]
    assert "sensibility" in report["worst"]
    out = empirical_ratio(alg, tasks)
    assert out["passed"] is False
    assert out["ratio"] > out["declared"] + 1.0


def test_honest_trivial_ratio_passes():
    alg = trivial_algorithm(uniform_umts([5.0, 1.0]))
    tasks = generate_sequence(alg, AdversaryConfig(kind="uniform-random", steps=60, seed=4))
    report = audit_run(alg, tasks)
    assert report["passed"], report["worst"]
    out = empirical_ratio(alg, tasks)
    assert out["passed"] is True


def test_empirical_ratio_skips_tiny_optimum():
    alg = two_stable(uniform_umts([3.0, 1.0]))
    out = empirical_ratio(alg, [])
    assert out["passed"] is None
    assert math.isnan(out["ratio"])
