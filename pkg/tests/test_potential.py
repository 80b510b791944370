"""Band construction and gridded potential estimates."""

import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from umtslab.algorithms import odd_exponent, trivial_algorithm, two_stable
from umtslab.core import Umts, moving_cost
from umtslab.metricspace import make_uniform
from umtslab.potential import BandPotential, TwoPointRule, estimate_potential


def ts_rule(d, s, r1, r2, ratio):
    z = (r1 - r2) / s

    def p1(y):
        xi = 0.5 + y / (2 * d)
        if z == 0.0:
            return 1.0 - xi
        return 1.0 - math.expm1(z * xi) / math.expm1(z)

    def dp1(y):
        if z == 0.0:
            return -1.0 / (2 * d)
        return -(z / (2 * d)) * math.exp(z * (0.5 + y / (2 * d))) / math.expm1(z)

    def P1(y):
        return quad(p1, 0.0, y)[0]

    return TwoPointRule(d=d, s=s, r1=r1, r2=r2, ratio=ratio, alpha1=0.5, alpha2=0.5, p1=p1, dp1=dp1, P1=P1)


def integral_step_slack(alg, u, w, v, delta):
    """r * alpha_v * delta minus (moving + integral local + potential change)."""
    w = np.asarray(w, dtype=float)
    w2 = w.copy()
    w2[v] += delta
    cost = moving_cost(u, alg.probabilities(w), alg.probabilities(w2))
    cost += alg.local_cost_integral(w, v, delta)
    dphi = alg.phi(w2) - alg.phi(w)
    return alg.declared_ratio * alg.alpha[v] * delta - cost - dphi


def test_band_equal_rate_two_stable_matches_quadratic():
    rule = ts_rule(1.0, 1.0, 3.0, 3.0, 4.0)
    band = BandPotential(rule)
    assert band.feasible
    for y in np.linspace(-1, 1, 41):
        assert abs(band.phi(y) - 3.0 * y * y / 4.0) < 1e-7


def test_band_detects_underdeclared_ratio():
    true_r = 10.0 + 6.0 * math.log(2)
    rule = ts_rule(1.0, 1.0, 10.0, 10.0, true_r)
    assert BandPotential(rule).feasible
    halved = ts_rule(1.0, 1.0, 10.0, 10.0, true_r / 2)
    band = BandPotential(halved)
    assert not band.feasible
    assert band.min_gap < -1e-6


def test_band_odd_exponent_two_points_feasible_and_bounded():
    u = Umts(make_uniform(2, 1.0), np.array([1.0, 1.0]), 1.0)
    a = odd_exponent(u)
    assert a.phi(np.array([0.0, 0.0])) >= 0.0
    assert a.phi_sup <= a.potential_bound + 1e-9
    ys = np.linspace(-1, 1, 101)
    vals = [a.phi(np.array([y, 0.0])) for y in ys]
    assert min(vals) >= 0.0


def test_two_stable_potential_is_tight_interior():
    rng = np.random.default_rng(7)
    for _ in range(40):
        r1, r2 = rng.uniform(0.0, 8.0, 2)
        s = rng.uniform(0.2, 4.0)
        d = rng.uniform(0.5, 3.0)
        u = Umts(make_uniform(2, d), np.array([r1, r2]), s)
        a = two_stable(u)
        y = rng.uniform(-0.9 * d, 0.6 * d)
        delta = rng.uniform(0.0, 0.3 * d)
        w = np.array([y, 0.0])
        for v in (0, 1):
            w2 = w.copy()
            w2[v] += delta
            if abs(w2[0] - w2[1]) >= d:
                continue
            slack = integral_step_slack(a, u, w, v, delta)
            assert abs(slack) < 1e-7, (r1, r2, s, d, y, v, slack)


def test_two_stable_potential_norm_bound():
    # Slopes at the domain ends are -r1/2 and r2/2 with convexity between,
    # so the sup is at most max(r1, r2) * d, and the ratio dominates both
    # rates; the declared eta = 4 is a legal upgrade of that.
    rng = np.random.default_rng(11)
    for _ in range(60):
        r1, r2 = rng.uniform(0.0, 10.0, 2)
        s = rng.uniform(0.1, 5.0)
        d = rng.uniform(0.2, 4.0)
        u = Umts(make_uniform(2, d), np.array([r1, r2]), s)
        a = two_stable(u)
        assert a.declared_ratio >= max(r1, r2) - 1e-9
        assert a.phi_sup <= max(r1, r2) * d + 1e-8
        assert a.phi_sup <= a.declared_ratio * d + 1e-8


def test_two_stable_local_integral_matches_quadrature():
    for r1, r2, s in [(2.0, 0.0, 1.0), (1.0, 1.0, 1.0), (3.0, 2.999999999, 2.0), (0.5, 4.0, 0.7)]:
        d = 1.3
        u = Umts(make_uniform(2, d), np.array([r1, r2]), s)
        a = two_stable(u)
        for y, delta in [(-0.4, 0.9), (0.0, 0.5), (0.7, 0.3)]:
            w = np.array([y, 0.0])
            for v in (0, 1):
                got = a.local_cost_integral(w, v, delta)
                sign = 1.0 if v == 0 else -1.0
                rate = r1 if v == 0 else r2

                def integrand(tau):
                    p = a.probabilities(np.array([y + sign * tau, 0.0]))
                    return rate * p[v]

                want = quad(integrand, 0.0, delta)[0]
                assert abs(got - want) < 1e-8


def test_odd_exponent_local_integral_matches_quadrature():
    u = Umts(make_uniform(4, 2.0), np.array([1.0, 1.0, 1.0, 1.0]), 1.0)
    a = odd_exponent(u)
    w = np.array([0.3, 0.0, 1.1, 0.6])
    for v in range(4):
        got = a.local_cost_integral(w, v, 0.2)

        def integrand(tau):
            w2 = w.copy()
            w2[v] += tau
            diffs = (w2 - w2[v]) / 2.0
            return (1.0 + (diffs**3).sum()) / 4.0

        want = quad(integrand, 0.0, 0.2)[0]
        assert abs(got - want) < 1e-9


def test_estimate_matches_band_on_two_points():
    # At the tight ratio r1 + s the linear rule needs the quadratic
    # potential r1 y^2 / 4d; the grid estimate must stay below it and
    # land close at this resolution.
    u = Umts(make_uniform(2, 1.0), np.array([1.0, 1.0]), 1.0)
    a = dataclasses.replace(odd_exponent(u), declared_ratio=2.0)
    band = BandPotential(ts_rule(1.0, 1.0, 1.0, 1.0, 2.0))
    assert band.feasible
    est = estimate_potential(a, u, grid_step=1.0 / 16)
    assert est.converged and not est.diverged
    for j in range(17):
        y = j / 16.0
        w = np.array([y, 0.0])
        assert est.phi(w) <= band.phi(y) + 1e-6
    assert est.sup > 0.5 * band.sup()
    assert est.sup <= band.sup() + 1e-6


def test_estimate_converges_on_larger_uniform():
    u = Umts(make_uniform(4, 1.0), np.full(4, 1.0), 1.0)
    a = odd_exponent(u)
    assert a.descriptor["potential_converged"]
    assert 0.0 <= a.phi_sup <= a.potential_bound + a.phi_slack + 1e-6
    w = np.array([0.2, 0.0, 0.4, 0.1])
    assert a.phi(w) >= 0.0


def test_estimate_diverges_when_ratio_underdeclared():
    u = Umts(make_uniform(3, 1.0), np.full(3, 1.0), 1.0)
    a = odd_exponent(u)
    bad = dataclasses.replace(a, declared_ratio=float(u.rates.max()))
    est = estimate_potential(bad, u, grid_step=0.25)
    assert not est.converged


def test_estimate_box_grid_unequal_rates():
    u = Umts(make_uniform(3, 1.0), np.array([2.0, 1.0, 0.5]), 1.0)
    a = odd_exponent(u)
    assert a.descriptor["potential_converged"]
    est = estimate_potential(a, u, grid_step=0.125)
    assert not est.symmetric
    assert est.converged
    assert abs(est.phi(np.zeros(3)) - est.table[est.index[np.zeros(3, dtype=np.int64).tobytes()]]) < 1e-12


def test_trivial_and_single_point_potentials_vanish():
    u = Umts(make_uniform(3, 1.0), np.array([1.0, 2.0, 3.0]), 1.0)
    a = trivial_algorithm(u)
    assert a.phi(np.array([5.0, 0.0, 1.0])) == 0.0
    assert a.phi_sup == 0.0
    one = Umts(make_uniform(1), np.array([2.0]), 1.0)
    est = estimate_potential(trivial_algorithm(one), one)
    assert est.converged and est.sup == 0.0


def test_estimate_rejects_incompatible_grid():
    from umtslab.metricspace import FiniteMetric

    dist = np.array([[0.0, 1.0, 1.7], [1.0, 0.0, 1.3], [1.7, 1.3, 0.0]])
    m = FiniteMetric(("a", "b", "c"), dist)
    u = Umts(m, np.full(3, 1.0), 1.0)
    a = trivial_algorithm(u)
    with pytest.raises(ValueError):
        estimate_potential(a, u, grid_step=1.7 / 4)
