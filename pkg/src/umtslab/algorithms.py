"""Stable online algorithm families on unfair metrical task systems.

Every constructor returns an :class:`OnlineAlgorithm` bundling the
probability rule, a valid potential (analytic where available, gridded
otherwise), the declared competitive ratio, and the constraint constants
(beta, eta) used by the combining machinery. Rules are pure functions of
the work function; all randomness lives in the probability vector itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from umtslab.core import Umts, support_headroom
from umtslab.metricspace import scale_metric
from umtslab.potential import BandPotential, TwoPointRule, estimate_potential

EPS_EQ = 1e-9


@dataclass
class OnlineAlgorithm:
    """A stable rule with its potential, ratio, and constraint constants.

    ``probabilities(w)`` maps a work function to a distribution over states.
    ``phi(w)`` is a potential certifying the declared ratio;
    ``zero_crossing(w, v)`` is the largest charge at state ``v`` that keeps
    the run reasonable (probability positive throughout). ``rebuild`` makes
    the same family on another system, which is how distance-ratio variants
    are produced.
    """

    name: str
    umts: Umts
    alpha: np.ndarray
    declared_ratio: float
    beta: float
    eta: float
    probabilities: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], float]
    phi_sup: float
    zero_crossing: Callable[[np.ndarray, int], float]
    rebuild: Callable[[Umts], "OnlineAlgorithm"]
    descriptor: dict
    eta_variant_basis: float | None = None
    local_cost_integral: Callable[[np.ndarray, int, float], float] | None = None
    probabilities_batch: Callable[[np.ndarray], np.ndarray] | None = None
    phi_slack: float = 0.0
    symmetric_rule: bool = False
    parts: object | None = None

    def g_value(self, w) -> float:
        """<alpha, w> - phi(w) / r, the quotient charge bookkeeping value."""
        base = float(np.asarray(self.alpha) @ np.asarray(w))
        pot = self.phi(w)
        if pot == 0.0:
            return base
        return base - pot / self.declared_ratio

    @property
    def potential_bound(self) -> float:
        """eta * r * diam, the declared ceiling on the potential."""
        return self.eta * self.declared_ratio * self.umts.diameter()


def probabilities(a: OnlineAlgorithm, w) -> np.ndarray:
    """Distribution the algorithm holds at work function ``w``."""
    return a.probabilities(np.asarray(w, dtype=float))


def trivial_algorithm(u: Umts, state: str | None = None) -> OnlineAlgorithm:
    """Sit on one state forever; ratio equals that state's cost ratio.

    The default state is the lexicographically first label. The potential
    is identically zero and both constraint constants vanish, which is what
    makes these the cheap leaves of combined constructions.
    """
    label = min(u.labels) if state is None else state
    v = u.metric.index(label)
    n = u.n
    point = np.zeros(n)
    point[v] = 1.0
    alpha = point.copy()
    rate = float(u.rates[v])

    def probs(w):
        return point.copy()

    def probs_batch(W):
        return np.tile(point, (W.shape[0], 1))

    def phi(w):
        return 0.0

    def crossing(w, j):
        return math.inf if j == v else 0.0

    def local_integral(w, j, delta):
        return rate * delta if j == v else 0.0

    return OnlineAlgorithm(
        name=f"trivial({label})",
        umts=u,
        alpha=alpha,
        declared_ratio=rate,
        beta=0.0,
        eta=0.0,
        probabilities=probs,
        phi=phi,
        phi_sup=0.0,
        zero_crossing=crossing,
        rebuild=lambda u2: trivial_algorithm(u2, state=label),
        descriptor={"family": "trivial", "state": label, "ratio": rate},
        eta_variant_basis=0.0,
        local_cost_integral=local_integral,
        probabilities_batch=probs_batch,
    )


def require_uniform(u: Umts) -> float:
    d = u.diameter()
    off = u.metric.dist[~np.eye(u.n, dtype=bool)]
    if np.abs(off - d).max() > EPS_EQ * max(1.0, d):
        raise ValueError("rule requires a uniform metric")
    return d


def odd_exponent(u: Umts, grid_step: float | None = None) -> OnlineAlgorithm:
    """Polynomial rule on a uniform space, ratio max(r) + 6 s ln b.

    The exponent is the smallest odd integer at least ln b, so the rule
    stays monotone while the potential stays within a (1, 1)-constraint.
    The b = 2 potential comes from the exact band construction; larger b
    use the gridded least potential.
    """
    n = u.n
    if n < 2:
        raise ValueError("need at least two states")
    d = require_uniform(u)
    b = n
    t = max(1, math.ceil(math.log(b)))
    if t % 2 == 0:
        t += 1
    r = float(u.rates.max()) + 6.0 * u.s * math.log(b)
    alpha = np.full(n, 1.0 / b)
    rates = np.asarray(u.rates, dtype=float)

    def raw(w):
        diffs = (w[None, :] - w[:, None]) / d
        return (1.0 + (diffs**t).sum(axis=1)) / b

    def probs(w):
        p = np.maximum(raw(np.asarray(w, dtype=float)), 0.0)
        return p / p.sum()

    def probs_batch(W):
        diffs = (W[:, None, :] - W[:, :, None]) / d
        p = np.maximum((1.0 + (diffs**t).sum(axis=2)) / b, 0.0)
        return p / p.sum(axis=1, keepdims=True)

    def crossing(w, v):
        w = np.asarray(w, dtype=float)
        if raw(w)[v] <= 1e-12:
            return 0.0
        head = support_headroom(u, w, v)
        others = np.delete(w, v) - w[v]

        def q(x):
            return 1.0 + (((others - x) / d) ** t).sum()

        if q(head) > 0.0:
            return head
        return float(brentq(q, 0.0, head, xtol=1e-12))

    def local_integral(w, v, delta):
        w = np.asarray(w, dtype=float)
        a = (np.delete(w, v) - w[v]) / d
        poly = (d / (t + 1)) * (a ** (t + 1) - (a - delta / d) ** (t + 1)).sum()
        return rates[v] * (delta + poly) / b

    alg = OnlineAlgorithm(
        name=f"odd-exponent(b={b})",
        umts=u,
        alpha=alpha,
        declared_ratio=r,
        beta=1.0,
        eta=1.0,
        probabilities=probs,
        phi=lambda w: 0.0,
        phi_sup=0.0,
        zero_crossing=crossing,
        rebuild=lambda u2: odd_exponent(u2, grid_step=grid_step),
        descriptor={
            "family": "odd-exponent",
            "b": b,
            "t": t,
            "ratio": r,
            "eta_sharp": 1.0 / max(1, math.ceil(math.log(b))),
        },
        eta_variant_basis=1.0,
        local_cost_integral=local_integral,
        probabilities_batch=probs_batch,
        symmetric_rule=True,
    )
    if b == 2:
        band = _odd_exponent_band(u, d, t, r)
        alg.phi = lambda w: band.phi(float(w[0] - w[1]))
        alg.phi_sup = band.sup()
    else:
        levels = max(2, int(round(d / grid_step))) if grid_step else (16 if n <= 4 else 10 if n <= 6 else 8)
        sym = bool(np.abs(rates - rates[0]).max() < EPS_EQ)
        from umtslab.potential import vi_state_count

        if vi_state_count(n, levels, sym) > 400_000:
            alg.phi_slack = math.inf
            alg.descriptor["potential"] = "omitted (state grid too large)"
        else:
            est = estimate_potential(alg, u, grid_step=grid_step)
            alg.phi = est.phi
            alg.phi_sup = est.sup
            alg.phi_slack = est.slack
            alg.descriptor["potential_converged"] = est.converged
    return alg


def _odd_exponent_band(u: Umts, d: float, t: int, r: float) -> BandPotential:
    r1, r2 = float(u.rates[0]), float(u.rates[1])
    rule = TwoPointRule(
        d=d,
        s=u.s,
        r1=r1,
        r2=r2,
        ratio=r,
        alpha1=0.5,
        alpha2=0.5,
        p1=lambda y: 0.5 - 0.5 * (y / d) ** t,
        dp1=lambda y: -0.5 * t * (y / d) ** (t - 1) / d,
        P1=lambda y: 0.5 * y - (d / (2 * (t + 1))) * (y / d) ** (t + 1),
    )
    return BandPotential(rule)


# ---------------------------------------------------------------------------
# exponential rule on two points


def _phim1(q: float) -> float:
    """expm1(q) / q, stable through q = 0 and saturating above the
    float64 exponent range (the reciprocal then contributes nothing)."""
    if q == 0.0:
        return 1.0
    if q > 709.0:
        return math.inf
    return math.expm1(q) / q


def two_stable_ratio(s: float, r1: float, r2: float) -> float:
    """r1 + (r1 - r2) / (e^((r1 - r2)/s) - 1), continuously extended."""
    z = (r1 - r2) / s
    return r1 + s / _phim1(z)


_TS_SERIES_Z = 1e-6


def _ts_p1(y: float, d: float, z: float) -> float:
    xi = 0.5 + y / (2.0 * d)
    if z == 0.0:
        p = 1.0 - xi
    else:
        p = 1.0 - math.expm1(z * xi) / math.expm1(z)
    return min(1.0, max(0.0, p))


def _ts_big_p1(y: float, d: float, z: float) -> float:
    """Antiderivative of the p1 curve with value 0 at y = 0."""
    if abs(z) < _TS_SERIES_Z:
        base = 0.5 * y - y * y / (4.0 * d)
        return base - z * y * (y * y / (24.0 * d * d) - 0.125)
    inner = y * math.exp(z / 2.0) * _phim1(z * y / (2.0 * d)) - y
    return y - inner / math.expm1(z)


def _ts_phi_raw(y: float, d: float, z: float, r1: float, r2: float) -> float:
    """Unnormalized convex potential; exact for large z, z-series near 0."""
    if abs(z) >= _TS_SERIES_Z:
        a = (r1 + r2) * math.exp(z / 2.0) * y * _phim1(z * y / (2.0 * d))
        a -= y * (r1 * math.exp(z) + r2)
        return a / (2.0 * math.expm1(z))
    c1 = y * ((r2 - r1) / 2.0 + (r1 + r2) * y / (4.0 * d))
    c2 = y * ((r1 + r2) * (0.125 + y / (8.0 * d) + y * y / (24.0 * d * d)) - r1 / 2.0)
    return c1 / 2.0 + (z / 2.0) * (c2 - c1 / 2.0)


def _ts_minimizer(d: float, z: float, r1: float, r2: float) -> float:
    if r1 + r2 == 0.0:
        return 0.0
    if abs(z) < _TS_SERIES_Z:
        return d * (r1 - r2) / (r1 + r2)
    xi = math.log1p(r1 * math.expm1(z) / (r1 + r2)) / z
    return d * (2.0 * xi - 1.0)


def two_stable(u: Umts) -> OnlineAlgorithm:
    """Exponential-balance rule on two points with its exact potential.

    Ratio r1 + (r1 - r2)/(e^((r1-r2)/s) - 1), symmetric in the two states.
    The potential is the convex closed form pinned to zero at its interior
    minimum; it satisfies the sensibility inequality with equality in both
    charge directions, so the declared ratio is tight.
    """
    if u.n != 2:
        raise ValueError("rule is defined on two states")
    d = u.diameter()
    r1, r2 = float(u.rates[0]), float(u.rates[1])
    z = (r1 - r2) / u.s
    if abs(z) > 500.0:
        raise ValueError(
            "cost ratio gap exceeds the stable range of the two-state "
            f"closed forms (|r1 - r2|/s = {abs(z):.3g} > 500)"
        )
    r = two_stable_ratio(u.s, r1, r2)
    alpha = np.array([0.5, 0.5])
    y_star = _ts_minimizer(d, z, r1, r2)
    phi_floor = _ts_phi_raw(y_star, d, z, r1, r2)

    def p1(y):
        return _ts_p1(y, d, z)

    def probs(w):
        p = p1(float(w[0] - w[1]))
        return np.array([p, 1.0 - p])

    def probs_batch(W):
        return np.array([probs(w) for w in W])

    def phi(w):
        y = float(np.clip(w[0] - w[1], -d, d))
        return max(0.0, _ts_phi_raw(y, d, z, r1, r2) - phi_floor)

    def crossing(w, v):
        y = float(w[0] - w[1])
        return max(0.0, d - y) if v == 0 else max(0.0, d + y)

    def local_integral(w, v, delta):
        y = float(w[0] - w[1])
        if v == 0:
            return r1 * (_ts_big_p1(y + delta, d, z) - _ts_big_p1(y, d, z))
        return r2 * (delta - (_ts_big_p1(y, d, z) - _ts_big_p1(y - delta, d, z)))

    phi_sup = max(
        _ts_phi_raw(-d, d, z, r1, r2) - phi_floor,
        _ts_phi_raw(d, d, z, r1, r2) - phi_floor,
    )
    return OnlineAlgorithm(
        name="two-stable",
        umts=u,
        alpha=alpha,
        declared_ratio=r,
        beta=1.0,
        eta=4.0,
        probabilities=probs,
        phi=phi,
        phi_sup=float(phi_sup),
        zero_crossing=crossing,
        rebuild=two_stable,
        descriptor={"family": "two-stable", "r1": r1, "r2": r2, "s": u.s, "ratio": r},
        eta_variant_basis=2.0,
        local_cost_integral=local_integral,
        probabilities_batch=probs_batch,
        symmetric_rule=abs(r1 - r2) < EPS_EQ,
    )


def rho_variant(a: OnlineAlgorithm, rho: float) -> OnlineAlgorithm:
    """Rebuild the family at distance ratio s / rho on the rho-scaled metric.

    The returned algorithm runs on the original system and evaluates the
    inner rule and potential on the same work functions, which on
    reasonable runs never leave the inner rule's admissible region. The
    constraint pair tightens to (rho * beta, rho * eta_basis); rho * beta
    must stay at most 1 for the result to remain usable in combinations.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if a.beta * rho > 1.0 + EPS_EQ:
        raise ValueError("scaled beta exceeds 1")
    if rho == 1.0:
        return a
    u = a.umts
    inner_u = Umts(scale_metric(u.metric, rho), u.rates, u.s / rho, u.initial_state)
    inner = a.rebuild(inner_u)
    basis = a.eta_variant_basis if a.eta_variant_basis is not None else a.eta

    def rebuild(u2: Umts) -> OnlineAlgorithm:
        return rho_variant(a.rebuild(u2), rho)

    return OnlineAlgorithm(
        name=f"{rho:g}-variant {a.name}",
        umts=u,
        alpha=inner.alpha,
        declared_ratio=inner.declared_ratio,
        beta=a.beta * rho,
        eta=basis * rho,
        probabilities=inner.probabilities,
        phi=inner.phi,
        phi_sup=inner.phi_sup,
        zero_crossing=inner.zero_crossing,
        rebuild=rebuild,
        descriptor={"family": "rho-variant", "rho": rho, "base": a.descriptor},
        eta_variant_basis=basis * rho,
        local_cost_integral=inner.local_cost_integral,
        probabilities_batch=inner.probabilities_batch,
        phi_slack=inner.phi_slack,
        symmetric_rule=inner.symmetric_rule,
    )
