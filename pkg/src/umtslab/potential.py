"""Minimal potential functions for sensibility audits.

Two constructions. For a stable rule on two points the per-step inequality
pins the potential's derivative between two analytic rate curves; the least
non-negative solution is evaluated exactly from antiderivatives and their
critical points (the band construction). For larger spaces a value
iteration over gridded work-function differences computes the least
potential consistent with all grid-step continuations; divergence of that
iteration is itself a meaningful signal (the declared ratio is too small).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

EPS_EQ = 1e-9
VI_TOL = 1e-7


# ---------------------------------------------------------------------------
# two-point band construction


@dataclass(frozen=True)
class TwoPointRule:
    """Analytic description of a stable rule on a two-point space.

    ``p1`` maps the gap y = w(v1) - w(v2) to the probability at v1,
    ``dp1`` is its derivative and ``P1`` the antiderivative with P1(0) = 0.
    The rule is assumed non-increasing in y.
    """

    d: float
    s: float
    r1: float
    r2: float
    ratio: float
    alpha1: float
    alpha2: float
    p1: Callable[[float], float]
    dp1: Callable[[float], float]
    P1: Callable[[float], float]

    def c_plus(self, y: float) -> float:
        """Cost rate while v1 is charged (y rising)."""
        return self.s * self.d * (-self.dp1(y)) + self.r1 * self.p1(y)

    def c_minus(self, y: float) -> float:
        """Cost rate while v2 is charged (y falling)."""
        return self.s * self.d * (-self.dp1(y)) + self.r2 * (1.0 - self.p1(y))

    def g_plus(self, y: float) -> float:
        return self.ratio * self.alpha1 - self.c_plus(y)

    def g_minus(self, y: float) -> float:
        return self.c_minus(y) - self.ratio * self.alpha2

    def big_g_plus(self, y: float) -> float:
        c = self.s * self.d * (self.p1(0.0) - self.p1(y)) + self.r1 * self.P1(y)
        return self.ratio * self.alpha1 * y - c

    def big_g_minus(self, y: float) -> float:
        c = self.s * self.d * (self.p1(0.0) - self.p1(y)) + self.r2 * (y - self.P1(y))
        return c - self.ratio * self.alpha2 * y


def _sign_change_roots(f, xs) -> list[float]:
    roots = []
    vals = np.array([f(x) for x in xs])
    for i in range(len(xs) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(xs[i]))
        elif a * b < 0:
            roots.append(float(brentq(f, xs[i], xs[i + 1], xtol=1e-13)))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


class BandPotential:
    """Least non-negative potential for a two-point rule, exact pointwise.

    The derivative must lie in [g_minus, g_plus] wherever the respective
    charge direction is reasonable; obligations propagate forward from the
    antiderivative of g_minus and backward from that of g_plus. ``feasible``
    is False when the band is empty (min gap below -1e-9), which happens
    exactly when the declared ratio cannot be met.
    """

    def __init__(self, rule: TwoPointRule, scan: int = 2001):
        self.rule = rule
        d = rule.d
        ys = np.linspace(-d, d, scan)
        tol = 1e-12
        # active-region edges: charging v1 needs p1 > 0, charging v2 needs p1 < 1
        self.y_plus = d if rule.p1(d) > tol else _first_root(rule.p1, ys)
        self.y_minus = -d if rule.p1(-d) < 1.0 - tol else _last_root(
            lambda y: rule.p1(y) - 1.0, ys
        )
        gap = lambda y: rule.g_plus(y) - rule.g_minus(y)
        lo, hi = max(self.y_minus, -d), min(self.y_plus, d)
        if lo < hi:
            zs = np.linspace(lo, hi, scan)
            self.min_gap = float(min(gap(z) for z in zs))
        else:
            self.min_gap = 0.0
        self.feasible = self.min_gap >= -1e-9
        self._roots_minus = sorted(_sign_change_roots(rule.g_minus, ys))
        self._roots_plus = sorted(_sign_change_roots(rule.g_plus, ys))

    def _need_from_below(self, y: float) -> float:
        r = self.rule
        if y < self.y_minus:
            return 0.0
        cands = [self.y_minus, y]
        cands += [z for z in self._roots_minus if self.y_minus <= z <= y]
        floor = min(r.big_g_minus(z) for z in cands)
        return r.big_g_minus(y) - floor

    def _need_from_above(self, y: float) -> float:
        r = self.rule
        if y > self.y_plus:
            return 0.0
        cands = [self.y_plus, y]
        cands += [z for z in self._roots_plus if y <= z <= self.y_plus]
        floor = min(r.big_g_plus(z) for z in cands)
        return r.big_g_plus(y) - floor

    def phi(self, y: float) -> float:
        y = float(np.clip(y, -self.rule.d, self.rule.d))
        return max(0.0, self._need_from_below(y), self._need_from_above(y))

    def sup(self, scan: int = 2001) -> float:
        ys = np.linspace(-self.rule.d, self.rule.d, scan)
        extra = [self.y_minus, self.y_plus] + self._roots_minus + self._roots_plus
        return max(max(self.phi(y) for y in ys), max(self.phi(y) for y in extra))


def _first_root(f, xs) -> float:
    roots = _sign_change_roots(f, xs)
    return roots[0] if roots else float(xs[-1])


def _last_root(f, xs) -> float:
    roots = _sign_change_roots(f, xs)
    return roots[-1] if roots else float(xs[0])


# ---------------------------------------------------------------------------
# value iteration on gridded work-function differences


@dataclass
class PotentialEstimate:
    """Gridded least potential over normalized work-function differences."""

    states: np.ndarray
    table: np.ndarray
    h: float
    levels: int
    symmetric: bool
    converged: bool
    diverged: bool
    sweeps: int
    last_change: float
    slack: float
    index: dict = field(repr=False, default_factory=dict)

    @property
    def sup(self) -> float:
        return float(self.table.max(initial=0.0))

    def phi(self, w) -> float:
        """Multilinear interpolation at a (possibly off-grid) work function."""
        w = np.asarray(w, dtype=float)
        x = (w - w.min()) / self.h
        x = np.clip(x, 0.0, float(self.levels))
        lo = np.floor(x).astype(int)
        frac = x - lo
        total, n = 0.0, len(x)
        for corner in itertools.product((0, 1), repeat=n):
            k = np.minimum(lo + np.array(corner), self.levels)
            weight = np.prod(np.where(np.array(corner) == 1, frac, 1.0 - frac))
            if weight == 0.0:
                continue
            k = k - k.min()
            if self.symmetric:
                k = np.sort(k)
            row = self.index.get(k.astype(np.int64).tobytes())
            if row is not None:
                total += weight * self.table[row]
        return float(total)


def vi_state_count(n: int, levels: int, symmetric: bool) -> int:
    """Number of normalized grid states the value iteration would visit."""
    if symmetric:
        return math.comb(levels + n - 1, n - 1)
    return (levels + 1) ** n - levels**n


def _enumerate_states(n: int, levels: int, symmetric: bool) -> np.ndarray:
    if symmetric:
        rows = [
            k
            for k in itertools.combinations_with_replacement(range(levels + 1), n)
            if k[0] == 0
        ]
    else:
        rows = [
            k
            for k in itertools.product(range(levels + 1), repeat=n)
            if min(k) == 0
        ]
    return np.array(rows, dtype=np.int64)


def estimate_potential(
    alg,
    u=None,
    grid_step: float | None = None,
    max_sweeps: int = 4000,
    tol: float = VI_TOL,
) -> PotentialEstimate:
    """Least valid potential by value iteration over grid-step continuations.

    Works on spaces whose distances are integer multiples of the grid step
    (uniform spaces in particular). Divergence is reported, not raised: it
    signals the declared ratio is below what the rule actually needs.
    """
    u = u if u is not None else alg.umts
    n, D = u.n, u.diameter()
    if n == 1:
        est = PotentialEstimate(
            np.zeros((1, 1), dtype=np.int64), np.zeros(1), 1.0, 0, False, True, False, 0, 0.0, 0.0
        )
        est.index[np.zeros(1, dtype=np.int64).tobytes()] = 0
        return est
    if grid_step is None:
        grid_step = D / (16 if n <= 4 else 10 if n <= 6 else 8)
    levels = max(2, int(round(D / grid_step)))
    h = D / levels
    steps = u.metric.dist / h
    if np.abs(steps - np.round(steps)).max() > 1e-6:
        raise ValueError("grid step must divide every pairwise distance")
    steps = np.round(steps).astype(np.int64)

    rates = np.asarray(u.rates)
    symmetric = (
        getattr(alg, "symmetric_rule", False)
        and np.abs(u.metric.dist[~np.eye(n, dtype=bool)] - D).max() < EPS_EQ
        and np.abs(rates - rates[0]).max() < EPS_EQ
    )
    if vi_state_count(n, levels, symmetric) > 400_000:
        raise ValueError("state grid too large; coarsen grid_step or shrink the space")
    states = _enumerate_states(n, levels, symmetric)
    S = states.shape[0]
    index = {states[i].tobytes(): i for i in range(S)}

    W = states.astype(float) * h
    if hasattr(alg, "probabilities_batch") and alg.probabilities_batch is not None:
        P = alg.probabilities_batch(W)
    else:
        P = np.array([alg.probabilities(w) for w in W])

    r, alpha = alg.declared_ratio, np.asarray(alg.alpha)
    target = np.full((n, S), -1, dtype=np.int64)
    gain = np.zeros((n, S))
    for v in range(n):
        caps = (states + steps[:, v][None, :] + np.where(np.arange(n) == v, 10 * levels, 0)[None, :]).min(axis=1)
        legal = (states[:, v] + 1 <= caps) & (P[:, v] > 1e-12)
        tgt_states = states.copy()
        tgt_states[:, v] += 1
        tgt_states -= tgt_states.min(axis=1)[:, None]
        if symmetric:
            tgt_states = np.sort(tgt_states, axis=1)
        rows = np.array(
            [index[tgt_states[i].tobytes()] if legal[i] else -1 for i in range(S)],
            dtype=np.int64,
        )
        move = u.s * _uniform_or_transport_batch(u, P, P[np.maximum(rows, 0)], D)
        if hasattr(alg, "local_cost_integral") and alg.local_cost_integral is not None:
            local = np.array(
                [alg.local_cost_integral(W[i], v, h) if legal[i] else 0.0 for i in range(S)]
            )
        else:
            local = _simpson_local(alg, W, v, h, rates[v], legal)
        gain[v] = np.where(legal, move + local - r * alpha[v] * h, -np.inf)
        target[v] = rows

    table = np.zeros(S)
    blowup = 50.0 * max(r, 1.0) * D + 10.0
    sweeps, change, diverged = 0, np.inf, False
    while sweeps < max_sweeps:
        best = np.zeros(S)
        for v in range(n):
            cand = gain[v] + np.where(target[v] >= 0, table[np.maximum(target[v], 0)], 0.0)
            best = np.maximum(best, cand)
        new = np.maximum(0.0, best)
        change = float(np.abs(new - table).max())
        table = new
        sweeps += 1
        if change < tol:
            break
        if table.max() > blowup:
            diverged = True
            break
    converged = change < tol and not diverged

    slack = 0.0
    for v in range(n):
        ok = target[v] >= 0
        if ok.any():
            slack = max(slack, float(np.abs(table[target[v][ok]] - table[ok]).max()))
    return PotentialEstimate(
        states, table, h, levels, symmetric, converged, diverged, sweeps, change, slack, index
    )


def _uniform_or_transport_batch(u, P, Q, D) -> np.ndarray:
    off = u.metric.dist[~np.eye(u.n, dtype=bool)]
    if np.abs(off - D).max() < EPS_EQ:
        return D * 0.5 * np.abs(P - Q).sum(axis=1)
    from umtslab.transport import mcost_metric

    return np.array([mcost_metric(u.metric, p, q) for p, q in zip(P, Q)])


def _simpson_local(alg, W, v, h, rate, legal) -> np.ndarray:
    nodes = np.linspace(0.0, h, 9)
    weights = np.array([1, 4, 2, 4, 2, 4, 2, 4, 1], dtype=float)
    weights *= h / weights.sum() / 1.0
    out = np.zeros(W.shape[0])
    for i in range(W.shape[0]):
        if not legal[i]:
            continue
        acc = 0.0
        for t, wt in zip(nodes, weights):
            w = W[i].copy()
            w[v] += t
            acc += wt * alg.probabilities(w)[v]
        out[i] = rate * acc
    return out
