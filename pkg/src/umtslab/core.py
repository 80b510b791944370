"""The task-system cost model: tasks, work functions, moving and step costs.

A system is a metric space with per-state cost ratios ``r_u`` and a distance
ratio ``s``: local costs are scaled by ``r_u`` and moving costs by ``s``.
An online algorithm maintains a probability vector over states; serving a
task costs the optimal-transport move plus the charge weighted by the
post-move probabilities.

Work functions come in two flavors. :func:`initial_work_function` starts at
``dist(initial_state, v)`` and drives offline optima. Stable algorithms are
evaluated on a flat-start channel (:func:`flat_work_function`) where the
work function equals the accumulated charges on reasonable runs; the
difference between the channels is absorbed by the additive constant of the
competitive bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from umtslab.metricspace import FiniteMetric
from umtslab.transport import mcost_metric

EPS_EQ = 1e-9
EPS_AUDIT = 1e-6


@dataclass(frozen=True)
class Umts:
    """Metric space plus cost ratios (r_u) and distance ratio s."""

    metric: FiniteMetric
    rates: np.ndarray
    s: float
    initial_state: str = ""

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "rates", r)
        r.setflags(write=False)
        if r.shape != (self.metric.n,):
            raise ValueError("one cost ratio per state required")
        if (r < 0).any():
            raise ValueError("cost ratios must be non-negative")
        if self.s <= 0:
            raise ValueError("distance ratio must be positive")
        if not self.initial_state:
            object.__setattr__(self, "initial_state", self.metric.labels[0])
        elif self.initial_state not in self.metric.labels:
            raise ValueError(f"unknown initial state {self.initial_state!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.metric.labels

    @property
    def n(self) -> int:
        return self.metric.n

    def diameter(self) -> float:
        return self.metric.diameter()


@dataclass(frozen=True)
class ElementaryTask:
    """A charge of ``delta`` at a single state."""

    state: str
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("charges are non-negative")


@dataclass(frozen=True)
class GeneralTask:
    """Per-state non-negative charge vector."""

    charges: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.charges, dtype=float)
        object.__setattr__(self, "charges", c)
        c.setflags(write=False)
        if (c < 0).any():
            raise ValueError("charges are non-negative")


def task_charges(u: Umts, task) -> np.ndarray:
    """Charge vector of an elementary or general task."""
    if isinstance(task, ElementaryTask):
        c = np.zeros(u.n)
        c[u.metric.index(task.state)] = task.delta
        return c
    return np.asarray(task.charges, dtype=float)


def initial_work_function(u: Umts) -> np.ndarray:
    """w(v) = dist(initial_state, v); the offline-optimum start."""
    return u.metric.dist[u.metric.index(u.initial_state)].copy()


def flat_work_function(u: Umts) -> np.ndarray:
    """All-zero start; the channel stable algorithm rules are evaluated on."""
    return np.zeros(u.n)


def apply_task(u: Umts, w: np.ndarray, task) -> np.ndarray:
    """One work-function step: w'(v) = min_x [w(x) + c_x + dist(x, v)].

    Elementary tasks take the O(n) path: only the charged state can change,
    capped by its support level.
    """
    if isinstance(task, ElementaryTask):
        return apply_elementary(u, w, u.metric.index(task.state), task.delta)
    c = np.asarray(task.charges, dtype=float)
    return np.min((w + c)[:, None] + u.metric.dist, axis=0)


def apply_elementary(u: Umts, w: np.ndarray, v: int, delta: float) -> np.ndarray:
    out = w.copy()
    out[v] = min(w[v] + delta, _support_level(u, w, v))
    return out


def _support_level(u: Umts, w: np.ndarray, v: int) -> float:
    reach = w + u.metric.dist[:, v]
    reach[v] = np.inf
    return float(reach.min()) if u.n > 1 else np.inf


def support_headroom(u: Umts, w: np.ndarray, v: int) -> float:
    """How far w(v) can rise before v becomes supported (inf on one point)."""
    return _support_level(u, w, v) - w[v]


def is_supported(u: Umts, w: np.ndarray, state) -> bool:
    """True iff some other state pins w at this one: w(v) = w(x) + dist(x, v)."""
    v = u.metric.index(state) if isinstance(state, str) else int(state)
    return support_headroom(u, w, v) <= EPS_EQ


def moving_cost(u: Umts, p, q) -> float:
    """s times the optimal-transport cost between the two distributions."""
    return u.s * mcost_metric(u.metric, p, q)


def online_step_cost(u: Umts, p_before, p_after, task) -> float:
    """Transport cost plus charge paid at the post-move probabilities."""
    c = task_charges(u, task)
    local = float(np.asarray(p_after) @ (c * u.rates))
    return moving_cost(u, p_before, p_after) + local


def alpha_opt_cost(alpha, w) -> float:
    """Weighted offline cost <alpha, w>; at most min(w) + diam for weights on
    a 1-Lipschitz work function."""
    return float(np.asarray(alpha) @ np.asarray(w))


def opt_cost(w) -> float:
    return float(np.asarray(w).min())


@dataclass
class StepRecord:
    state: str
    delta: float
    moving: float
    local: float
    dhat: float | None = None
    p_before: np.ndarray | None = None
    p_after: np.ndarray | None = None


@dataclass
class CostLedger:
    """Accumulates online costs over one run."""

    moving_total: float = 0.0
    local_total: float = 0.0
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.moving_total + self.local_total

    def record(self, state, delta, moving, local, dhat=None, p_before=None, p_after=None):
        self.moving_total += moving
        self.local_total += local
        self.steps.append(StepRecord(state, delta, moving, local, dhat, p_before, p_after))
