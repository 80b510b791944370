"""Adversaries, offline optimum, and empirical audits for online runs.

Sequences are generated on the algorithm's own channel (the all-zero work
function) and stay reasonable by construction: every charge targets a
state the algorithm currently occupies with positive probability and stays
strictly below both the probability zero crossing and the support
headroom. The offline optimum is the minimum of the work function started
at dist(initial, .), so empirical ratios compare against the fair cost of
the best fixed schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from umtslab.algorithms import OnlineAlgorithm
from umtslab.combiner import CombinedRun
from umtslab.core import (
    ElementaryTask,
    Umts,
    apply_elementary,
    apply_task,
    flat_work_function,
    initial_work_function,
    online_step_cost,
    opt_cost,
    support_headroom,
)

EPS_EQ = 1e-9
EPS_AUDIT = 1e-6

ADVERSARY_KINDS = ("uniform-random", "greedy-pressure", "support-raiser")


@dataclass(frozen=True)
class AdversaryConfig:
    """How to build a charge sequence against an algorithm.

    uniform-random picks a random occupied state and a random fraction of
    the admissible charge; greedy-pressure always charges the occupied
    state with the largest probability-weighted admissible charge;
    support-raiser keeps charging the lowest occupied state, forcing the
    whole work function (and the offline cost) upward.
    """

    kind: str = "uniform-random"
    steps: int = 100
    seed: int = 0
    max_fraction: float = 0.999

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if not 0.0 < self.max_fraction < 1.0:
            raise ValueError("max_fraction must lie strictly between 0 and 1")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")


def generate_sequence(alg: OnlineAlgorithm, config: AdversaryConfig) -> list[ElementaryTask]:
    """Reasonable task sequence for the algorithm under the given adversary."""
    u = alg.umts
    rng = np.random.default_rng(config.seed)
    w = flat_work_function(u)
    tasks: list[ElementaryTask] = []
    for _ in range(config.steps):
        p = alg.probabilities(w)
        cands = [v for v in range(u.n) if p[v] > EPS_EQ]
        caps = {}
        for v in cands:
            caps[v] = min(alg.zero_crossing(w, v), support_headroom(u, w, v))
        open_states = [v for v in cands if caps[v] > 0.0]
        if not open_states:
            break
        if config.kind == "uniform-random":
            v = open_states[rng.integers(len(open_states))]
            fraction = rng.uniform(0.2, config.max_fraction)
        elif config.kind == "greedy-pressure":
            v = max(open_states, key=lambda x: (p[x] * min(caps[x], 1e12), -x))
            fraction = config.max_fraction
        else:  # support-raiser
            v = min(open_states, key=lambda x: (w[x], x))
            fraction = config.max_fraction
        cap = caps[v]
        if not math.isfinite(cap):
            cap = max(1.0, u.diameter())
        delta = fraction * cap * (1.0 - EPS_AUDIT)
        if delta <= 0.0:
            continue
        tasks.append(ElementaryTask(u.labels[v], delta))
        w = apply_elementary(u, w, v, delta)
    return tasks


def offline_opt(u: Umts, tasks) -> float:
    """Fair offline optimum: min of the work function from dist(init, .)."""
    w = initial_work_function(u)
    for t in tasks:
        w = apply_task(u, w, t)
    return opt_cost(w)


def elementarize(u: Umts, charges, eps: float) -> list[ElementaryTask]:
    """Slice a general charge vector into elementary tasks of size eps.

    Slice j charges every state whose remaining charge is at least j * eps,
    so large charges are spread across slices instead of being served in
    one block. Remainders below eps are dropped.
    """
    if eps <= 0:
        raise ValueError("slice size must be positive")
    c = np.asarray(charges, dtype=float)
    if c.shape != (u.n,):
        raise ValueError("one charge per state required")
    out: list[ElementaryTask] = []
    counts = np.floor(c / eps + 1e-12).astype(int)
    for j in range(1, int(counts.max(initial=0)) + 1):
        for v in range(u.n):
            if counts[v] >= j:
                out.append(ElementaryTask(u.labels[v], eps))
    return out


def _simpson_local(alg: OnlineAlgorithm, w, v: int, delta: float) -> float:
    rate = float(alg.umts.rates[v])
    if delta == 0.0 or rate == 0.0:
        return 0.0
    xs = np.linspace(0.0, delta, 9)
    ys = []
    for x in xs:
        w2 = np.asarray(w, dtype=float).copy()
        w2[v] += x
        ys.append(alg.probabilities(w2)[v])
    return rate * float(np.trapezoid(ys, xs))


def _local_integral(alg: OnlineAlgorithm, w, v: int, delta: float) -> float:
    if alg.local_cost_integral is not None:
        return alg.local_cost_integral(w, v, delta)
    return _simpson_local(alg, w, v, delta)


def audit_run(alg: OnlineAlgorithm, tasks, tol: float = EPS_AUDIT) -> dict:
    """Run the sequence and check the declared per-step contracts.

    Combined algorithms get the full structural audit (quotient work
    function, block consistency, cost comparison) plus the check that the
    translated quotient adversary is no harder than the original one, up
    to the static offset of the translation (start gap plus the largest
    block diameter).
    Atomic algorithms are checked directly: charges below the zero
    crossing, valid distributions, no mass on states excluded by the beta
    constraint (skipped when beta is zero, the single-state convention),
    and sensibility of each step against the potential.
    """
    u = alg.umts
    opt = offline_opt(u, tasks)
    if alg.parts is not None:
        run = CombinedRun(alg)
        for t in tasks:
            run.step(t.state, t.delta)
        report = run.report()
        qu = alg.parts.quotient_umts
        qtasks = [
            ElementaryTask(qu.labels[row["block"]], row["delta_hat"])
            for row in run.trace
        ]
        opt_hat = offline_opt(qu, qtasks)
        # The translated adversary can exceed the original optimum only by
        # the static offset of the translation: the gap between the two
        # quotient start vectors plus the largest block diameter (the G
        # values sit at most one block diameter above the block minimum).
        parts = alg.parts
        start_gap = float(np.max(initial_work_function(qu) - parts.initial_hat_work()))
        block_diam = max(
            float(u.metric.dist[np.ix_(idx, idx)].max()) for idx in parts.global_index
        )
        resadv_allow = max(0.0, start_gap) + block_diam + tol + run.steps * run.dhat_tol
        if opt_hat > opt + resadv_allow:
            report["passed"] = False
            report.setdefault("worst", {})["resadv"] = {
                "magnitude": opt_hat - opt - resadv_allow,
                "step": run.steps,
                "detail": "quotient adversary is harder than the original",
            }
        report.update(
            {"kind": "combined", "opt": opt, "opt_hat": opt_hat, "resadv_allow": resadv_allow}
        )
        report["run"] = run
        return report

    w = flat_work_function(u)
    p = alg.probabilities(w)
    issues: list[dict] = []
    cost = 0.0
    sens_allow = tol + alg.phi_slack
    for i, t in enumerate(tasks):
        v = u.metric.index(t.state)
        cross = alg.zero_crossing(w, v)
        if t.delta > cross + 1e-9:
            issues.append(
                {"check": "resadv", "step": i, "magnitude": t.delta - cross}
            )
        w2 = apply_elementary(u, w, v, t.delta)
        p2 = alg.probabilities(w2)
        if abs(p2.sum() - 1.0) > 1e-9 or p2.min() < -1e-12:
            issues.append(
                {"check": "distribution", "step": i, "magnitude": abs(p2.sum() - 1.0)}
            )
        if alg.beta > 0.0:
            d = u.metric.dist
            for x in range(u.n):
                excl = w2[x] - w2 - alg.beta * d[:, x]
                excl[x] = -math.inf
                if excl.max() >= -1e-12 and p2[x] > EPS_EQ:
                    issues.append(
                        {"check": "betatagc", "step": i, "magnitude": float(p2[x])}
                    )
        step_cost = online_step_cost(u, p, p2, t)
        if math.isfinite(sens_allow):
            moving = step_cost - float(p2[v] * u.rates[v] * t.delta)
            lhs = moving + _local_integral(alg, w, v, t.delta)
            lhs += alg.phi(w2) - alg.phi(w)
            rhs = alg.declared_ratio * float(np.asarray(alg.alpha) @ (w2 - w))
            if lhs > rhs + sens_allow:
                issues.append(
                    {"check": "sensibility", "step": i, "magnitude": lhs - rhs}
                )
        cost += step_cost
        w, p = w2, p2
    worst: dict[str, dict] = {}
    for issue in issues:
        cur = worst.get(issue["check"])
        if cur is None or issue["magnitude"] > cur["magnitude"]:
            worst[issue["check"]] = {
                "magnitude": issue["magnitude"],
                "step": issue["step"],
            }
    return {
        "kind": "atomic",
        "steps": len(tasks),
        "cost": cost,
        "opt": opt,
        "issues": issues,
        "worst": worst,
        "passed": not issues,
    }


def run_cost(alg: OnlineAlgorithm, tasks) -> float:
    """Total online cost of the run (endpoint charge convention)."""
    u = alg.umts
    w = flat_work_function(u)
    p = alg.probabilities(w)
    total = 0.0
    for t in tasks:
        w2 = apply_task(u, w, t)
        p2 = alg.probabilities(w2)
        total += online_step_cost(u, p, p2, t)
        w, p = w2, p2
    return total


def empirical_ratio(alg: OnlineAlgorithm, tasks, min_opt: float = 1e-9) -> dict:
    """Cost against the offline optimum, net of the additive allowance.

    The guarantee has the form cost <= ratio * opt + c with
    c = (1 + eta) * ratio * diam + sup(potential); runs whose offline
    optimum is below ``min_opt`` cannot witness a ratio and are skipped.
    """
    u = alg.umts
    opt = offline_opt(u, tasks)
    cost = run_cost(alg, tasks)
    sup = alg.phi_sup if math.isfinite(alg.phi_slack) else alg.potential_bound
    overhead = (1.0 + alg.eta) * alg.declared_ratio * u.diameter() + sup
    out = {
        "cost": cost,
        "opt": opt,
        "overhead": overhead,
        "declared": alg.declared_ratio,
    }
    if opt <= min_opt:
        out.update({"ratio": math.nan, "passed": None})
        return out
    ratio = (cost - overhead) / opt
    out.update({"ratio": ratio, "passed": bool(ratio <= alg.declared_ratio + 1e-9)})
    return out
