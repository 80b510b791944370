"""Combining stable algorithms across a partition of the state space.

Given per-block algorithms and a quotient algorithm run on one
representative per block (with block ratios as its cost ratios), the
combination plays the product rule: the quotient work function is kept
equal to each block's charge bookkeeping value

    G_l(w_l) = <alpha_l, w_l> - Phi_l(w_l) / r_l,

so a charge of delta at a state inside block l becomes a quotient charge
of delta_hat = G_l(w_l + step) - G_l(w_l). The exported constraint pair
(beta, eta) follows the combination arithmetic below and the potential is
Phi_hat(w_hat) + r * sum_l alpha_hat(z_l) Phi_l(w_l) / r_l.

:class:`CombinedRun` simulates a run while checking the four structural
identities the construction relies on (hatw, welleqw, betatagc,
samecompratio) plus reasonableness of the induced sequences, at the
tolerances each identity supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from umtslab.algorithms import OnlineAlgorithm
from umtslab.core import (
    Umts,
    apply_elementary,
    flat_work_function,
    online_step_cost,
    support_headroom,
)
from umtslab.core import ElementaryTask
from umtslab.metricspace import (
    Partition,
    induced_metric,
    make_partition,
    min_cross_distance,
    quotient_metric,
)

EPS_EQ = 1e-9
EPS_AUDIT = 1e-6


# ---------------------------------------------------------------------------
# constraint arithmetic


def combine_beta_eta(u: Umts, partition: Partition, dist_hat: np.ndarray,
                     quotient_pair: tuple[float, float],
                     block_pairs: list[tuple[float, float]]) -> tuple[float, float]:
    """The (beta, eta) the combination satisfies, from the general formula.

    beta is the largest of the block betas and, over ordered block pairs
    (i, j), of

        (beta_hat d_hat(z_i, z_j) + beta_j diam_j + (beta_i + eta_i) diam_i)
            / min cross distance(M_i, M_j);

    eta is eta_hat diam(M_hat)/diam(M) + max_i eta_i diam(M_i)/diam(M).
    """
    qb, qe = quotient_pair
    diams = [induced_metric(u.metric, blk).diameter() for blk in partition.blocks]
    beta = max((bp[0] for bp in block_pairs), default=0.0)
    b = partition.b
    for i in range(b):
        for j in range(b):
            if i == j:
                continue
            cross = min_cross_distance(u.metric, partition, i, j)
            num = (
                qb * dist_hat[i, j]
                + block_pairs[j][0] * diams[j]
                + block_pairs[i][0] * diams[i]
                + block_pairs[i][1] * diams[i]
            )
            beta = max(beta, num / cross)
    diam = u.diameter()
    diam_hat = float(dist_hat.max())
    eta = qe * diam_hat / diam if diam > 0 else 0.0
    eta += max(
        (block_pairs[i][1] * diams[i] / diam for i in range(b) if diam > 0),
        default=0.0,
    )
    return beta, eta


def nice_beta_eta(k: float, quotient_pair: tuple[float, float],
                  block_pairs: list[tuple[float, float]]) -> tuple[float, float]:
    """Constraint arithmetic for a nice partition with separation factor k.

    Blocks of equal diameter at cross distance at least k times that
    diameter give beta = max(max_i beta_i, beta_hat + max_{i!=j}
    (beta_i + beta_j + eta_i)/k) and eta = eta_hat + max_i eta_i / k.
    """
    qb, qe = quotient_pair
    beta = max(bp[0] for bp in block_pairs)
    if len(block_pairs) > 1:
        worst = -math.inf
        for i, (bi, ei) in enumerate(block_pairs):
            other = max(bp[0] for j, bp in enumerate(block_pairs) if j != i)
            worst = max(worst, bi + ei + other)
        beta = max(beta, qb + worst / k)
    eta = qe + max(ep[1] for ep in block_pairs) / k
    return beta, eta


# ---------------------------------------------------------------------------
# construction


@dataclass
class CombinedParts:
    """Everything a combined algorithm and its auditor need to run."""

    u: Umts
    partition: Partition
    block_algs: list[OnlineAlgorithm]
    block_systems: list[Umts]
    block_of: np.ndarray
    local_index: np.ndarray
    global_index: list[np.ndarray]
    quotient_umts: Umts
    quotient_alg: OnlineAlgorithm
    dist_hat: np.ndarray
    beta: float
    eta: float

    def split(self, w: np.ndarray) -> list[np.ndarray]:
        return [w[idx] for idx in self.global_index]

    def hat_work(self, w: np.ndarray) -> np.ndarray:
        return np.array(
            [a.g_value(wb) for a, wb in zip(self.block_algs, self.split(w))]
        )

    def initial_hat_work(self) -> np.ndarray:
        return np.array(
            [a.g_value(np.zeros(len(idx)))
             for a, idx in zip(self.block_algs, self.global_index)]
        )


def block_subsystem(u: Umts, block) -> Umts:
    idx = [u.metric.index(x) for x in block]
    return Umts(induced_metric(u.metric, block), u.rates[idx], u.s, block[0])


def restrict_sequence(tasks, block) -> list[ElementaryTask]:
    """Project elementary tasks onto a block: outside charges become zero
    charges at the block's first label, preserving sequence length."""
    anchor = block[0]
    out = []
    for t in tasks:
        if t.state in block:
            out.append(ElementaryTask(t.state, t.delta))
        else:
            out.append(ElementaryTask(anchor, 0.0))
    return out


def combine(
    u: Umts,
    blocks: list[list[str]],
    block_algs: list[OnlineAlgorithm],
    quotient_builder,
    dist_hat: np.ndarray | None = None,
    declared_beta: float | None = None,
    declared_eta: float | None = None,
    name: str | None = None,
) -> OnlineAlgorithm:
    """Combine per-block algorithms under a quotient family.

    ``quotient_builder`` maps the quotient system (representatives, block
    ratios as cost ratios, same distance ratio) to an algorithm. Declared
    constraint constants may upgrade the computed ones but never undercut
    them; a computed beta above 1 makes the construction unsound and is
    rejected.
    """
    if len(blocks) != len(block_algs):
        raise ValueError("one algorithm per block required")
    partition = make_partition(u.metric, blocks)
    if partition.b == 1:
        return block_algs[0]
    for a, blk in zip(block_algs, blocks):
        sub = block_subsystem(u, blk)
        if a.umts.labels != sub.labels:
            raise ValueError(f"block algorithm labels {a.umts.labels} != {sub.labels}")
        if not np.allclose(a.umts.metric.dist, sub.metric.dist, atol=EPS_EQ):
            raise ValueError("block algorithm metric disagrees with induced metric")
        if not np.allclose(a.umts.rates, sub.rates, atol=EPS_EQ) or a.umts.s != sub.s:
            raise ValueError("block algorithm rates or distance ratio disagree")

    qmetric = quotient_metric(u.metric, partition, dist_hat)
    dh = qmetric.dist
    hat_rates = np.array([a.declared_ratio for a in block_algs])
    init_block = next(i for i, blk in enumerate(blocks) if u.initial_state in blk)
    qu = Umts(qmetric, hat_rates, u.s, qmetric.labels[init_block])
    qalg = quotient_builder(qu)

    pairs = [(a.beta, a.eta) for a in block_algs]
    beta, eta = combine_beta_eta(u, partition, dh, (qalg.beta, qalg.eta), pairs)
    if declared_beta is not None:
        if declared_beta < beta - 1e-12:
            raise ValueError(f"declared beta {declared_beta} undercuts computed {beta}")
        beta = declared_beta
    if declared_eta is not None:
        if declared_eta < eta - 1e-12:
            raise ValueError(f"declared eta {declared_eta} undercuts computed {eta}")
        eta = declared_eta
    if beta > 1.0 + EPS_EQ:
        raise ValueError(f"combination needs beta <= 1, got {beta:.6g}")

    n = u.n
    block_of = np.zeros(n, dtype=int)
    local_index = np.zeros(n, dtype=int)
    global_index = []
    for j, blk in enumerate(blocks):
        idx = np.array([u.metric.index(x) for x in blk])
        global_index.append(idx)
        block_of[idx] = j
        local_index[idx] = np.arange(len(blk))

    parts = CombinedParts(
        u=u,
        partition=partition,
        block_algs=list(block_algs),
        block_systems=[block_subsystem(u, blk) for blk in blocks],
        block_of=block_of,
        local_index=local_index,
        global_index=global_index,
        quotient_umts=qu,
        quotient_alg=qalg,
        dist_hat=dh,
        beta=beta,
        eta=eta,
    )

    r = qalg.declared_ratio
    alpha = np.zeros(n)
    for j, idx in enumerate(global_index):
        alpha[idx] = qalg.alpha[j] * np.asarray(block_algs[j].alpha)

    def probs(w):
        w = np.asarray(w, dtype=float)
        ws = parts.split(w)
        p_hat = qalg.probabilities(parts.hat_work(w))
        p = np.zeros(n)
        for j, idx in enumerate(global_index):
            p[idx] = p_hat[j] * block_algs[j].probabilities(ws[j])
        return p

    def phi(w):
        w = np.asarray(w, dtype=float)
        ws = parts.split(w)
        total = qalg.phi(parts.hat_work(w))
        for j in range(partition.b):
            bphi = block_algs[j].phi(ws[j])
            if bphi != 0.0:
                total += r * qalg.alpha[j] * bphi / hat_rates[j]
        return float(total)

    def crossing(w, v):
        w = np.asarray(w, dtype=float)
        j = int(block_of[v])
        lv = int(local_index[v])
        wb = parts.split(w)[j]
        xb = block_algs[j].zero_crossing(wb, lv)
        what = parts.hat_work(w)
        xq = qalg.zero_crossing(what, j)
        if xq == math.inf:
            return xb
        g0 = block_algs[j].g_value(wb)

        def over(x):
            wb2 = wb.copy()
            wb2[lv] += x
            return block_algs[j].g_value(wb2) - g0 - xq

        if math.isfinite(xb) and over(xb) <= 0.0:
            return xb
        hi = max(xq, 1e-6)
        cap = 1e9 * (1.0 + xq) + 1.0
        while over(hi) < 0.0 and hi < cap:
            hi *= 2.0
        if over(hi) < 0.0:
            return xb
        if over(0.0) >= 0.0:
            return 0.0
        x = float(brentq(over, 0.0, hi, xtol=1e-12))
        return min(x, xb) if math.isfinite(xb) else x

    block_slack = max(
        (a.phi_slack / rr for a, rr in zip(block_algs, hat_rates) if rr > 0),
        default=0.0,
    )
    phi_sup = qalg.phi_sup + r * max(
        (a.phi_sup / rr for a, rr in zip(block_algs, hat_rates) if rr > 0),
        default=0.0,
    )
    alg = OnlineAlgorithm(
        name=name or f"combine[{qalg.name} / {'+'.join(a.name for a in block_algs)}]",
        umts=u,
        alpha=alpha,
        declared_ratio=r,
        beta=beta,
        eta=eta,
        probabilities=probs,
        phi=phi,
        phi_sup=float(phi_sup),
        zero_crossing=crossing,
        rebuild=lambda u2: combine(
            u2,
            blocks,
            [a.rebuild(block_subsystem(u2, blk)) for a, blk in zip(block_algs, blocks)],
            quotient_builder,
            dist_hat,
            declared_beta,
            declared_eta,
            name,
        ),
        descriptor={
            "family": "combined",
            "quotient": qalg.descriptor,
            "blocks": [a.descriptor for a in block_algs],
            "partition": [list(blk) for blk in blocks],
            "beta": beta,
            "eta": eta,
            "ratio": r,
        },
        eta_variant_basis=eta,
        phi_slack=qalg.phi_slack + r * block_slack,
        parts=parts,
    )
    return alg


# ---------------------------------------------------------------------------
# auditing runs


def translate_task(parts: CombinedParts, w_blocks: list[np.ndarray],
                   v: int, delta: float) -> tuple[int, float, np.ndarray, float]:
    """Quotient charge for an elementary charge at global state index v.

    Returns (block index, delta_hat, new block work function, clamp size);
    delta_hat is the increase of the block's G value, clamped at zero.
    """
    j = int(parts.block_of[v])
    lv = int(parts.local_index[v])
    a = parts.block_algs[j]
    wb = w_blocks[j]
    wb2 = apply_elementary(parts.block_systems[j], wb, lv, delta)
    raw = a.g_value(wb2) - a.g_value(wb)
    clamp = max(0.0, -raw)
    return j, max(0.0, raw), wb2, clamp


@dataclass
class AuditIssue:
    lemma: str
    step: int
    magnitude: float
    detail: str


@dataclass
class CombinedRun:
    """Step a combined algorithm while checking its structural identities.

    Tracks the global work function, per-block work functions, and the
    quotient work function started at G_l(0). Each step checks:
    hatw (quotient values equal block G values, 1e-6), welleqw (block and
    restricted global work functions agree, 1e-9), betatagc (zero mass on
    beta-excluded states, 1e-9), samecompratio (combined step cost at most
    the quotient step cost, 1e-6 plus any gridded-potential slack), and
    reasonableness of the charge against both crossings.
    """

    alg: OnlineAlgorithm
    tol_hatw: float = EPS_AUDIT
    tol_well: float = EPS_EQ
    tol_cost: float = EPS_AUDIT
    issues: list[AuditIssue] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    def __post_init__(self):
        parts = self.alg.parts
        if parts is None:
            raise ValueError("algorithm was not built by combine()")
        self.parts = parts
        u = parts.u
        self.w = flat_work_function(u)
        self.w_blocks = [np.zeros(len(idx)) for idx in parts.global_index]
        self.what = parts.initial_hat_work()
        self.p = self.alg.probabilities(self.w)
        self.p_hat = parts.quotient_alg.probabilities(self.what)
        self.p0 = self.p.copy()
        self.p_hat0 = self.p_hat.copy()
        self.steps = 0
        self.cost = 0.0
        self.qcost = 0.0
        self.dhat_tol = max(
            EPS_EQ,
            max((a.phi_slack for a in parts.block_algs if math.isfinite(a.phi_slack)),
                default=0.0),
        )

    def header(self) -> dict:
        parts = self.parts
        u = parts.u
        return {
            "kind": "header",
            "labels": list(u.labels),
            "dist": u.metric.dist.tolist(),
            "rates": u.rates.tolist(),
            "s": u.s,
            "initial": u.initial_state,
            "blocks": [list(b) for b in parts.partition.blocks],
            "dist_hat": parts.dist_hat.tolist(),
            "hat_rates": parts.quotient_umts.rates.tolist(),
            "hat_init": parts.initial_hat_work().tolist(),
            "beta": parts.beta,
            "alpha": np.asarray(self.alg.alpha).tolist(),
            "ratio": self.alg.declared_ratio,
            "algorithm": self.alg.name,
            "tol": (self.tol_cost + self.alg.phi_slack)
            if math.isfinite(self.alg.phi_slack)
            else None,
            "dhat_tol": self.dhat_tol,
            "p0": self.p0.tolist(),
            "p_hat0": self.p_hat0.tolist(),
        }

    def _issue(self, lemma, magnitude, detail):
        self.issues.append(AuditIssue(lemma, self.steps, float(magnitude), detail))

    def step(self, state, delta: float) -> dict:
        parts = self.parts
        u = parts.u
        v = u.metric.index(state) if isinstance(state, str) else int(state)
        qu = parts.quotient_umts
        qalg = parts.quotient_alg

        # reasonableness against both crossings, before moving anything
        xb = parts.block_algs[parts.block_of[v]].zero_crossing(
            self.w_blocks[parts.block_of[v]], int(parts.local_index[v])
        )
        if delta > xb + 1e-9:
            self._issue("resadv", delta - xb, f"charge {delta:.6g} beyond block crossing {xb:.6g}")

        j, dhat, wb2, clamp = translate_task(parts, self.w_blocks, v, delta)
        if clamp > self.dhat_tol:
            self._issue("hatw", clamp, "negative quotient charge beyond tolerance")
        xq = qalg.zero_crossing(self.what, j)
        if dhat > xq + 1e-9:
            self._issue("resadv", dhat - xq, f"quotient charge {dhat:.6g} beyond crossing {xq:.6g}")

        w2 = apply_elementary(u, self.w, v, delta)
        what2 = apply_elementary(qu, self.what, j, dhat)
        w_blocks2 = list(self.w_blocks)
        w_blocks2[j] = wb2

        # welleqw: restricted global and block-local work functions agree
        for i, idx in enumerate(parts.global_index):
            gap = np.abs(w2[idx] - w_blocks2[i]).max()
            if gap > self.tol_well:
                self._issue("welleqw", gap, f"block {i} work function drifts")

        # hatw: quotient work function equals the block G values
        gvals = np.array(
            [a.g_value(wb) for a, wb in zip(parts.block_algs, w_blocks2)]
        )
        gap = np.abs(what2 - gvals).max()
        if gap > self.tol_hatw:
            self._issue("hatw", gap, "quotient work function detached from block G values")

        p2 = self.alg.probabilities(w2)
        p_hat2 = qalg.probabilities(what2)

        # betatagc: no mass on states excluded by the beta constraint
        d = u.metric.dist
        for x in range(u.n):
            worst = (w2[x] - w2 - parts.beta * d[:, x])
            worst[x] = -math.inf
            if worst.max() >= -1e-12 and p2[x] > EPS_EQ:
                self._issue("betatagc", p2[x], f"mass {p2[x]:.3g} on excluded state {u.labels[x]}")

        step_cost = online_step_cost(u, self.p, p2, ElementaryTask(u.labels[v], delta))
        qtask = ElementaryTask(qu.labels[j], dhat)
        qstep_cost = online_step_cost(qu, self.p_hat, p_hat2, qtask)
        slack_allow = self.tol_cost + self.alg.phi_slack if math.isfinite(self.alg.phi_slack) else math.inf
        if step_cost > qstep_cost + slack_allow:
            self._issue(
                "samecompratio",
                step_cost - qstep_cost,
                f"combined step cost {step_cost:.6g} exceeds quotient {qstep_cost:.6g}",
            )

        self.w, self.w_blocks, self.what = w2, w_blocks2, what2
        self.p, self.p_hat = p2, p_hat2
        self.cost += step_cost
        self.qcost += qstep_cost
        self.steps += 1
        row = {
            "kind": "step",
            "i": self.steps,
            "state": u.labels[v],
            "delta": delta,
            "block": j,
            "delta_hat": dhat,
            "w": w2.tolist(),
            "w_blocks": [wb.tolist() for wb in w_blocks2],
            "what": what2.tolist(),
            "g": gvals.tolist(),
            "p": p2.tolist(),
            "p_hat": p_hat2.tolist(),
            "cost": step_cost,
            "qcost": qstep_cost,
        }
        self.trace.append(row)
        return row

    def report(self) -> dict:
        worst = {}
        for issue in self.issues:
            cur = worst.get(issue.lemma)
            if cur is None or issue.magnitude > cur["magnitude"]:
                worst[issue.lemma] = {
                    "magnitude": issue.magnitude,
                    "step": issue.step,
                    "detail": issue.detail,
                }
        return {
            "steps": self.steps,
            "cost": self.cost,
            "quotient_cost": self.qcost,
            "issues": len(self.issues),
            "worst": worst,
            "passed": not self.issues,
        }
