"""Command line front end for running experiment matrices and checking traces.

``umtslab run config.json`` expands the config's spaces, algorithms,
adversaries, and seeds into a job matrix, runs every job, and writes a
CSV table, a JSON summary, and one JSONL trace per job into the output
directory. ``umtslab verify trace.jsonl`` replays a trace from its own
numbers alone (no algorithm is rebuilt) and reports the first violated
check. Exit codes: 0 all checks passed, 1 a guarantee or trace check
failed, 2 the config or invocation is unusable.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from umtslab.algorithms import odd_exponent, trivial_algorithm, two_stable
from umtslab.combiner import CombinedRun
from umtslab.core import (
    ElementaryTask,
    Umts,
    apply_elementary,
    flat_work_function,
    online_step_cost,
)
from umtslab.harness import AdversaryConfig, audit_run, empirical_ratio, generate_sequence
from umtslab.hst import line_algorithm, weighted_caching_algorithm
from umtslab.metricspace import FiniteMetric, make_uniform
from umtslab.portfolio import combined_algorithm, w_combined_algorithm

RUN_SCHEMA = "umtslab-run-v1"
SUMMARY_SCHEMA = "umtslab-summary-v1"
SEED_ENV = "UMTSLAB_SEED"
UNIFORM_ALGORITHMS = ("trivial", "odd-exponent", "two-stable", "combined", "wcombined")
CSV_COLUMNS = (
    "space",
    "algorithm",
    "adversary",
    "seed",
    "steps",
    "cost",
    "opt",
    "ratio",
    "declared",
    "passed",
)


class ConfigError(Exception):
    """The run config or invocation cannot be executed."""


def _build_uniform_space(spec) -> Umts:
    try:
        points = int(spec["points"])
    except KeyError:
        raise ConfigError("uniform space needs a 'points' count") from None
    distance = float(spec.get("distance", 1.0))
    s = float(spec.get("s", 1.0))
    rates = spec.get("rates")
    if rates is None:
        rates = [float(spec.get("rate", 1.0))] * points
    if len(rates) != points:
        raise ConfigError("uniform space needs one rate per point")
    metric = make_uniform(points, d=distance)
    return Umts(metric, np.asarray(rates, dtype=float), s, str(spec.get("initial", "")))


def build_algorithm(space_spec, algorithm: str):
    """Instantiate the named rule on the configured space."""
    kind = space_spec.get("kind", "uniform")
    try:
        if kind == "uniform":
            if algorithm not in UNIFORM_ALGORITHMS:
                raise ConfigError(
                    f"algorithm {algorithm!r} does not run on a uniform space"
                )
            u = _build_uniform_space(space_spec)
            if algorithm == "trivial":
                return trivial_algorithm(u)
            if algorithm == "odd-exponent":
                return odd_exponent(u)
            if algorithm == "two-stable":
                return two_stable(u)
            if algorithm == "combined":
                return combined_algorithm(u)
            return w_combined_algorithm(u)
        if kind == "caching":
            if algorithm != "caching":
                raise ConfigError(f"algorithm {algorithm!r} does not run on a caching space")
            costs = [float(c) for c in space_spec["fetch_costs"]]
            return weighted_caching_algorithm(costs, s=float(space_spec.get("s", 1.0)))
        if kind == "line":
            if algorithm != "line":
                raise ConfigError(f"algorithm {algorithm!r} does not run on a line space")
            return line_algorithm(
                int(space_spec["points"]),
                gap=float(space_spec.get("gap", 1.0)),
                s=float(space_spec.get("s", 1.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad space {space_spec.get('name', kind)!r}: {exc}") from exc
    raise ConfigError(f"unknown space kind {kind!r}")


def _atomic_trace(alg, tasks):
    """Work function, distribution, and cost chain for a single rule."""
    u = alg.umts
    w = flat_work_function(u)
    p = alg.probabilities(w)
    header = {
        "kind": "header",
        "labels": list(u.labels),
        "dist": u.metric.dist.tolist(),
        "rates": u.rates.tolist(),
        "s": u.s,
        "initial": u.initial_state,
        "beta": alg.beta,
        "ratio": alg.declared_ratio,
        "algorithm": alg.name,
        "p0": p.tolist(),
    }
    rows = []
    for i, t in enumerate(tasks, start=1):
        v = u.metric.index(t.state)
        w2 = apply_elementary(u, w, v, t.delta)
        p2 = alg.probabilities(w2)
        cost = online_step_cost(u, p, p2, t)
        rows.append(
            {
                "kind": "step",
                "i": i,
                "state": t.state,
                "delta": t.delta,
                "w": w2.tolist(),
                "p": p2.tolist(),
                "cost": cost,
            }
        )
        w, p = w2, p2
    return header, rows


def _run_job(space_spec, algorithm, adversary_spec, seed):
    alg = build_algorithm(space_spec, algorithm)
    config = AdversaryConfig(
        kind=adversary_spec.get("kind", "uniform-random"),
        steps=int(adversary_spec.get("steps", 100)),
        seed=int(seed),
        max_fraction=float(adversary_spec.get("max_fraction", 0.999)),
    )
    tasks = generate_sequence(alg, config)
    report = audit_run(alg, tasks)
    ratio = empirical_ratio(alg, tasks)
    if report["kind"] == "combined":
        run: CombinedRun = report["run"]
        trace = [run.header()] + list(run.trace)
        cost = run.cost
    else:
        header, rows = _atomic_trace(alg, tasks)
        trace = [header] + rows
        cost = report["cost"]
    passed = bool(report["passed"]) and ratio["passed"] is not False
    row = {
        "space": str(space_spec.get("name", space_spec.get("kind", "uniform"))),
        "algorithm": algorithm,
        "adversary": config.kind,
        "seed": int(seed),
        "steps": len(tasks),
        "cost": cost,
        "opt": ratio["opt"],
        "ratio": ratio["ratio"],
        "declared": alg.declared_ratio,
        "passed": passed,
        "audit_passed": bool(report["passed"]),
        "ratio_passed": ratio["passed"],
        "rule": alg.name,
    }
    return {"row": row, "trace": trace}


def _run_job_star(job):
    return _run_job(*job)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", str(text))


def _load_config(path: Path) -> dict:
    try:
        config = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict) or config.get("schema") != RUN_SCHEMA:
        raise ConfigError(f"config schema must be {RUN_SCHEMA!r}")
    return config


def _seeds(config) -> list[int]:
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return [int(env)]
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    seeds = config.get("seeds", [0])
    if not seeds:
        raise ConfigError("config lists no seeds")
    return [int(s) for s in seeds]


def cmd_run(args) -> int:
    config = _load_config(Path(args.config))
    seeds = _seeds(config)
    spaces = config.get("spaces")
    algorithms = config.get("algorithms")
    if not spaces or not algorithms:
        raise ConfigError("config needs non-empty 'spaces' and 'algorithms' lists")
    adversaries = config.get("adversaries") or [{"kind": "uniform-random", "steps": 100}]
    jobs = [
        (space, algorithm, adversary, seed)
        for space in spaces
        for algorithm in algorithms
        for adversary in adversaries
        for seed in seeds
    ]

    workers = 1 if args.deterministic else max(1, args.jobs)
    if workers == 1:
        results = [_run_job_star(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job_star, jobs))

    out_dir = Path(args.out)
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)

    summary_rows = []
    for result in results:
        row = result["row"]
        name = "--".join(
            [
                _slug(row["space"]),
                _slug(row["algorithm"]),
                _slug(row["adversary"]),
                f"seed{row['seed']}",
            ]
        )
        trace_path = traces_dir / f"{name}.jsonl"
        with trace_path.open("w") as fh:
            for line in result["trace"]:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
        srow = dict(row)
        srow["trace"] = str(trace_path.relative_to(out_dir))
        if isinstance(srow["ratio"], float) and math.isnan(srow["ratio"]):
            srow["ratio"] = None
        summary_rows.append(srow)

    with (out_dir / "results.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for result in results:
            row = result["row"]
            writer.writerow(
                [
                    row["space"],
                    row["algorithm"],
                    row["adversary"],
                    row["seed"],
                    row["steps"],
                    repr(float(row["cost"])),
                    repr(float(row["opt"])),
                    repr(float(row["ratio"])),
                    repr(float(row["declared"])),
                    "pass" if row["passed"] else "fail",
                ]
            )

    failures = sum(1 for result in results if not result["row"]["passed"])
    summary = {
        "schema": SUMMARY_SCHEMA,
        "config": Path(args.config).name,
        "deterministic": bool(args.deterministic),
        "failures": failures,
        "rows": summary_rows,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    for result in results:
        row = result["row"]
        ratio = row["ratio"]
        shown = "n/a" if isinstance(ratio, float) and math.isnan(ratio) else f"{ratio:.4f}"
        verdict = "pass" if row["passed"] else "FAIL"
        print(
            f"{row['space']} {row['algorithm']} {row['adversary']} seed={row['seed']} "
            f"steps={row['steps']} ratio={shown} declared={row['declared']:.4f} {verdict}"
        )
    print(f"{len(results)} runs, {failures} failures, outputs in {out_dir}")
    return 0 if failures == 0 else 1


def _verify_atomic(head, rows):
    u = Umts(
        FiniteMetric(tuple(head["labels"]), np.asarray(head["dist"], dtype=float)),
        np.asarray(head["rates"], dtype=float),
        float(head["s"]),
        str(head.get("initial", "")),
    )
    beta = float(head.get("beta", 0.0))
    d = u.metric.dist
    w = flat_work_function(u)
    for row in rows:
        i = int(row["i"])
        v = u.metric.index(row["state"])
        w2 = apply_elementary(u, w, v, float(row["delta"]))
        stored = np.asarray(row["w"], dtype=float)
        gap = float(np.abs(w2 - stored).max())
        if gap > 1e-9:
            return 1, (
                f"welleqw violated at step {i}: stored work function deviates "
                f"from the recomputed chain by {gap:.3g}"
            )
        p = np.asarray(row["p"], dtype=float)
        if beta > 0.0:
            for x in range(u.n):
                excl = stored[x] - stored - beta * d[:, x]
                excl[x] = -math.inf
                if excl.max() >= -1e-12 and p[x] > 1e-9:
                    return 1, (
                        f"betatagc violated at step {i}: mass {p[x]:.3g} "
                        f"on excluded state {u.labels[x]}"
                    )
        w = stored
    return 0, f"ok: {len(rows)} steps verified (welleqw, betatagc)"


def _verify_combined(head, rows):
    u = Umts(
        FiniteMetric(tuple(head["labels"]), np.asarray(head["dist"], dtype=float)),
        np.asarray(head["rates"], dtype=float),
        float(head["s"]),
        str(head.get("initial", "")),
    )
    blocks = [[u.metric.index(m) for m in b] for b in head["blocks"]]
    qlabels = tuple(f"B{i}" for i in range(len(blocks)))
    qu = Umts(
        FiniteMetric(qlabels, np.asarray(head["dist_hat"], dtype=float)),
        np.asarray(head["hat_rates"], dtype=float),
        float(head["s"]),
    )
    beta = float(head["beta"])
    d = u.metric.dist
    tol = head.get("tol")
    cost_allow = math.inf if tol is None else float(tol)
    w = flat_work_function(u)
    what = np.asarray(head["hat_init"], dtype=float)
    p_prev = np.asarray(head["p0"], dtype=float)
    ph_prev = np.asarray(head["p_hat0"], dtype=float)
    for row in rows:
        i = int(row["i"])
        v = u.metric.index(row["state"])
        delta = float(row["delta"])
        j = int(row["block"])
        dhat = float(row["delta_hat"])
        stored_w = np.asarray(row["w"], dtype=float)
        w2 = apply_elementary(u, w, v, delta)
        gap = float(np.abs(w2 - stored_w).max())
        if gap > 1e-9:
            return 1, (
                f"welleqw violated at step {i}: stored work function deviates "
                f"from the recomputed chain by {gap:.3g}"
            )
        for b, idx in enumerate(blocks):
            bgap = float(np.abs(stored_w[idx] - np.asarray(row["w_blocks"][b])).max())
            if bgap > 1e-9:
                return 1, (
                    f"welleqw violated at step {i}: block {b} work function "
                    f"drifts from the restricted global one by {bgap:.3g}"
                )
        stored_what = np.asarray(row["what"], dtype=float)
        what2 = apply_elementary(qu, what, j, dhat)
        hgap = float(np.abs(what2 - stored_what).max())
        if hgap > 1e-9:
            return 1, (
                f"hatw violated at step {i}: quotient work function detaches "
                f"from its charges by {hgap:.3g}"
            )
        ggap = float(np.abs(stored_what - np.asarray(row["g"], dtype=float)).max())
        if ggap > 1e-6:
            return 1, (
                f"hatw violated at step {i}: quotient work function differs "
                f"from the block G values by {ggap:.3g}"
            )
        p2 = np.asarray(row["p"], dtype=float)
        for x in range(u.n):
            excl = stored_w[x] - stored_w - beta * d[:, x]
            excl[x] = -math.inf
            if excl.max() >= -1e-12 and p2[x] > 1e-9:
                return 1, (
                    f"betatagc violated at step {i}: mass {p2[x]:.3g} "
                    f"on excluded state {u.labels[x]}"
                )
        ph2 = np.asarray(row["p_hat"], dtype=float)
        cost = float(row["cost"])
        qcost = float(row["qcost"])
        cexp = online_step_cost(u, p_prev, p2, ElementaryTask(u.labels[v], delta))
        if abs(cexp - cost) > 1e-6:
            return 1, (
                f"samecompratio violated at step {i}: stored step cost "
                f"disagrees with the transport recomputation by {abs(cexp - cost):.3g}"
            )
        qexp = online_step_cost(qu, ph_prev, ph2, ElementaryTask(qlabels[j], dhat))
        if abs(qexp - qcost) > 1e-6:
            return 1, (
                f"samecompratio violated at step {i}: stored quotient cost "
                f"disagrees with the transport recomputation by {abs(qexp - qcost):.3g}"
            )
        if cost > qcost + cost_allow:
            return 1, (
                f"samecompratio violated at step {i}: step cost {cost:.6g} "
                f"exceeds the quotient step cost {qcost:.6g}"
            )
        w, what = stored_w, stored_what
        p_prev, ph_prev = p2, ph2
    return 0, f"ok: {len(rows)} steps verified (welleqw, hatw, betatagc, samecompratio)"


def cmd_verify(args) -> int:
    path = Path(args.trace)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}") from exc
    try:
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise ConfigError(f"trace is not valid JSONL: {exc}") from exc
    if not lines:
        print("empty trace: nothing to verify")
        return 0
    head = lines[0]
    if not isinstance(head, dict) or head.get("kind") != "header":
        raise ConfigError("trace must start with a header line")
    try:
        if "blocks" in head:
            code, message = _verify_combined(head, lines[1:])
        else:
            code, message = _verify_atomic(head, lines[1:])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed trace: {exc}") from exc
    print(message)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="umtslab",
        description="Run task-system experiment matrices and verify their traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the matrix described by a JSON config")
    run_p.add_argument("config", help="path to a umtslab-run-v1 JSON config")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    run_p.add_argument(
        "--deterministic",
        action="store_true",
        help="serial execution with byte-stable outputs",
    )
    run_p.add_argument("--out", default="umtslab-out", help="output directory")
    verify_p = sub.add_parser("verify", help="recheck a trace file from its own numbers")
    verify_p.add_argument("trace", help="path to a JSONL trace written by run")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
