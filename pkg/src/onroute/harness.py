"""Measurement harness: run policies, price the guarantees, emit reports.

A run result carries the observed makespan next to the best offline value
we can certify. Small instances get the exact optimum; beyond the exact
caps the certified lower bound stands in, which only overstates the ratio.
An overstated ratio can still prove a run within its bound, but never that
it broke one, so the per-run verdict is three-valued: ``pass``, ``fail``
(exact optimum only), or ``unknown``.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from . import adversary
from .errors import EmptyReport, SchemaViolation
from .metric import EPS, space_from_json
from .model import (
    Instance,
    StreamSetup,
    gen_adaptive_random,
    load_instance,
    load_stream,
)
from .offline import OPT_EXACT_CAPS, OPT_EXACT_CAP_DEFAULT, opt_exact, opt_lower_bound
from .policies import (
    BOUND_TOL,
    LIT_ARB_TSP,
    LIT_DARP,
    LIT_LINE_TSP,
    make_policy,
)
from .simulate import Trace, audit, run


@dataclass(frozen=True)
class Bound:
    value: float
    formula: str
    radius_term: float
    literature: float
    radius_active: bool


def theoretical_bound(setting) -> Bound:
    """Guarantee for the setting: min of the radius term and the known constant.

    ``setting`` is anything with space/mode/ending/k/locality/arrival
    (an instance or a stream setup).
    """
    delta = setting.locality / setting.space.diameter
    tsp = setting.mode == "tsp"
    line = setting.space.kind == "line"
    if setting.k == 1 and setting.arrival == "sequential":
        term = 1.0 + delta
        return Bound(term, "1+delta", term, math.inf, True)
    if setting.k == 1:
        if line:
            beta = setting.space.min_side_ratio
            term = 1.0 + (1.0 + delta) / (1.0 + beta)
            lit = LIT_LINE_TSP if tsp else LIT_DARP
            formula = "1+(1+delta)/(1+beta)"
        else:
            term = 2.0 + delta
            lit = LIT_ARB_TSP if tsp else LIT_DARP
            formula = "2+delta"
    elif line and tsp:
        gamma = setting.space.max_side_ratio
        term = 2.0 + delta / gamma
        lit = LIT_LINE_TSP
        formula = "2+delta/gamma"
    else:
        term = 2.0 * (1.0 + delta)
        lit = LIT_ARB_TSP if tsp else LIT_DARP
        formula = "2*(1+delta)"
    active = term <= lit + 1e-12
    return Bound(min(term, lit), formula if active else "literature", term, lit, active)


def opt_value(inst: Instance) -> tuple[float, str]:
    """Exact optimum within the caps, certified lower bound beyond them."""
    cap = OPT_EXACT_CAPS.get(inst.k, OPT_EXACT_CAP_DEFAULT)
    if inst.m <= cap:
        return opt_exact(inst).value, "exact"
    return opt_lower_bound(inst).value, "lower"


CSV_FIELDS = (
    "label", "policy", "space", "mode", "ending", "k", "m", "delta", "beta",
    "gamma", "makespan", "opt", "opt_kind", "ratio", "bound", "formula",
    "within_bound", "branch", "audit_ok", "seed", "runtime",
)


@dataclass
class RunResult:
    label: str
    policy: str
    space: str
    mode: str
    ending: str
    k: int
    m: int
    delta: float
    beta: Optional[float]
    gamma: Optional[float]
    makespan: float
    opt: float
    opt_kind: str
    ratio: float
    bound: float
    formula: str
    within_bound: str
    branch: str
    audit_ok: bool
    seed: Union[int, str]
    runtime: float
    bound_term: float = math.inf
    bound_lit: float = math.inf
    trace: Optional[Trace] = None

    def row(self) -> list:
        out = []
        for f in CSV_FIELDS:
            v = getattr(self, f)
            out.append("" if v is None else v)
        return out


def run_one(setup, policy_name: str, *, label: str = "",
            seed: Union[int, str] = "", want_trace: bool = False) -> RunResult:
    started = time.perf_counter()
    policy = make_policy(policy_name)
    trace = run(setup, policy)
    inst = trace.instance
    report = audit(trace)
    opt, opt_kind = opt_value(inst)
    ol = trace.makespan
    if opt <= EPS:
        ratio = 1.0 if ol <= EPS else math.inf
    else:
        ratio = ol / opt
    bound = theoretical_bound(inst)
    if ratio <= bound.value + BOUND_TOL:
        verdict = "pass"
    elif opt_kind == "exact":
        verdict = "fail"
    else:
        verdict = "unknown"  # denominator is only a lower bound
    line = inst.space.kind == "line"
    return RunResult(
        label=label or policy_name,
        policy=trace.policy,
        space=inst.space.kind,
        mode=inst.mode,
        ending=inst.ending,
        k=inst.k,
        m=inst.m,
        delta=inst.locality / inst.space.diameter,
        beta=inst.space.min_side_ratio if line else None,
        gamma=inst.space.max_side_ratio if line else None,
        makespan=ol,
        opt=opt,
        opt_kind=opt_kind,
        ratio=ratio,
        bound=bound.value,
        formula=bound.formula,
        within_bound=verdict,
        branch=str(trace.meta.get("branch", "")),
        audit_ok=report.ok,
        seed=seed,
        runtime=time.perf_counter() - started,
        bound_term=bound.radius_term,
        bound_lit=bound.literature,
        trace=trace if want_trace else None,
    )


# --------------------------------------------------------------------------
# Experiment expansion

def expand_stream(spec: dict):
    """Stream description to something runnable (setup or instance)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "star":
        return adversary.star_setup(spec["n"], spec["delta"],
                                    ending=spec.get("ending", "homing"))
    if kind == "span-chase":
        return adversary.span_chase_setup(
            spec["left"], spec["right"], spec["locality"],
            mode=spec.get("mode", "tsp"), ending=spec.get("ending", "nomadic"),
            extra=spec.get("extra", 0), seed=spec.get("seed", 0),
        )
    if kind == "ladder":
        return adversary.ladder_chase_setup(
            spec["rungs"], mode=spec.get("mode", "tsp"),
            ending=spec.get("ending", "nomadic"),
            cluster=spec.get("cluster", 0), redrops=spec.get("redrops", 0),
            seed=spec.get("seed", 0),
        )
    if kind == "arms":
        return adversary.arms_chase_setup(
            spec["k"], mode=spec.get("mode", "tsp"),
            ending=spec.get("ending", "nomadic"),
            n_a=spec.get("n_a", 4), n_b=spec.get("n_b", 4),
            step_scale=spec.get("step_scale", 0.95),
        )
    if kind == "random":
        return StreamSetup(
            space=space_from_json(spec["space"]),
            oracle=gen_adaptive_random(spec["generator"]),
            mode=spec.get("mode", "tsp"),
            ending=spec.get("ending", "nomadic"),
            k=spec.get("k", 1),
            locality=spec["delta"],
            arrival=spec.get("arrival", "general"),
        )
    if kind == "instance-file":
        return load_instance(spec["path"])
    if kind == "stream-file":
        return load_stream(spec["path"])
    raise SchemaViolation(f"unknown stream kind {kind!r}")


def _seed_copies(job: dict) -> list[dict]:
    seeds = job.get("seeds")
    if seeds is None and "repeat" in job:
        first = int(job.get("seed", 0))
        seeds = list(range(first, first + int(job["repeat"])))
    if seeds is None:
        return [job]
    if not isinstance(job.get("stream"), dict):
        raise SchemaViolation("seed expansion needs an inline stream description")
    label = job.get("label", job.get("policy", ""))
    out = []
    for s in seeds:
        stream = dict(job["stream"])
        if "generator" in stream:
            gen = dict(stream["generator"])
            gen["seed"] = s
            stream["generator"] = gen
        else:
            stream["seed"] = s
        out.append({"policy": job["policy"], "stream": stream,
                    "label": f"{label}@s{s}", "seed": s})
    return out


def expand_jobs(jobs: Sequence[dict]) -> list[dict]:
    """Flatten seed lists, repeat counts and parameter sweeps into plain jobs."""
    out: list[dict] = []
    for job in jobs:
        if "sweep" in job:
            sw = job["sweep"]
            setups = adversary.sweep_family(
                sw.get("kind", ""), sw.get("grid", ()), sw.get("base"),
                seed=int(sw.get("seed", 0)),
            )
            label = job.get("label", job.get("policy", ""))
            for val, setup in zip(sw["grid"], setups):
                out.append({"policy": job["policy"], "stream": setup,
                            "label": f"{label}@{val:g}",
                            "seed": int(sw.get("seed", 0))})
        else:
            out.extend(_seed_copies(job))
    return out


def run_job(job: dict) -> RunResult:
    stream = job["stream"]
    setup = expand_stream(stream) if isinstance(stream, dict) else stream
    seed = job.get("seed", "")
    if seed == "" and isinstance(stream, dict):
        seed = stream.get("seed", stream.get("generator", {}).get("seed", ""))
    return run_one(setup, job["policy"],
                   label=job.get("label", job["policy"]), seed=seed)


def run_experiment(jobs: Sequence[dict], parallel: int = 1) -> list[RunResult]:
    """All jobs, in input order regardless of worker scheduling."""
    jobs = expand_jobs(jobs)
    for job in jobs:
        if "policy" not in job or "stream" not in job:
            raise SchemaViolation("each job needs a policy and a stream")
    if parallel <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(run_job, jobs))


# --------------------------------------------------------------------------
# Reports

def write_csv(results: Sequence[RunResult], path: str) -> None:
    if not results:
        raise EmptyReport("no runs to write")
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write("#schema=1\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for res in results:
            writer.writerow(res.row())
    os.replace(tmp, path)


def summarize(results: Sequence[RunResult]) -> dict[str, dict]:
    """Worst ratio and verdict counts per (policy, bound formula)."""
    if not results:
        raise EmptyReport("no runs to summarize")
    groups: dict[tuple[str, str], dict] = {}
    for r in results:
        g = groups.setdefault((r.policy, r.formula), {
            "runs": 0, "max_ratio": 0.0, "pass": 0, "fail": 0, "unknown": 0,
        })
        g["runs"] += 1
        g["max_ratio"] = max(g["max_ratio"], r.ratio)
        g[r.within_bound] += 1
    return {f"{p}|{f}": g for (p, f), g in sorted(groups.items())}


PLOT_KINDS = ("ratio-vs-delta", "ratio-vs-n", "bound-overlay")


def emit_plotdata(results: Sequence[RunResult], kind: str,
                  path: Optional[str] = None) -> str:
    """Gnuplot-style columns: per label a data block, then its bound curves.

    Blocks are separated by blank lines and announced by ``# block:``
    comments; rows are ``x value`` pairs. ``ratio-vs-delta`` and
    ``ratio-vs-n`` follow each data block with the effective bound curve;
    ``bound-overlay`` splits that into the radius-formula curve and the
    radius-free literature curve (``inf`` when no constant applies).
    """
    if not results:
        raise EmptyReport("no runs to plot")
    if kind not in PLOT_KINDS:
        raise SchemaViolation(f"unknown plot kind {kind!r} (known: {PLOT_KINDS})")
    xattr = "m" if kind == "ratio-vs-n" else "delta"
    groups: dict[str, list[RunResult]] = {}
    for res in results:
        groups.setdefault(res.label, []).append(res)
    lines = [f"# plot: {kind}", f"# x: {xattr}", "# y: ratio"]

    def block(title: str, rows, value) -> None:
        lines.append("")
        lines.append(f"# block: {title}")
        for r in rows:
            lines.append(f"{getattr(r, xattr):.10g} {value(r):.10g}")

    for label in sorted(groups):
        rows = sorted(groups[label], key=lambda r: (getattr(r, xattr), r.ratio))
        block(label, rows, lambda r: r.ratio)
        if kind == "bound-overlay":
            block(f"{label} bound formula", rows, lambda r: r.bound_term)
            block(f"{label} bound literature", rows, lambda r: r.bound_lit)
        else:
            block(f"{label} bound", rows, lambda r: r.bound)
    text = "\n".join(lines) + "\n"
    if path is not None:
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    return text
