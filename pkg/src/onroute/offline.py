"""Offline baselines: schedule evaluation, the exact clairvoyant optimum and
certified lower bounds.

The optimum searched here is the best makespan over per-server visiting
orders, where a dial-a-ride request is carried straight from its source to
its destination. Waiting is never written into a schedule explicitly;
``evaluate_schedule`` inserts it exactly where an action would otherwise
happen before its release, which cannot hurt the makespan (arrival times
are monotone in extra waiting).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import _kernels
from .errors import CapExceeded, SchemaViolation
from .metric import EPS, Point, Space
from .model import Instance, Request
from .tours import (
    chain_arrays,
    pair_tour,
    pair_tour_exact,
    tsp_tour,
    tsp_tour_exact,
)

# Exact makespan search caps, by server count.
OPT_EXACT_CAPS = {1: 10, 2: 8, 3: 7}
OPT_EXACT_CAP_DEFAULT = 6
KTOUR_EXACT_CAP = 10


@dataclass(frozen=True)
class Step:
    kind: str  # go | serve | pickup | deliver | wait_until | return
    point: Optional[Point] = None
    rid: Optional[int] = None
    until: Optional[float] = None

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.point is not None:
            out["point"] = self.point
        if self.rid is not None:
            out["rid"] = self.rid
        if self.until is not None:
            out["until"] = self.until
        return out


@dataclass(frozen=True)
class Schedule:
    """Per-server step lists; geometry and timing live in the instance."""

    servers: tuple[tuple[Step, ...], ...]

    def to_json(self) -> dict:
        return {"servers": [[s.to_json() for s in srv] for srv in self.servers]}

    @staticmethod
    def from_json(obj: dict) -> "Schedule":
        servers = []
        for raw_srv in obj.get("servers", []):
            steps = []
            for raw in raw_srv:
                steps.append(
                    Step(
                        kind=raw["kind"],
                        point=raw.get("point"),
                        rid=raw.get("rid"),
                        until=raw.get("until"),
                    )
                )
            servers.append(tuple(steps))
        return Schedule(tuple(servers))


@dataclass(frozen=True)
class EvalResult:
    makespan: float
    completions: dict[int, float]
    problems: tuple[str, ...]

    @property
    def feasible(self) -> bool:
        return not self.problems


def evaluate_schedule(instance: Instance, schedule: Schedule) -> EvalResult:
    """Simulate a schedule at unit speed and report its makespan.

    Waiting for a release is implicit: a ``serve``/``pickup`` that arrives
    early stalls until the request exists. Any structural problem (wrong
    point, delivery before pickup, unserved request, homing server not back
    at the depot) is reported rather than raised.
    """
    space = instance.space
    reqs = {r.rid: r for r in instance.requests}
    if len(schedule.servers) != instance.k:
        return EvalResult(math.inf, {}, (f"schedule has {len(schedule.servers)} servers, instance has {instance.k}",))
    problems: list[str] = []
    completions: dict[int, float] = {}
    picked_by: dict[int, int] = {}
    final_times = []
    final_positions = []
    for si, steps in enumerate(schedule.servers):
        t = 0.0
        pos: Point = space.origin
        for step in steps:
            if step.kind == "go":
                t += space.dist(pos, step.point)
                pos = step.point
            elif step.kind == "wait_until":
                t = max(t, step.until)
            elif step.kind == "return":
                t += space.dist(pos, space.origin)
                pos = space.origin
            elif step.kind in ("serve", "pickup", "deliver"):
                r = reqs.get(step.rid)
                if r is None:
                    problems.append(f"server {si}: unknown request {step.rid}")
                    continue
                if step.kind == "serve":
                    if instance.mode != "tsp":
                        problems.append(f"server {si}: 'serve' outside tsp mode")
                    if space.dist(pos, r.source) > EPS:
                        problems.append(f"server {si}: serve {r.rid} away from its source")
                    t = max(t, r.release)
                    completions[r.rid] = t
                elif step.kind == "pickup":
                    if space.dist(pos, r.source) > EPS:
                        problems.append(f"server {si}: pickup {r.rid} away from its source")
                    if r.rid in picked_by:
                        problems.append(f"request {r.rid} picked up twice")
                    t = max(t, r.release)
                    picked_by[r.rid] = si
                else:
                    if picked_by.get(step.rid) != si:
                        problems.append(f"server {si}: deliver {step.rid} without pickup")
                    if space.dist(pos, r.dest) > EPS:
                        problems.append(f"server {si}: deliver {r.rid} away from its destination")
                    completions[r.rid] = t
            else:
                problems.append(f"unknown step kind {step.kind!r}")
        final_times.append(t)
        final_positions.append(pos)
    for rid in reqs:
        if rid not in completions:
            problems.append(f"request {rid} never served")
    if instance.ending == "homing":
        for si, pos in enumerate(final_positions):
            if space.dist(pos, space.origin) > EPS:
                problems.append(f"server {si} does not end at the depot")
    if instance.mode == "darp":
        for rid in completions:
            if rid not in picked_by:
                problems.append(f"request {rid} delivered but never picked up")
    done = max(completions.values(), default=0.0)
    makespan = max([done, *final_times]) if instance.ending == "homing" else done
    return EvalResult(makespan, completions, tuple(problems))


@dataclass(frozen=True)
class OptResult:
    value: float
    schedule: Schedule
    chains: tuple[tuple[int, ...], ...]  # request ids per server, in visit order
    exact: bool


def _items(instance: Instance) -> list[Request]:
    return list(instance.sorted_requests())


def _entry_exit(instance: Instance, r: Request) -> tuple[Point, Point]:
    if instance.mode == "darp":
        return r.source, r.dest
    return r.source, r.source


def opt_exact(instance: Instance, caps: dict[int, int] | None = None) -> OptResult:
    """Exact minimum makespan over per-server visiting orders.

    Branch and bound in the kernel backend; sizes above the per-k cap raise
    ``CapExceeded``. The returned schedule replays to exactly ``value``.
    """
    caps = OPT_EXACT_CAPS if caps is None else caps
    cap = caps.get(instance.k, OPT_EXACT_CAP_DEFAULT)
    items = _items(instance)
    if len(items) > cap:
        raise CapExceeded(
            f"{len(items)} requests exceeds exact optimum cap {cap} for k={instance.k}"
        )
    space = instance.space
    entries = [_entry_exit(instance, r)[0] for r in items]
    exits = [_entry_exit(instance, r)[1] for r in items]
    enter, step, leave, inner = chain_arrays(
        space, entries, exits, space.origin, fold_inner=False, closed=True
    )
    release = [r.release for r in items]
    value, chains = _kernels.bb_min_makespan(
        instance.k, enter, step, leave, inner, release, instance.ending == "homing"
    )
    plan: list[tuple[Step, ...]] = []
    id_chains = []
    for srv in chains:
        steps: list[Step] = []
        for idx in srv:
            r = items[idx]
            if instance.mode == "darp":
                steps.append(Step("go", point=r.source))
                steps.append(Step("pickup", rid=r.rid))
                steps.append(Step("go", point=r.dest))
                steps.append(Step("deliver", rid=r.rid))
            else:
                steps.append(Step("go", point=r.source))
                steps.append(Step("serve", rid=r.rid))
        if instance.ending == "homing":
            steps.append(Step("return"))
        plan.append(tuple(steps))
        id_chains.append(tuple(items[idx].rid for idx in srv))
    schedule = Schedule(tuple(plan))
    check = evaluate_schedule(instance, schedule)
    if check.problems or abs(check.makespan - value) > EPS:
        raise AssertionError(
            f"optimum witness failed replay: {value} vs {check.makespan}, {check.problems}"
        )
    return OptResult(value, schedule, tuple(id_chains), exact=True)


def _mst_weight(space: Space, points: Sequence[Point]) -> float:
    """Prim weight over the anchor and the given points (a walk lower bound)."""
    pts = [space.origin, *points]
    n = len(pts)
    in_tree = [False] * n
    best = [math.inf] * n
    best[0] = 0.0
    total = 0.0
    for _ in range(n):
        u = min((i for i in range(n) if not in_tree[i]), key=lambda i: best[i])
        total += best[u]
        in_tree[u] = True
        for v in range(n):
            if not in_tree[v]:
                d = space.dist(pts[u], pts[v])
                if d < best[v]:
                    best[v] = d
    return total


@dataclass(frozen=True)
class LowerBound:
    value: float
    parts: dict[str, float] = field(default_factory=dict)


def opt_lower_bound(instance: Instance) -> LowerBound:
    """Certified lower bound on the offline optimum.

    Combines the latest release, a per-request reachability floor, the
    exact anchored tour (single server; min-max split for several) and, on
    a line with requests strictly on both sides of the depot, the
    both-ways sweep length. Every part is individually valid, so the max
    is too. Sizes beyond the exact caps fall back to a spanning-tree bound,
    which stays valid (unlike a heuristic tour, which would not be).
    """
    space = instance.space
    reqs = instance.sorted_requests()
    homing = instance.ending == "homing"
    parts: dict[str, float] = {"latest-release": max((r.release for r in reqs), default=0.0)}
    floor = 0.0
    for r in reqs:
        entry, exit_ = _entry_exit(instance, r)
        done = max(r.release, space.dist(space.origin, entry)) + space.dist(entry, exit_)
        if homing:
            done += space.dist(exit_, space.origin)
        floor = max(floor, done)
    parts["request-floor"] = floor
    if instance.k == 1:
        try:
            if instance.mode == "darp":
                pairs = [(r.source, r.dest) for r in reqs]
                t = pair_tour_exact(space, pairs, closed=homing)
            else:
                t = tsp_tour_exact(space, [r.source for r in reqs], closed=homing)
            parts["tour"] = t.length
        except CapExceeded:
            pts: list[Point] = []
            for r in reqs:
                e, x = _entry_exit(instance, r)
                pts.extend([e, x] if instance.mode == "darp" else [e])
            parts["spanning-tree"] = _mst_weight(space, sorted(set(pts)))
        if space.kind == "line" and reqs:
            coords = [
                c
                for r in reqs
                for c in ((r.source, r.dest) if instance.mode == "darp" else (r.source,))
            ]
            lo, hi = min(coords), max(coords)
            if lo < -EPS and hi > EPS:
                parts["line-span"] = (hi - lo) + min(-lo, hi)
    else:
        try:
            value, _ = opt_ktour_minmax(instance)
            parts["ktour"] = value
        except CapExceeded:
            pass
    return LowerBound(max(parts.values()), parts)


def _assignments(n: int, k: int):
    """Set partitions of n items into at most k groups, canonically ordered."""

    def rec(i: int, used: int, cur: list[int]):
        if i == n:
            yield tuple(cur)
            return
        for g in range(min(used + 1, k)):
            cur.append(g)
            yield from rec(i + 1, max(used, g + 1), cur)
            cur.pop()

    yield from rec(0, 0, [])


def opt_ktour_minmax(instance: Instance, cap: int = KTOUR_EXACT_CAP):
    """Exact min-max anchored tour split among k identical servers.

    Releases are ignored: this is the pure geometry bound. Returns
    ``(value, groups)`` with groups of request ids.
    """
    space = instance.space
    reqs = instance.sorted_requests()
    k = instance.k
    if instance.mode == "darp":
        items = [(r.source, r.dest) for r in reqs]
        ids = [r.rid for r in reqs]
    else:
        seen: dict[Point, int] = {}
        items = []
        ids = []
        for r in reqs:
            if r.source not in seen:
                seen[r.source] = r.rid
                items.append((r.source, r.source))
                ids.append(r.rid)
    if len(items) > cap:
        raise CapExceeded(f"{len(items)} items exceeds exact k-split cap {cap}")
    closed = instance.ending == "homing"

    cache: dict[tuple[int, ...], float] = {}

    def group_cost(idxs: tuple[int, ...]) -> float:
        if idxs in cache:
            return cache[idxs]
        sub = [items[i] for i in idxs]
        if instance.mode == "darp":
            t = pair_tour(space, sub, closed=closed, cap=len(sub))
        else:
            t = tsp_tour(space, [p for p, _ in sub], closed=closed, cap=len(sub))
        cache[idxs] = t.length
        return t.length

    best = math.inf
    best_groups: list[tuple[int, ...]] = [()] * k
    n = len(items)
    if n == 0:
        return 0.0, tuple(() for _ in range(k))
    for assign in _assignments(n, k):
        groups: list[list[int]] = [[] for _ in range(k)]
        for i, g in enumerate(assign):
            groups[g].append(i)
        worst = 0.0
        for g in groups:
            if g:
                worst = max(worst, group_cost(tuple(g)))
            if worst >= best:
                break
        if worst < best:
            best = worst
            best_groups = [tuple(ids[i] for i in g) for g in groups]
    return best, tuple(best_groups)


def save_schedule(schedule: Schedule, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(schedule.to_json(), fh, indent=2)
        fh.write("\n")


def load_schedule(path: str) -> Schedule:
    with open(path) as fh:
        return Schedule.from_json(json.load(fh))
