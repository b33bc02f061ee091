"""Event-driven simulation of online policies against request streams.

Time is continuous; the only events are request releases (from the stream
oracle), waypoint arrivals of servers following their plans, and the final
wind-down. Policies see state exactly at release instants (plus an optional
stall hook) and answer with replacement waypoint lists per server; servers
drive at unit speed and serve whatever is eligible at a waypoint the moment
they stand on it. Simultaneous events process releases first, then waypoint
arrivals by ascending server index; released batches are ordered by request
id. Everything is deterministic, so a fixed instance replays to an
identical trace, byte for byte.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import (
    MissingPosition,
    NontermGuard,
    ParseError,
    PolicyStalled,
    SchemaViolation,
)
from .metric import EPS, EdgePos, Point, Position, Space, space_from_json
from .model import (
    Instance,
    Request,
    StreamSetup,
    check_sequential,
    check_spatial_locality,
    setup_from_instance,
)

EVENT_KINDS = ("release", "replan", "arrive", "pickup", "delivery", "idle", "finish")


@dataclass(frozen=True)
class TraceEvent:
    t: float
    kind: str
    server: Optional[int] = None
    rid: Optional[int] = None
    pos: Optional[Position] = None


@dataclass
class Trace:
    instance: Instance  # stream realized into concrete requests
    policy: str
    events: list[TraceEvent]
    motions: list[list[tuple[float, Position]]]
    completions: dict[int, float]
    pickups: dict[int, tuple[float, int]]
    makespan: float
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return max((bps[-1][0] for bps in self.motions if bps), default=0.0)

    def position_at(self, server: int, t: float) -> Position:
        """Server position at any time in ``[0, horizon]``."""
        bps = self.motions[server]
        if t < -EPS or t > self.horizon + EPS:
            raise MissingPosition(f"t={t} outside recorded range [0, {self.horizon}]")
        times = [b[0] for b in bps]
        i = bisect_right(times, t)
        if i == 0:
            return bps[0][1]
        if i == len(bps):
            return bps[-1][1]
        t0, p = bps[i - 1]
        t1, q = bps[i]
        if t1 - t0 <= EPS or _same_pos(p, q):
            return p
        frac_t = t - t0
        return _interpolate(self.instance.space, p, q, frac_t, t1 - t0)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "schema": 1,
                    "policy": self.policy,
                    "instance": self.instance.to_json(),
                    "meta": self.meta,
                },
                sort_keys=True,
            )
        ]
        for ev in self.events:
            rec: dict = {"t": ev.t, "kind": ev.kind}
            if ev.server is not None:
                rec["server"] = ev.server
            if ev.rid is not None:
                rec["rid"] = ev.rid
            if ev.pos is not None:
                rec["pos"] = _pos_json(ev.pos)
            lines.append(json.dumps(rec, sort_keys=True))
        for s, bps in enumerate(self.motions):
            lines.append(
                json.dumps(
                    {"motion": s, "points": [[t, _pos_json(p)] for t, p in bps]},
                    sort_keys=True,
                )
            )
        lines.append(json.dumps({"makespan": self.makespan}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def _pos_json(p: Position):
    if isinstance(p, EdgePos):
        return {"a": p.a, "b": p.b, "off": p.offset}
    return p


def _pos_from_json(v) -> Position:
    if isinstance(v, dict):
        return EdgePos(v["a"], v["b"], v["off"])
    return v


def trace_from_jsonl(text: str) -> Trace:
    from .model import instance_from_json

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty trace")
    try:
        head = json.loads(lines[0])
        instance = instance_from_json(head["instance"])
        events: list[TraceEvent] = []
        motions: list[list[tuple[float, Position]]] = [[] for _ in range(instance.k)]
        makespan = 0.0
        for ln in lines[1:]:
            rec = json.loads(ln)
            if "makespan" in rec:
                makespan = rec["makespan"]
            elif "motion" in rec:
                motions[rec["motion"]] = [(t, _pos_from_json(p)) for t, p in rec["points"]]
            else:
                events.append(
                    TraceEvent(
                        rec["t"],
                        rec["kind"],
                        rec.get("server"),
                        rec.get("rid"),
                        _pos_from_json(rec.get("pos")) if "pos" in rec else None,
                    )
                )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed trace: {exc}") from None
    completions: dict[int, float] = {}
    pickups: dict[int, tuple[float, int]] = {}
    for ev in events:
        if ev.kind == "pickup":
            pickups[ev.rid] = (ev.t, ev.server)
        elif ev.kind == "delivery":
            completions[ev.rid] = ev.t
    return Trace(instance, head.get("policy", "?"), events, motions, completions,
                 pickups, makespan, head.get("meta", {}))


def load_trace(path: str) -> Trace:
    with open(path) as fh:
        return trace_from_jsonl(fh.read())


def _same_pos(p: Position, q: Position) -> bool:
    return p == q


def _interpolate(space: Space, p: Position, q: Position, dt: float, leg: float) -> Position:
    if space.kind == "line":
        return p + (q - p) * (dt / leg)
    # General space: consecutive breakpoints always share one virtual edge.
    if isinstance(p, EdgePos):
        if isinstance(q, EdgePos):
            return EdgePos(p.a, p.b, p.offset + (q.offset - p.offset) * (dt / leg))
        if q == p.a:
            return EdgePos(p.a, p.b, p.offset - dt)
        return EdgePos(p.a, p.b, p.offset + dt)
    if isinstance(q, EdgePos):
        if p == q.a:
            return EdgePos(q.a, q.b, dt)
        return EdgePos(q.a, q.b, space.dist(q.a, q.b) - dt)
    if p == q:
        return p
    return EdgePos(p, q, dt)


class SimView:
    """Read-only window onto live simulation state for policies and oracles."""

    def __init__(self, runner: "_Runner"):
        self._r = runner

    @property
    def time(self) -> float:
        return self._r.t

    @property
    def space(self) -> Space:
        return self._r.space

    @property
    def mode(self) -> str:
        return self._r.setup.mode

    @property
    def ending(self) -> str:
        return self._r.setup.ending

    @property
    def k(self) -> int:
        return self._r.k

    @property
    def locality(self) -> float:
        return self._r.setup.locality

    @property
    def arrival(self) -> str:
        return self._r.setup.arrival

    @property
    def positions(self) -> tuple[Position, ...]:
        return tuple(self._r.pos)

    @property
    def completions(self) -> dict[int, float]:
        return self._r.completions

    def outstanding(self) -> tuple[Request, ...]:
        return tuple(
            r for r in self._r.arrived_order if r.rid not in self._r.completions
        )

    def arrived(self) -> tuple[Request, ...]:
        return tuple(self._r.arrived_order)

    def picked_server(self, rid: int) -> Optional[int]:
        got = self._r.picked_by.get(rid)
        return got

    def is_picked(self, rid: int) -> bool:
        return rid in self._r.picked_by

    def pos_dist(self, pos: Position, point: Point) -> float:
        return self._r.space.pos_dist(pos, point)


class _Runner:
    def __init__(self, setup: StreamSetup, policy, guard_factor: float):
        self.setup = setup
        self.space = setup.space
        self.k = setup.k
        self.policy = policy
        self.guard_factor = guard_factor
        self.t = 0.0
        origin = self.space.origin
        self.pos: list[Position] = [origin] * self.k
        self.plans: list[list[Point]] = [[] for _ in range(self.k)]
        self.arrived_order: list[Request] = []
        self.by_rid: dict[int, Request] = {}
        self.picked_by: dict[int, int] = {}
        self.completions: dict[int, float] = {}
        self.pickup_times: dict[int, tuple[float, int]] = {}
        self.events: list[TraceEvent] = []
        self.motions: list[list[tuple[float, Position]]] = [
            [(0.0, origin)] for _ in range(self.k)
        ]
        self.meta: dict = {}
        self._winddown = False

    # -- bookkeeping

    def _breakpoint(self, s: int) -> None:
        bp = (self.t, self.pos[s])
        if self.motions[s][-1] != bp:
            self.motions[s].append(bp)

    def _event(self, kind: str, server=None, rid=None, pos=None) -> None:
        self.events.append(TraceEvent(self.t, kind, server, rid, pos))

    def outstanding_rids(self):
        return [r.rid for r in self.arrived_order if r.rid not in self.completions]

    # -- motion

    def _resolve_first_hop(self, s: int, waypoints: list[Point]) -> list[Point]:
        """Mid-edge servers reach the first waypoint via the cheaper edge end."""
        p = self.pos[s]
        if not waypoints or not isinstance(p, EdgePos):
            return list(waypoints)
        space = self.space
        w = waypoints[0]
        span = space.dist(p.a, p.b)
        via_a = p.offset + space.dist(p.a, w)
        via_b = (span - p.offset) + space.dist(p.b, w)
        gate = p.a if via_a <= via_b else p.b
        if gate == w:
            return list(waypoints)
        return [gate, *waypoints]

    def set_plan(self, s: int, waypoints: Sequence[Point]) -> None:
        for w in waypoints:
            if not self.space.contains(w):
                raise SchemaViolation(f"policy waypoint {w!r} outside the space")
        self._breakpoint(s)
        self.plans[s] = self._resolve_first_hop(s, list(waypoints))

    def next_arrival(self) -> tuple[Optional[float], Optional[int]]:
        best_t, best_s = None, None
        for s in range(self.k):
            if not self.plans[s]:
                continue
            ta = self.t + self.space.pos_dist(self.pos[s], self.plans[s][0])
            if best_t is None or ta < best_t - 0.0:
                if best_t is None or ta < best_t:
                    best_t, best_s = ta, s
        return best_t, best_s

    def advance_to(self, T: float) -> None:
        dt = T - self.t
        if dt < -EPS:
            raise NontermGuard(f"time moved backwards: {self.t} -> {T}")
        if dt <= 0:
            self.t = max(self.t, T)
            return
        space = self.space
        for s in range(self.k):
            if not self.plans[s]:
                continue
            w = self.plans[s][0]
            p = self.pos[s]
            d = space.pos_dist(p, w)
            step = min(dt, d)
            if step <= 0:
                continue
            if abs(step - d) <= EPS:
                self.pos[s] = w
            elif space.kind == "line":
                self.pos[s] = p + step if w > p else p - step
            elif isinstance(p, EdgePos):
                span = space.dist(p.a, p.b)
                via_a = p.offset + space.dist(p.a, w)
                via_b = (span - p.offset) + space.dist(p.b, w)
                if via_a <= via_b:
                    self.pos[s] = EdgePos(p.a, p.b, p.offset - step)
                else:
                    self.pos[s] = EdgePos(p.a, p.b, p.offset + step)
            else:
                self.pos[s] = EdgePos(p, w, step)
        self.t = T


def run(setup, policy, *, guard_factor: float = 10.0) -> Trace:
    """Simulate ``policy`` against ``setup`` and return the full trace.

    ``setup`` is an ``Instance`` (replayed as-is) or a ``StreamSetup`` with
    a live oracle. The trace embeds the realized concrete instance.
    """
    if isinstance(setup, Instance):
        setup.validate()
        setup = setup_from_instance(setup)
    r = _Runner(setup, policy, guard_factor)
    view = SimView(r)
    oracle = setup.oracle
    policy.begin(view)
    oracle.begin(view)
    space, k = r.space, r.k
    origin = space.origin
    homing = setup.ending == "homing"

    max_events = 200 + 60 * (k + 2)  # grows with each release below
    time_guard = guard_factor * (space.diameter + setup.locality + 1.0)

    def apply_plans(newplans) -> None:
        if not newplans:
            return
        for s in sorted(newplans):
            wps = newplans[s]
            if wps is None:
                continue
            r.set_plan(s, wps)

    while True:
        if len(r.events) > max_events:
            raise NontermGuard(f"event budget exceeded ({len(r.events)} events)")
        if r.t > time_guard:
            raise NontermGuard(f"time budget exceeded (t={r.t})")

        exhausted = oracle.exhausted(view)
        nr = None if exhausted else oracle.next_time(view)
        na, ns = r.next_arrival()

        if nr is None and na is None:
            open_rids = r.outstanding_rids()
            if open_rids:
                stall = r.policy.on_stall(view)
                if stall and any(stall.get(s) for s in stall):
                    apply_plans(stall)
                    continue
                raise PolicyStalled(f"requests {open_rids} left with no plan")
            if not exhausted:
                raise NontermGuard("oracle pending while the fleet is idle with no work")
            if homing and any(space.pos_dist(r.pos[s], origin) > EPS for s in range(k)):
                for s in range(k):
                    if space.pos_dist(r.pos[s], origin) > EPS:
                        r.set_plan(s, [origin])
                continue
            break

        if nr is not None and (na is None or nr <= na + EPS):
            if nr < r.t - EPS:
                raise NontermGuard(f"oracle scheduled a release in the past ({nr} < {r.t})")
            r.advance_to(max(nr, r.t))
            batch = sorted(oracle.emit(view), key=lambda q: q.rid)
            if not batch:
                continue
            for q in batch:
                if q.rid in r.by_rid:
                    raise SchemaViolation(f"duplicate request id {q.rid} from oracle")
                if not space.contains(q.source) or not space.contains(q.dest):
                    raise SchemaViolation(f"request {q.rid} outside the space")
                if setup.mode == "tsp" and q.dest != q.source:
                    raise SchemaViolation(f"request {q.rid} has a destination in tsp mode")
                r.by_rid[q.rid] = q
                r.arrived_order.append(q)
                r._event("release", rid=q.rid, pos=q.source)
            m = len(r.arrived_order)
            max_events = 200 + 60 * (k + 2) + 40 * m * (k + 2) + 4 * m * m
            time_guard = guard_factor * (
                max(q.release for q in r.arrived_order)
                + (m + 2) * (space.diameter + 1.0)
                + setup.locality
                + 1.0
            )
            apply_plans(r.policy.on_release(view))
            r._event("replan")
            continue

        # waypoint arrival
        r.advance_to(na)
        s = ns
        w = r.plans[s].pop(0)
        r.pos[s] = w
        r._breakpoint(s)
        r._event("arrive", server=s, pos=w)
        darp = setup.mode == "darp"
        for q in list(r.arrived_order):
            if q.rid in r.completions:
                continue
            at_source = space.dist(q.source, w) <= EPS if not isinstance(w, EdgePos) else False
            if at_source and q.rid not in r.picked_by:
                r.picked_by[q.rid] = s
                r.pickup_times[q.rid] = (r.t, s)
                r._event("pickup", server=s, rid=q.rid, pos=w)
                if not darp:
                    r.completions[q.rid] = r.t
                    r._event("delivery", server=s, rid=q.rid, pos=w)
        if darp:
            for q in list(r.arrived_order):
                if q.rid in r.completions or r.picked_by.get(q.rid) != s:
                    continue
                if space.dist(q.dest, w) <= EPS:
                    r.completions[q.rid] = r.t
                    r._event("delivery", server=s, rid=q.rid, pos=w)
        if oracle.exhausted(view) and not r.outstanding_rids():
            for s2 in range(k):
                if r.plans[s2]:
                    r.plans[s2] = []
                    r._breakpoint(s2)
        if not r.plans[s] and (r.outstanding_rids() or not oracle.exhausted(view)):
            r._event("idle", server=s, pos=w)
            apply_plans(r.policy.on_idle(view, s))

    if homing:
        makespan = max((bps[-1][0] for bps in r.motions), default=0.0)
        makespan = max(makespan, max(r.completions.values(), default=0.0))
    else:
        makespan = max(r.completions.values(), default=0.0)
    for s in range(k):
        r._breakpoint(s)
        r._event("finish", server=s, pos=r.pos[s])

    realized = Instance(
        space=space,
        mode=setup.mode,
        ending=setup.ending,
        k=k,
        locality=setup.locality,
        arrival=setup.arrival,
        requests=tuple(sorted(r.arrived_order, key=lambda q: (q.release, q.rid))),
    )
    meta = dict(r.meta)
    meta.update(getattr(policy, "meta", {}))
    return Trace(
        instance=realized,
        policy=getattr(policy, "name", type(policy).__name__),
        events=r.events,
        motions=r.motions,
        completions=dict(r.completions),
        pickups=dict(r.pickup_times),
        makespan=makespan,
        meta=meta,
    )


# --------------------------------------------------------------------------
# Trace audit

@dataclass(frozen=True)
class AuditReport:
    ok: bool
    checks: tuple[tuple[str, bool, str], ...]

    def failed(self) -> list[str]:
        return [name for name, ok, _ in self.checks if not ok]


def audit(trace: Trace) -> AuditReport:
    """Recompute every hard invariant of a finished run from its trace."""
    inst = trace.instance
    space = inst.space
    checks: list[tuple[str, bool, str]] = []

    def add(name: str, ok: bool, detail: str = "") -> None:
        checks.append((name, ok, detail))

    ts = [ev.t for ev in trace.events]
    add("times-monotone", all(a <= b + EPS for a, b in zip(ts, ts[1:])), "")

    speed_ok, speed_detail = True, ""
    for s, bps in enumerate(trace.motions):
        for (t0, p), (t1, q) in zip(bps, bps[1:]):
            if t1 < t0 - EPS:
                speed_ok, speed_detail = False, f"server {s}: time reversal at {t1}"
                break
            moved = space.pos_pair_dist(p, q)
            if moved > (t1 - t0) + 1e-7:
                speed_ok = False
                speed_detail = f"server {s}: moved {moved} in {t1 - t0}"
                break
        if not speed_ok:
            break
    add("speed-law", speed_ok, speed_detail)

    reqs = {q.rid: q for q in inst.requests}
    early = [
        rid
        for rid, (tp, _) in trace.pickups.items()
        if rid in reqs and tp < reqs[rid].release - EPS
    ]
    add("never-early", not early, f"early pickups: {early}" if early else "")

    prec_ok, prec_detail = True, ""
    for rid, done in trace.completions.items():
        got = trace.pickups.get(rid)
        if got is None:
            prec_ok, prec_detail = False, f"request {rid} delivered without pickup"
            break
        if done < got[0] - EPS:
            prec_ok, prec_detail = False, f"request {rid} delivered before pickup"
            break
    add("pickup-before-delivery", prec_ok, prec_detail)

    unserved = sorted(set(reqs) - set(trace.completions))
    add("completeness", not unserved, f"unserved: {unserved}" if unserved else "")

    expect = (
        max(trace.completions.values(), default=0.0)
        if inst.ending == "nomadic"
        else max(
            [max(trace.completions.values(), default=0.0)]
            + [bps[-1][0] for bps in trace.motions if bps]
        )
    )
    add("makespan-consistent", abs(expect - trace.makespan) <= EPS, f"{expect} vs {trace.makespan}")

    try:
        loc = check_spatial_locality(inst, trace)
        add(
            "release-radius",
            loc.ok,
            "" if loc.ok else f"violations {loc.violations}",
        )
    except MissingPosition as exc:
        add("release-radius", False, str(exc))

    if inst.arrival == "sequential":
        add("sequential-arrivals", check_sequential(inst, trace), "")

    n_rel = sum(1 for ev in trace.events if ev.kind == "release")
    n_pick = sum(1 for ev in trace.events if ev.kind == "pickup")
    n_del = sum(1 for ev in trace.events if ev.kind == "delivery")
    m = len(reqs)
    add(
        "conservation",
        n_rel == m and n_pick == m and n_del == m,
        f"releases {n_rel}, pickups {n_pick}, deliveries {n_del}, m {m}",
    )

    n_replan = sum(1 for ev in trace.events if ev.kind == "replan")
    budget = 2 * m + 2 + 2 * inst.k
    add("replan-budget", n_replan <= budget, f"{n_replan} replans, budget {budget}")

    if inst.ending == "homing":
        away = [
            s
            for s, bps in enumerate(trace.motions)
            if bps and space.pos_dist(bps[-1][1], space.origin) > EPS
        ]
        add("homing-at-depot", not away, f"servers away: {away}" if away else "")

    return AuditReport(all(ok for _, ok, _ in checks), tuple(checks))
