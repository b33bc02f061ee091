"""Online routing policies.

Every policy answers a release (or a stall) with replacement waypoint
lists, keyed by server index; servers not in the answer keep whatever
they were doing. Policies whose guarantee needs a small release radius
carry a dispatch switch: when the radius-dependent bound for the current
setting is worse than the best known radius-free constant they hand the
whole run to the replan baseline, and ``meta["branch"]`` records which
side ran.

Registry keys double as CLI names, see ``POLICIES``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .errors import LocalityViolation, SchemaViolation, SequentialityViolation
from .metric import EPS, Point
from .tours import Tour, pair_tour, tsp_tour

BOUND_TOL = 1e-6

# Best published radius-free competitive ratios, used only as dispatch
# cutoffs (the algorithms behind them are not reimplemented here; the
# replan baseline stands in whenever dispatch rejects the radius branch).
LIT_LINE_TSP = 2.04
LIT_ARB_TSP = 2.41
LIT_DARP = 2.457


class Policy:
    """Base class; subclasses override the hooks they need."""

    name = "policy"

    def __init__(self) -> None:
        self.meta: dict = {}

    def begin(self, view) -> None:
        pass

    def on_release(self, view) -> Optional[dict[int, list[Point]]]:
        return None

    def on_stall(self, view) -> Optional[dict[int, list[Point]]]:
        return None

    def on_idle(self, view, server: int) -> Optional[dict[int, list[Point]]]:
        return None


def _split_outstanding(view):
    """Outstanding work as (unpicked rid -> (src, dst), picked rid -> dst)."""
    unpicked: dict[int, tuple[Point, Point]] = {}
    picked: dict[int, Point] = {}
    for q in view.outstanding():
        if view.is_picked(q.rid):
            picked[q.rid] = q.dest
        else:
            unpicked[q.rid] = (q.source, q.dest)
    return unpicked, picked


def _dedupe(points: list[Point]) -> list[Point]:
    out: list[Point] = []
    for p in points:
        if not out or out[-1] != p:
            out.append(p)
    return out


def _remaining_tour(view, server: int, unpicked, picked):
    """Open tour over the remaining work of one server, from where it stands."""
    space = view.space
    anchor = view.positions[server]
    if view.mode == "tsp":
        pts = sorted(e for e, _ in unpicked.values())
        if not pts:
            return None
        return tsp_tour(space, pts, anchor=anchor, closed=False)
    items = [unpicked[r] for r in sorted(unpicked)]
    items += [(picked[r], picked[r]) for r in sorted(picked)]
    if not items:
        return None
    return pair_tour(space, items, anchor=anchor, closed=False)


def _walk_length(view, server: int, plan: list[Point]) -> float:
    if not plan:
        return 0.0
    space = view.space
    total = space.pos_dist(view.positions[server], plan[0])
    for a, b in zip(plan, plan[1:]):
        total += space.dist(a, b)
    return total


@dataclass(frozen=True)
class _Suffix:
    plan: list
    tour: Tour
    first: Point
    first_is_open_source: bool


def _origin_tour_suffix(view, requests) -> Optional[_Suffix]:
    """Prefix-skipped replay of the anchored tour over ``requests``.

    The tour is recomputed from the origin over everything given, served
    or not, and the plan rejoins it at the first stop that still has open
    work. Served stops past that point stay in as plain travel so the
    traversal matches the recomputed tour hop for hop.
    """
    space = view.space
    done = view.completions
    if view.mode == "tsp":
        by_point: dict[Point, list[int]] = {}
        for q in requests:
            by_point.setdefault(q.source, []).append(q.rid)
        if not by_point:
            return None
        tour = tsp_tour(space, sorted(by_point), anchor=space.origin, closed=False)
        stops = list(tour.stops)
        idx = next(
            (i for i, p in enumerate(stops) if any(r not in done for r in by_point[p])),
            None,
        )
        if idx is None:
            return None
        return _Suffix(_dedupe(stops[idx:]), tour, stops[idx], True)
    ordered = sorted(requests, key=lambda q: q.rid)
    if not ordered:
        return None
    pairs = [(q.source, q.dest) for q in ordered]
    tour = pair_tour(space, pairs, anchor=space.origin, closed=False)
    spare = list(ordered)
    rids: list[int] = []
    for stop in tour.stops:
        hit = next(q for q in spare if (q.source, q.dest) == tuple(stop))
        spare.remove(hit)
        rids.append(hit.rid)
    idx = next((i for i, r in enumerate(rids) if r not in done), None)
    if idx is None:
        return None
    plan = _dedupe([p for stop in list(tour.stops)[idx:] for p in stop])
    return _Suffix(plan, tour, tour.stops[idx][0], not view.is_picked(rids[idx]))


# --------------------------------------------------------------------------
# Line sweeps

def _sweep_waypoints(x: float, unpicked, picked, dirs: list[float]) -> list[float]:
    """Serve-everything waypoint list for one server on the line.

    Walks the given directions in turn, always to the nearest remaining
    service point ahead; pickups along the way add their drop-off into the
    working set, so a leg stretches when a drop-off lands past its extreme
    and anything left behind gets swept up by extra reversals at the end.
    """
    up = {r: unpicked[r] for r in unpicked}
    pk = {r: picked[r] for r in picked}
    plan: list[float] = []
    pos = x

    def targets() -> list[float]:
        return [e for e, _ in up.values()] + list(pk.values())

    def serve(p: float) -> None:
        for rid in sorted(up):
            e, d = up[rid]
            if abs(e - p) <= EPS:
                del up[rid]
                pk[rid] = d
        for rid in sorted(pk):
            if abs(pk[rid] - p) <= EPS:
                del pk[rid]

    def leg(direction: float) -> None:
        nonlocal pos
        while True:
            ahead = [p for p in targets() if (p - pos) * direction >= -EPS]
            if not ahead:
                return
            p = min(ahead, key=lambda v: (v - pos) * direction)
            if not plan or plan[-1] != p:
                plan.append(p)
            serve(p)
            pos = p

    for d0 in dirs:
        leg(d0)
    last = dirs[-1] if dirs else 1.0
    while targets():
        last = -last
        leg(last)
    return plan


def _extreme_dirs(x: float, points: list[float]) -> list[float]:
    lo, hi = min(points), max(points)
    if lo >= x - EPS:
        return [1.0]
    if hi <= x + EPS:
        return [-1.0]
    # Work on both sides: clear the nearer extreme first, then switch.
    return [-1.0, 1.0] if (x - lo) <= (hi - x) else [1.0, -1.0]


# --------------------------------------------------------------------------
# Dispatch plumbing

class _Dispatched(Policy):
    """Radius-branch policy with a baseline fallback chosen once at begin."""

    def __init__(self) -> None:
        super().__init__()
        self._impl: Optional[Policy] = None

    def _accepts(self, view) -> bool:
        raise NotImplementedError

    def _check_setting(self, view) -> None:
        pass

    def begin(self, view) -> None:
        self._check_setting(view)
        if self._accepts(view):
            self.meta["branch"] = "radius"
            self._impl = None
        else:
            self.meta["branch"] = "fallback"
            self._impl = ReplanBaseline()
            self._impl.begin(view)

    def on_release(self, view):
        if self._impl is not None:
            return self._impl.on_release(view)
        return self._plan(view)

    def on_stall(self, view):
        if self._impl is not None:
            return self._impl.on_stall(view)
        return self._plan(view)

    def _plan(self, view):
        raise NotImplementedError


def _delta(view) -> float:
    return view.locality / view.space.diameter


# --------------------------------------------------------------------------
# Policies

class SeqGreedy(Policy):
    """Drive straight at the one open request of a sequential stream."""

    name = "seq-greedy"

    def begin(self, view) -> None:
        if view.k != 1:
            raise SchemaViolation("seq-greedy drives a single server")
        if view.arrival != "sequential":
            raise SchemaViolation("seq-greedy expects a sequential stream")

    def on_release(self, view):
        open_reqs = view.outstanding()
        if len(open_reqs) > 1:
            rids = [q.rid for q in open_reqs]
            raise SequentialityViolation(
                f"requests {rids} are open together in a sequential stream"
            )
        if not open_reqs:
            return None
        q = open_reqs[0]
        if view.mode == "darp" and not view.is_picked(q.rid):
            plan = [q.source] + ([q.dest] if q.dest != q.source else [])
        elif view.mode == "darp":
            plan = [q.dest]
        else:
            plan = [q.source]
        return {0: plan}

    on_stall = on_release


class ReplanBaseline(Policy):
    """Re-solve the remaining work from scratch at every release.

    Tour replanning anchored at the servers' current positions, with no
    use of the release radius. With several servers the outstanding work
    is split to minimize the longest tour: exhaustively while the split
    count stays small, greedily in arrival order beyond that; in-flight
    drop-offs always stay with their carrier. This is both a control arm
    for experiments and the fallback branch of the dispatched policies.
    """

    name = "replan-baseline"

    EXACT_SPLITS = 256

    def on_release(self, view):
        unpicked, picked = _split_outstanding(view)
        if view.k == 1:
            tour = _remaining_tour(view, 0, unpicked, picked)
            if tour is None:
                return None
            return {0: _dedupe(tour.visits())}
        held: dict[int, dict[int, Point]] = {s: {} for s in range(view.k)}
        for rid, dest in picked.items():
            held[view.picked_server(rid)][rid] = dest
        groups = self._partition(view, sorted(unpicked), unpicked, held)
        plans = {}
        for s in range(view.k):
            up = {r: unpicked[r] for r in groups[s]}
            tour = _remaining_tour(view, s, up, held[s])
            plans[s] = [] if tour is None else _dedupe(tour.visits())
        return plans

    on_stall = on_release

    def _partition(self, view, rids, unpicked, held):
        k = view.k
        lengths: dict[tuple[int, tuple[int, ...]], float] = {}

        def length(s: int, group: tuple[int, ...]) -> float:
            got = lengths.get((s, group))
            if got is None:
                up = {r: unpicked[r] for r in group}
                tour = _remaining_tour(view, s, up, held[s])
                got = 0.0 if tour is None else tour.length
                lengths[(s, group)] = got
            return got

        if k ** len(rids) <= self.EXACT_SPLITS:
            best, best_groups = None, None
            for shape in itertools.product(range(k), repeat=len(rids)):
                groups = [tuple(r for r, s in zip(rids, shape) if s == j)
                          for j in range(k)]
                worst = max(length(j, groups[j]) for j in range(k))
                if best is None or worst < best - EPS:
                    best, best_groups = worst, groups
            return best_groups
        groups = [[] for _ in range(k)]
        for rid in rids:
            s = min(range(k),
                    key=lambda j: (length(j, tuple(groups[j] + [rid])), j))
            groups[s].append(rid)
        return [tuple(g) for g in groups]


class LineSwitch(_Dispatched):
    """Extreme-to-extreme sweeps on the line, nearer extreme first.

    At each release the server aims for the extremes of the outstanding
    service points; when work sits on both sides it clears the nearer side
    before switching. Guarantee requires the release radius, so dispatch
    compares 1 + (1 + delta)/(1 + beta) against the radius-free constant.
    """

    name = "line-switch"

    def _check_setting(self, view) -> None:
        if view.space.kind != "line":
            raise SchemaViolation("line-switch needs a line space")
        if view.k != 1:
            raise SchemaViolation("line-switch drives a single server")

    def _accepts(self, view) -> bool:
        beta = view.space.min_side_ratio
        bound = 1.0 + (1.0 + _delta(view)) / (1.0 + beta)
        lit = LIT_LINE_TSP if view.mode == "tsp" else LIT_DARP
        self.meta["radius_bound"] = bound
        return bound <= lit + 1e-12

    def _plan(self, view):
        unpicked, picked = _split_outstanding(view)
        pts = [e for e, _ in unpicked.values()] + list(picked.values())
        if not pts:
            return None
        x = view.positions[0]
        return {0: _sweep_waypoints(x, unpicked, picked, _extreme_dirs(x, pts))}


class LineSweepAlt(Policy):
    """Momentum variant of the line sweep: keep direction until exhausted.

    Unlike the switch rule it never turns around for a release behind it;
    the current heading is held while any work remains ahead. No bound is
    claimed, it exists for head-to-head comparison runs.
    """

    name = "line-sweep-alt"

    def __init__(self) -> None:
        super().__init__()
        self._dir = 0.0

    def begin(self, view) -> None:
        if view.space.kind != "line":
            raise SchemaViolation("line-sweep-alt needs a line space")
        if view.k != 1:
            raise SchemaViolation("line-sweep-alt drives a single server")
        self._dir = 0.0

    def _plan(self, view):
        unpicked, picked = _split_outstanding(view)
        pts = [e for e, _ in unpicked.values()] + list(picked.values())
        if not pts:
            return None
        x = view.positions[0]
        if self._dir == 0.0:
            nearest = min(pts, key=lambda p: (abs(p - x), p))
            self._dir = 1.0 if nearest >= x else -1.0
        d0 = self._dir
        if not any((p - x) * d0 >= -EPS for p in pts):
            d0 = -d0
        plan = _sweep_waypoints(x, unpicked, picked, [d0, -d0])
        for a, b in zip(plan, plan[1:]):
            if b != a:
                d0 = 1.0 if b > a else -1.0
        self._dir = d0
        return {0: plan}

    on_release = _plan
    on_stall = _plan


class ArbitraryReplan(_Dispatched):
    """Replan over everything seen so far, rejoining the tour mid-course.

    Every release recomputes the origin-anchored tour over all requests
    arrived to date, served ones included, and the server hops onto that
    tour at its first stop with open work, skipping the served prefix.
    While tours stay exact two invariants are enforced and logged: the
    hop onto a first stop that is a waiting source must fit in the
    release radius (violation means the stream broke its promise), and in
    pickup-only mode the replayed plan may exceed the from-origin tour by
    at most the radius.
    """

    name = "arbitrary-replan"

    def _check_setting(self, view) -> None:
        if view.k != 1:
            raise SchemaViolation("arbitrary-replan drives a single server")

    def _accepts(self, view) -> bool:
        delta = _delta(view)
        self.meta["radius_bound"] = 2.0 + delta
        lit = LIT_ARB_TSP if view.mode == "tsp" else LIT_DARP
        return 2.0 + delta <= lit + 1e-12

    def _plan(self, view):
        got = _origin_tour_suffix(view, view.arrived())
        if got is None:
            return None
        if not got.tour.exact:
            self.meta["unchecked_replans"] = self.meta.get("unchecked_replans", 0) + 1
            return {0: got.plan}
        self.meta["checked_replans"] = self.meta.get("checked_replans", 0) + 1
        if got.first_is_open_source:
            gap = view.pos_dist(view.positions[0], got.first)
            self.meta["first_hop_max"] = max(self.meta.get("first_hop_max", 0.0), gap)
            if gap > view.locality + BOUND_TOL:
                raise LocalityViolation(
                    f"first open stop {got.first!r} lies {gap} from the server, "
                    f"radius {view.locality}"
                )
        if view.mode == "tsp":
            excess = _walk_length(view, 0, got.plan) - got.tour.length
            self.meta["plan_excess_max"] = max(
                self.meta.get("plan_excess_max", 0.0), excess
            )
        return {0: got.plan}


class MultiLine(_Dispatched):
    """Two-sided ownership on the line for several servers, pickups only.

    Server 0 owns sources left of the origin, server 1 the rest; each
    owner sweeps its own half with the switch rule. Dispatch compares
    2 + delta/gamma with the radius-free constant.
    """

    name = "multi-line"

    def _check_setting(self, view) -> None:
        if view.space.kind != "line":
            raise SchemaViolation("multi-line needs a line space")
        if view.mode != "tsp":
            raise SchemaViolation("multi-line handles pickups only")
        if view.k < 2:
            raise SchemaViolation("multi-line needs at least two servers")

    def _accepts(self, view) -> bool:
        gamma = view.space.max_side_ratio
        bound = 2.0 + _delta(view) / gamma
        self.meta["radius_bound"] = bound
        return bound <= LIT_LINE_TSP + 1e-12

    def _plan(self, view):
        groups: dict[int, dict[int, tuple[Point, Point]]] = {0: {}, 1: {}}
        for q in view.outstanding():
            owner = 0 if q.source < 0 else 1
            groups[owner][q.rid] = (q.source, q.source)
        plans = {}
        for owner, up in groups.items():
            if not up:
                continue
            x = view.positions[owner]
            pts = [e for e, _ in up.values()]
            plans[owner] = _sweep_waypoints(x, up, {}, _extreme_dirs(x, pts))
        return plans or None


class MultiArbitrary(_Dispatched):
    """Nearest-server assignment with per-server tour replays.

    A request belongs to whichever server stood closest when it appeared
    and keeps that owner; at every release each server recomputes the
    origin-anchored tour over everything ever bound to it and rejoins it
    past the served prefix, like the single-server replay. A request
    grabbed in passing by another server rides with the grabber until
    dropped off. Radius gaps are counted in meta rather than raised,
    since with several servers the radius only promises that some server
    is close.
    """

    name = "multi-arbitrary"

    def __init__(self) -> None:
        super().__init__()
        self._owner: dict[int, int] = {}

    def _check_setting(self, view) -> None:
        if view.k < 2:
            raise SchemaViolation("multi-arbitrary needs at least two servers")
        self._owner = {}

    def _accepts(self, view) -> bool:
        bound = 2.0 * (1.0 + _delta(view))
        self.meta["radius_bound"] = bound
        lit = LIT_ARB_TSP if view.mode == "tsp" else LIT_DARP
        return bound <= lit + 1e-12

    def _bind_new(self, view) -> None:
        space = view.space
        for q in view.arrived():
            if q.rid in self._owner:
                continue
            gaps = [space.pos_dist(view.positions[s], q.source) for s in range(view.k)]
            owner = min(range(view.k), key=lambda s: (gaps[s], s))
            self._owner[q.rid] = owner
            if gaps[owner] > view.locality + BOUND_TOL:
                self.meta["owner_gap_count"] = self.meta.get("owner_gap_count", 0) + 1
                self.meta["owner_gap_max"] = max(
                    self.meta.get("owner_gap_max", 0.0), gaps[owner]
                )

    def _plan(self, view):
        self._bind_new(view)
        mine: dict[int, list] = {s: [] for s in range(view.k)}
        for q in view.arrived():
            holder = view.picked_server(q.rid)
            if holder is not None and q.rid not in view.completions:
                mine[holder].append(q)  # in-flight work rides with its carrier
            else:
                mine[self._owner[q.rid]].append(q)
        plans = {}
        for s in range(view.k):
            got = _origin_tour_suffix(view, mine[s])
            if got is None:
                plans[s] = []
                continue
            plans[s] = got.plan
            if got.tour.exact and got.first_is_open_source:
                near = min(
                    view.pos_dist(view.positions[i], got.first)
                    for i in range(view.k)
                )
                self.meta["near_gap_max"] = max(
                    self.meta.get("near_gap_max", 0.0), near
                )
                self.meta["own_gap_max"] = max(
                    self.meta.get("own_gap_max", 0.0),
                    view.pos_dist(view.positions[s], got.first),
                )
        return plans


POLICIES = {
    "seq-greedy": SeqGreedy,
    "line-switch": LineSwitch,
    "line-sweep-alt": LineSweepAlt,
    "arbitrary-replan": ArbitraryReplan,
    "multi-line": MultiLine,
    "multi-arbitrary": MultiArbitrary,
    "replan-baseline": ReplanBaseline,
}


def make_policy(name: str) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        known = ", ".join(sorted(POLICIES))
        raise SchemaViolation(f"unknown policy {name!r} (known: {known})") from None
    return cls()
