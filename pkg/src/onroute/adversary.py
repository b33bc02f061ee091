"""Hard and premise-tight request streams.

Two families live here. The hub stream is the classic worst case for
replanning servers: a hub with equidistant tips, one early batch, then a
drip of repeats at whichever tip was served last, which keeps pulling the
server back while the rest of the work waits. The chase families exist
for measurement: they place every release just inside the radius of a
moving server, so the realized instances actually contain the structure
(full segment span, a source at the far end of the space, a late final
release) that the per-setting guarantees are priced against. Random
streams rarely produce that structure, and ratios measured on them say
little.
"""

from __future__ import annotations

import math
from random import Random
from typing import Optional, Sequence

from .errors import SchemaViolation
from .metric import EPS, GeneralSpace, LineSpace, euclidean_space
from .model import (FixedOracle, Request, RequestOracle, SequentialOracle,
                    StreamSetup)
from .offline import Schedule, Step

RAIL_STEP = 0.85  # rung spacing as a fraction of the release radius
CLUSTER_SPREAD = 0.1


# --------------------------------------------------------------------------
# Hub-and-tips stream

def star_space(n_tips: int, spoke: float) -> GeneralSpace:
    """Hub at index 0, ``n_tips`` tips all ``spoke`` away from it."""
    n = n_tips + 1
    mat = [[0.0 if i == j else (2.0 * spoke) for j in range(n)] for i in range(n)]
    for i in range(1, n):
        mat[0][i] = mat[i][0] = float(spoke)
    return GeneralSpace(mat, origin=0)


class StarOracle(RequestOracle):
    """One request per tip at ``spoke**2``, then repeats behind the server.

    Every ``2 * spoke`` a fresh request lands on the tip served most
    recently (before anything is served: the tip with the least open
    work), ``n_tips`` times in total. Tip count must be a multiple of the
    spoke length so the drip ends exactly on the last repeat.
    """

    def __init__(self, n_tips: int, spoke: int):
        if n_tips < 1:
            raise SchemaViolation("need at least one tip")
        if int(spoke) != spoke or spoke < 1:
            raise SchemaViolation("spoke length must be a positive integer")
        if n_tips % int(spoke):
            raise SchemaViolation("tip count must be a multiple of the spoke length")
        self.n = n_tips
        self.spoke = float(spoke)
        self.t0 = self.spoke * self.spoke
        self._emitted = 0
        self._tip_of: dict[int, int] = {}

    def begin(self, view) -> None:
        self._emitted = 0
        self._tip_of = {}

    def exhausted(self, view) -> bool:
        return self._emitted > self.n

    def next_time(self, view) -> Optional[float]:
        if self._emitted > self.n:
            return None
        return self.t0 + 2.0 * self.spoke * self._emitted

    def emit(self, view) -> list[Request]:
        t = self.next_time(view)
        if self._emitted == 0:
            batch = [Request(i, t, i, i) for i in range(1, self.n + 1)]
        else:
            tip = self._target_tip(view)
            rid = self.n + self._emitted
            batch = [Request(rid, t, tip, tip)]
        for q in batch:
            self._tip_of[q.rid] = q.source
        self._emitted += 1
        return batch

    def _target_tip(self, view) -> int:
        done = view.completions
        if done:
            latest = max(done.values())
            return min(self._tip_of[rid] for rid, tc in done.items() if tc == latest)
        open_count = {tip: 0 for tip in range(1, self.n + 1)}
        for rid, tip in self._tip_of.items():
            if rid not in done:
                open_count[tip] += 1
        fewest = min(open_count.values())
        return min(tip for tip, c in open_count.items() if c == fewest)


def star_setup(n_tips: int, spoke: int, ending: str = "homing") -> StreamSetup:
    return StreamSetup(
        space=star_space(n_tips, spoke),
        oracle=StarOracle(n_tips, spoke),
        mode="tsp",
        ending=ending,
        k=1,
        locality=float(spoke),
        arrival="general",
    )


def star_replan_makespan(n_tips: int, spoke: float, ending: str) -> float:
    """Closed form for what tour replanning pays on the hub stream."""
    full = spoke * (spoke + 4.0 * n_tips)
    return full if ending == "homing" else full - spoke


def star_opt_makespan(n_tips: int, spoke: float, ending: str) -> float:
    base = spoke * spoke + 2.0 * spoke * n_tips
    return base + spoke if ending == "homing" else base


def star_opt_schedule(requests: Sequence[Request], n_tips: int, spoke: float,
                      ending: str) -> Schedule:
    """Offline witness: hold at the hub, then one pass over the tips.

    Tips are visited in ascending order of their last release. The j-th
    tip is reached at ``spoke**2 + 2j*spoke``, which is never earlier than
    anything released on it: a tip whose last release is the p-th repeat
    ranks at position >= p, because all later repeats land on tips that
    rank above it.
    """
    by_tip: dict[int, list[Request]] = {}
    for q in requests:
        by_tip.setdefault(q.source, []).append(q)
    if set(by_tip) - set(range(1, n_tips + 1)):
        raise SchemaViolation("request off the tips of the hub space")
    order = sorted(by_tip, key=lambda tip: (max(q.release for q in by_tip[tip]), tip))
    steps: list[Step] = [Step("wait_until", until=spoke * spoke + spoke)]
    for tip in order:
        steps.append(Step("go", point=tip))
        for q in sorted(by_tip[tip], key=lambda q: q.rid):
            steps.append(Step("serve", rid=q.rid))
    if ending == "homing":
        steps.append(Step("return"))
    return Schedule(servers=(tuple(steps),))


# --------------------------------------------------------------------------
# Line span chase (single server)

class SpanChaseOracle(RequestOracle):
    """Carrots one radius ahead of the server, out to each end of the line.

    March to the far extreme first, then all the way back to the other,
    then ``extra`` draws inside the current radius ball. Pickup-only
    streams release on a fixed clock; with drop-offs each release waits
    for the previous completion so the pace survives the detours.
    """

    def __init__(self, space: LineSpace, locality: float, *, mode: str = "tsp",
                 extra: int = 0, seed: int = 0):
        if locality <= 0:
            raise SchemaViolation("span chase needs a positive release radius")
        self.space = space
        self.locality = float(locality)
        self.mode = mode
        self.extra = extra
        self.seed = seed
        self._reset()

    def _reset(self) -> None:
        self._rng = Random(self.seed)
        self._count = 0
        self._phase = 0  # 0 far march, 1 back march, 2 ball draws, 3 done
        self._left_extra = self.extra
        self._await: Optional[int] = None
        # Far side first, ties toward the right.
        self._dir = 1.0 if self.space.right >= self.space.left else -1.0
        # A server that refuses to chase would stretch the stream forever;
        # cut it off once a sane run would long be over.
        span = self.space.diameter + self.space.right + self.locality
        self._fuse = 3 * math.ceil(span / self.locality) + self.extra + 8

    def begin(self, view) -> None:
        self._reset()

    def exhausted(self, view) -> bool:
        return self._phase >= 3

    def next_time(self, view) -> Optional[float]:
        if self._phase >= 3:
            return None
        if self.mode == "tsp":
            return self._count * self.locality
        if self._count == 0:
            return 0.0
        if self._await is not None and self._await not in view.completions:
            return None
        return view.time

    def emit(self, view) -> list[Request]:
        t = self.next_time(view)
        pos = float(view.positions[0])
        rng = self._rng
        space, radius = self.space, self.locality
        if self._phase < 2:
            src = space.clamp(pos + self._dir * radius)
            goal = space.right if self._dir > 0 else -space.left
            if src == goal:
                self._phase += 1
                self._dir = -self._dir
                if self._phase == 2 and self._left_extra <= 0:
                    self._phase = 3
            dest = src
            if self.mode == "darp":
                dest = space.clamp(src + self._dir * rng.uniform(0.2, 0.5) * radius)
        else:
            src = space.sample_in_ball(rng, pos, radius)
            dest = src if self.mode == "tsp" else space.sample_point(rng)
            self._left_extra -= 1
            if self._left_extra <= 0:
                self._phase = 3
        self._count += 1
        if self._count >= self._fuse:
            self._phase = 3
        rid = self._count
        self._await = rid
        return [Request(rid, t, src, dest)]


def span_chase_setup(left: float, right: float, locality: float, *,
                     mode: str = "tsp", ending: str = "nomadic", extra: int = 0,
                     seed: int = 0) -> StreamSetup:
    space = LineSpace(left, right)
    return StreamSetup(
        space=space,
        oracle=SpanChaseOracle(space, locality, mode=mode, extra=extra, seed=seed),
        mode=mode,
        ending=ending,
        k=1,
        locality=float(locality),
        arrival="general",
    )


# --------------------------------------------------------------------------
# Rail chase across a general space (single server)

def ladder_space(n_rungs: int, locality: float, cluster: int = 0,
                 seed: int = 0) -> tuple[GeneralSpace, tuple[int, ...]]:
    """Points strung from the origin to the far end of the diameter.

    Index 0 is the start, rungs follow at ``RAIL_STEP * locality`` spacing
    with the last rung at the far end, then ``cluster`` extra points close
    to the start (inside a half-cone so the end-to-end pair stays the
    diameter). Returns the space and the rung ids in walking order.
    """
    if n_rungs < 1:
        raise SchemaViolation("need at least one rung")
    step = RAIL_STEP * locality
    coords = [(0.0, 0.0)]
    coords += [(step * i, 0.0) for i in range(1, n_rungs + 1)]
    rng = Random(seed)
    for _ in range(cluster):
        r = CLUSTER_SPREAD * locality * rng.uniform(0.3, 1.0)
        theta = rng.uniform(-1.0, 1.0)
        coords.append((r * math.cos(theta), r * math.sin(theta)))
    rail = tuple(range(1, n_rungs + 1))
    return euclidean_space(coords, origin=0), rail


class LadderChaseOracle(RequestOracle):
    """Work the reachable point nearest the far end, released on completion.

    Starts with a request at the origin (and the near-start cluster, while
    it is still in reach), then walks the rungs. ``redrops`` repeats land
    on the source just chased, two chases apart, so the open set is
    occasionally larger than one. With drop-offs each chase request
    carries one rung further; the final one ends at the far end.
    """

    def __init__(self, space: GeneralSpace, rail: Sequence[int], locality: float,
                 *, mode: str = "tsp", cluster: Sequence[int] = (), redrops: int = 0):
        self.space = space
        self.rail = tuple(rail)
        self.goal = self.rail[-1]
        self.locality = float(locality)
        self.mode = mode
        self.cluster = tuple(cluster)
        self.redrops = redrops
        self._reset()

    def _reset(self) -> None:
        self._await: set[int] = set()
        self._next_rid = 1
        self._stage = 0  # origin, then cluster, then rungs
        self._chases = 0
        self._left_redrops = self.redrops
        self._done = False

    def begin(self, view) -> None:
        self._reset()

    def exhausted(self, view) -> bool:
        return self._done

    def next_time(self, view) -> Optional[float]:
        if self._done:
            return None
        if self._stage == 0:
            return 0.0
        if any(rid not in view.completions for rid in self._await):
            return None
        return view.time

    def _fresh(self, t: float, src: int, dest: int) -> Request:
        q = Request(self._next_rid, t, src, dest)
        self._next_rid += 1
        self._await.add(q.rid)
        return q

    def emit(self, view) -> list[Request]:
        t = self.next_time(view)
        self._await = set()
        if self._stage == 0:
            self._stage = 1
            return [self._fresh(t, 0, 0)]
        pos = view.positions[0]
        if self._stage <= len(self.cluster):
            target = self.cluster[self._stage - 1]
            self._stage += 1
            return [self._fresh(t, target, target)]
        reach = [
            p for p in range(self.space.n)
            if self.space.pos_dist(pos, p) <= self.locality + EPS
        ]
        src = min(reach, key=lambda p: (self.space.dist(p, self.goal), p))
        dest = src
        if self.mode == "darp" and src in self.rail and src != self.goal:
            dest = self.rail[self.rail.index(src) + 1]
        batch = [self._fresh(t, src, dest)]
        self._chases += 1
        if self._left_redrops > 0 and self._chases % 2 == 0:
            self._left_redrops -= 1
            anchor = batch[0].source
            batch.append(self._fresh(t, anchor, anchor))
        if src == self.goal or dest == self.goal:
            self._done = True
        return batch


def ladder_chase_setup(n_rungs: int, *, mode: str = "tsp", ending: str = "nomadic",
                       cluster: int = 0, redrops: int = 0,
                       seed: int = 0) -> StreamSetup:
    locality = 1.0
    space, rail = ladder_space(n_rungs, locality, cluster=cluster, seed=seed)
    cluster_ids = tuple(range(n_rungs + 1, n_rungs + 1 + cluster))
    oracle = LadderChaseOracle(space, rail, locality, mode=mode,
                               cluster=cluster_ids, redrops=redrops)
    return StreamSetup(space=space, oracle=oracle, mode=mode, ending=ending,
                       k=1, locality=locality, arrival="general")


# --------------------------------------------------------------------------
# Two-arm chase for several servers

def arms_space(n_a: int, n_b: int, step: float) -> tuple[GeneralSpace, tuple[int, ...], tuple[int, ...]]:
    """Two perpendicular rail arms out of a shared origin."""
    coords = [(0.0, 0.0)]
    coords += [(step * i, 0.0) for i in range(1, n_a + 1)]
    coords += [(0.0, step * i) for i in range(1, n_b + 1)]
    rail_a = tuple(range(1, n_a + 1))
    rail_b = tuple(range(n_a + 1, n_a + 1 + n_b))
    return euclidean_space(coords, origin=0), rail_a, rail_b


def arms_requests(rail_a: Sequence[int], rail_b: Sequence[int], step: float,
                  mode: str) -> list[Request]:
    """Alternating releases that keep one chaser per arm in phase.

    Pickup-only: rung j of an arm appears when its chaser has been parked
    on rung j-1 for one step-time. With drop-offs each request spans two
    rungs, so the clock per arm stretches to four step-times.
    """
    reqs: list[Request] = []
    rid = 1
    if mode == "tsp":
        for j, arm in enumerate((rail_a, rail_b)):
            for i, p in enumerate(arm):
                reqs.append(Request(rid, (2 * i + j) * step, p, p))
                rid += 1
    else:
        for j, arm in enumerate((rail_a, rail_b)):
            for i in range(0, len(arm) - 1, 2):
                reqs.append(Request(rid, (2 * i + j) * step, arm[i], arm[i + 1]))
                rid += 1
    reqs.sort(key=lambda q: (q.release, q.rid))
    return [Request(i + 1, q.release, q.source, q.dest) for i, q in enumerate(reqs)]


def arms_chase_setup(k: int, *, mode: str = "tsp", ending: str = "nomadic",
                     n_a: int = 4, n_b: int = 4,
                     step_scale: float = 0.95) -> StreamSetup:
    locality = 1.0
    step = step_scale * locality
    space, rail_a, rail_b = arms_space(n_a, n_b, step)
    reqs = arms_requests(rail_a, rail_b, step, mode)
    return StreamSetup(space=space, oracle=FixedOracle(reqs), mode=mode,
                       ending=ending, k=k, locality=locality, arrival="general")


# --------------------------------------------------------------------------
# Parameter sweeps

SWEEP_KINDS = ("delta-sweep", "beta-sweep", "gamma-sweep")


def sweep_family(kind: str, grid: Sequence[float], base: Optional[dict] = None,
                 seed: int = 0) -> list[StreamSetup]:
    """One setup per grid value, varying a single shape parameter.

    ``delta-sweep`` scales the release radius of a span chase on a fixed
    line; ``beta-sweep`` slides the origin along the line with the radius
    pinned to a fraction of the diameter; ``gamma-sweep`` does the same
    slide for fleets fed by a sequential drip. Everything else about the
    shape comes from ``base``; per-point streams draw distinct seeds
    derived from ``seed``.
    """
    if kind not in SWEEP_KINDS:
        known = ", ".join(SWEEP_KINDS)
        raise SchemaViolation(f"unknown sweep kind {kind!r} (known: {known})")
    grid = list(grid)
    if not grid:
        raise SchemaViolation("sweep grid is empty")
    base = dict(base or {})
    mode = base.get("mode", "tsp")
    ending = base.get("ending", "nomadic")
    out: list[StreamSetup] = []
    if kind == "delta-sweep":
        left = float(base.get("left", 10.0))
        right = float(base.get("right", 10.0))
        for i, delta in enumerate(grid):
            if not 0.0 <= delta <= 1.0:
                raise SchemaViolation(f"radius ratio {delta} outside [0, 1]")
            out.append(span_chase_setup(
                left, right, delta * (left + right), mode=mode, ending=ending,
                extra=int(base.get("extra", 0)), seed=seed + i,
            ))
        return out
    diameter = float(base.get("diameter", 20.0))
    delta = float(base.get("delta", 0.3))
    if not 0.0 <= delta <= 1.0:
        raise SchemaViolation(f"radius ratio {delta} outside [0, 1]")
    if kind == "beta-sweep":
        for i, beta in enumerate(grid):
            if not -EPS <= beta <= 0.5 + EPS:
                raise SchemaViolation(f"side ratio {beta} outside [0, 1/2]")
            out.append(span_chase_setup(
                beta * diameter, (1.0 - beta) * diameter, delta * diameter,
                mode=mode, ending=ending, extra=int(base.get("extra", 0)),
                seed=seed + i,
            ))
        return out
    k = int(base.get("k", 2))
    for i, gamma in enumerate(grid):
        if not 0.5 - EPS <= gamma <= 1.0 + EPS:
            raise SchemaViolation(f"side ratio {gamma} outside [1/2, 1]")
        space = LineSpace((1.0 - gamma) * diameter, gamma * diameter)
        oracle = SequentialOracle(
            m=int(base.get("m", 6)),
            lag_lo=float(base.get("lag_lo", 0.0)),
            lag_hi=float(base.get("lag_hi", 1.0)),
            final_lag=diameter,
            seed=seed + i,
        )
        out.append(StreamSetup(space=space, oracle=oracle, mode=mode,
                               ending=ending, k=k, locality=delta * diameter,
                               arrival="sequential"))
    return out
