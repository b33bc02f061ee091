"""Requests, problem instances, stream oracles and model checks.

An instance fixes the space, the service mode (``tsp``: visit the source;
``darp``: carry from source to destination), how the run ends (``nomadic``:
stop anywhere; ``homing``: finish at the depot), the server count, the
release radius (the largest distance a new source may have from the nearest
server at its release instant) and either a concrete request list or a
stream oracle that reveals requests while the simulation runs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ParseError, SchemaViolation
from .metric import EPS, Point, Space, space_from_json

MODES = ("tsp", "darp")
ENDINGS = ("nomadic", "homing")
ARRIVALS = ("general", "sequential")


@dataclass(frozen=True)
class Request:
    rid: int
    release: float
    source: Point
    dest: Point

    def to_json(self) -> dict:
        return {"id": self.rid, "t": self.release, "e": self.source, "d": self.dest}


@dataclass(frozen=True)
class Instance:
    space: Space
    mode: str = "tsp"
    ending: str = "nomadic"
    k: int = 1
    locality: float = 0.0  # absolute release radius
    arrival: str = "general"
    requests: tuple[Request, ...] = ()

    @property
    def locality_ratio(self) -> float:
        d = self.space.diameter
        return self.locality / d if d > 0 else 0.0

    @property
    def m(self) -> int:
        return len(self.requests)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise SchemaViolation(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.ending not in ENDINGS:
            raise SchemaViolation(f"ending must be one of {ENDINGS}, got {self.ending!r}")
        if self.arrival not in ARRIVALS:
            raise SchemaViolation(f"arrival must be one of {ARRIVALS}, got {self.arrival!r}")
        if self.k < 1:
            raise SchemaViolation("k must be at least 1")
        if self.locality < -EPS:
            raise SchemaViolation("release radius must be nonnegative")
        if self.locality > self.space.diameter + EPS:
            raise SchemaViolation(
                f"release radius {self.locality} exceeds space diameter {self.space.diameter}"
            )
        seen: set[int] = set()
        for r in self.requests:
            if r.rid in seen:
                raise SchemaViolation(f"duplicate request id {r.rid}")
            seen.add(r.rid)
            if r.release < 0:
                raise SchemaViolation(f"request {r.rid} released at negative time")
            if not self.space.contains(r.source):
                raise SchemaViolation(f"request {r.rid} source outside the space")
            if not self.space.contains(r.dest):
                raise SchemaViolation(f"request {r.rid} destination outside the space")
            if self.mode == "tsp" and r.dest != r.source:
                raise SchemaViolation(f"request {r.rid} has a destination in tsp mode")

    def sorted_requests(self) -> tuple[Request, ...]:
        return tuple(sorted(self.requests, key=lambda r: (r.release, r.rid)))

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "mode": self.mode,
            "ending": self.ending,
            "k": self.k,
            "delta": self.locality,
            "arrival": self.arrival,
            "requests": [r.to_json() for r in self.sorted_requests()],
        }


def instance_from_json(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise SchemaViolation("instance must be a JSON object")
    try:
        space = space_from_json(obj["space"])
    except KeyError:
        raise SchemaViolation("instance missing 'space'") from None
    mode = obj.get("mode", "tsp")
    reqs = []
    for raw in obj.get("requests", []):
        try:
            rid = int(raw["id"])
            t = float(raw["t"])
            e = raw["e"]
            d = raw.get("d", e if mode == "tsp" else None)
            if d is None:
                raise SchemaViolation(f"darp request {rid} missing destination")
            if space.kind == "general":
                e, d = int(e), int(d)
            else:
                e, d = float(e), float(d)
            reqs.append(Request(rid, t, e, d))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad request entry {raw!r}: {exc}") from None
    inst = Instance(
        space=space,
        mode=mode,
        ending=obj.get("ending", "nomadic"),
        k=int(obj.get("k", 1)),
        locality=float(obj.get("delta", 0.0)),
        arrival=obj.get("arrival", "general"),
        requests=tuple(reqs),
    )
    inst.validate()
    return inst


def load_instance(path: str) -> Instance:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return instance_from_json(obj)


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_json(), fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Model checks against a finished run

@dataclass(frozen=True)
class LocalityReport:
    ok: bool
    worst_gap: float
    violations: tuple[tuple[int, float], ...]


def check_spatial_locality(instance: Instance, trace) -> LocalityReport:
    """Verify every source was within the release radius of some server.

    Positions come from the trace's motion record at each release instant.
    Destinations are deliberately not checked: only where work appears is
    constrained, not where it wants to go.
    """
    space = instance.space
    worst = 0.0
    bad = []
    for r in instance.sorted_requests():
        gap = min(
            space.pos_dist(trace.position_at(s, r.release), r.source)
            for s in range(instance.k)
        )
        worst = max(worst, gap)
        if gap > instance.locality + EPS:
            bad.append((r.rid, gap))
    return LocalityReport(not bad, worst, tuple(bad))


def check_sequential(instance: Instance, trace) -> bool:
    """True when each release happened at or after the previous completion."""
    reqs = instance.sorted_requests()
    for prev, nxt in zip(reqs, reqs[1:]):
        done = trace.completions.get(prev.rid)
        if done is None or nxt.release < done - EPS:
            return False
    return True


# --------------------------------------------------------------------------
# Stream oracles

def _hosts(view, radius: float) -> list[int]:
    """Servers that can host a release: some point of the space is in reach."""
    space = view.space
    return [s for s in range(view.k)
            if space.ball_nonempty(view.positions[s], radius)]


class RequestOracle:
    """Reveals requests while a simulation runs.

    The simulator asks ``next_time`` after every event; a float schedules
    the next release instant, ``None`` means nothing is scheduled right now.
    ``exhausted`` turning true is the terminal signal. ``emit`` is called
    exactly when the clock reaches the scheduled instant and may inspect
    live server positions through the view; an empty batch defers the
    release to a later instant.
    """

    def begin(self, view) -> None:  # pragma: no cover - trivial default
        pass

    def next_time(self, view) -> Optional[float]:
        raise NotImplementedError

    def exhausted(self, view) -> bool:
        raise NotImplementedError

    def emit(self, view) -> list[Request]:
        raise NotImplementedError


class FixedOracle(RequestOracle):
    """Replays a concrete request list (releases grouped by instant)."""

    def __init__(self, requests: Iterable[Request]):
        self._pending = sorted(requests, key=lambda r: (r.release, r.rid))
        self._idx = 0

    def begin(self, view) -> None:
        self._idx = 0

    def next_time(self, view):
        if self._idx >= len(self._pending):
            return None
        return self._pending[self._idx].release

    def exhausted(self, view):
        return self._idx >= len(self._pending)

    def emit(self, view):
        t = self._pending[self._idx].release
        batch = []
        while self._idx < len(self._pending) and self._pending[self._idx].release == t:
            batch.append(self._pending[self._idx])
            self._idx += 1
        return batch


class AdaptiveOracle(RequestOracle):
    """Random stream that respects the release radius against live servers.

    Release instants follow one of three laws fixed up front from the seed
    (``fixed-interval``, ``uniform`` gaps, or ``burst`` batches); sources are
    sampled inside the radius around a uniformly chosen server at emission
    time, destinations (darp) uniformly over the space. When no server has
    any point of the space in reach (possible mid-edge in a sparse general
    space) the release is held back until one does; the radius promise
    constrains when the stream may speak, not just where.
    """

    def __init__(self, *, m: int, law: str = "fixed-interval", interval: float = 1.0,
                 lo: float = 0.0, hi: float = 1.0, burst: int = 2, start: float = 0.0,
                 seed: int = 0):
        if m < 0:
            raise SchemaViolation("m must be nonnegative")
        self.seed = seed
        rng = random.Random(seed)
        times: list[float] = []
        t = start
        if law == "fixed-interval":
            for i in range(m):
                times.append(start + i * interval)
        elif law == "uniform":
            for _ in range(m):
                times.append(t)
                t += rng.uniform(lo, hi)
        elif law == "burst":
            if burst < 1:
                raise SchemaViolation("burst size must be positive")
            while len(times) < m:
                times.extend([t] * min(burst, m - len(times)))
                t += interval
        else:
            raise SchemaViolation(f"unknown release law {law!r}")
        self._times = times
        self._stream_seed = rng.random()
        self._idx = 0
        self._rng = random.Random(self._stream_seed)
        self._next_rid = 1

    def begin(self, view) -> None:
        self._idx = 0
        self._rng = random.Random(self._stream_seed)
        self._next_rid = 1

    def next_time(self, view):
        if self._idx >= len(self._times):
            return None
        due = max(self._times[self._idx], view.time)
        if due <= view.time + EPS and not _hosts(view, view.locality):
            return None  # unrealizable right now; asked again after the next event
        return due

    def exhausted(self, view):
        return self._idx >= len(self._times)

    def _draw(self, view, t: float, hosts: list[int]) -> Request:
        rng = self._rng
        space = view.space
        server = hosts[rng.randrange(len(hosts))]
        src = space.sample_in_ball(rng, view.positions[server], view.locality)
        dst = space.sample_point(rng) if view.mode == "darp" else src
        rid = self._next_rid
        self._next_rid += 1
        return Request(rid, t, src, dst)

    def emit(self, view):
        hosts = _hosts(view, view.locality)
        if not hosts:
            return []
        t = max(self._times[self._idx], view.time)
        batch = []
        while (
            self._idx < len(self._times)
            and max(self._times[self._idx], view.time) == t
        ):
            batch.append(self._draw(view, t, hosts))
            self._idx += 1
        return batch


class SequentialOracle(RequestOracle):
    """One request at a time: the next appears only after the last is served.

    Gaps between a completion and the following release are uniform in
    ``[lag_lo, lag_hi]``; ``final_lag`` (if set) overrides the gap before
    the last request, which generators use to stretch the horizon.
    """

    def __init__(self, *, m: int, lag_lo: float = 0.0, lag_hi: float = 1.0,
                 first: float = 0.0, final_lag: Optional[float] = None, seed: int = 0,
                 radius: Optional[float] = None):
        self.m = m
        self._seed = seed
        self._first = first
        self._emitted = 0
        self._last_rid: Optional[int] = None
        self._scheduled: Optional[float] = first if m > 0 else None
        self._rng = random.Random(seed)
        self._lag = (lag_lo, lag_hi)
        self._final_lag = final_lag
        self._radius = radius

    def begin(self, view) -> None:
        self._emitted = 0
        self._last_rid = None
        self._scheduled = self._first if self.m > 0 else None
        self._rng = random.Random(self._seed)

    def next_time(self, view):
        if self._emitted >= self.m:
            return None
        if self._scheduled is None:
            done = view.completions.get(self._last_rid)
            if done is None:
                return None  # previous request still open; ask again later
            lag = (
                self._final_lag
                if self._final_lag is not None and self._emitted == self.m - 1
                else self._rng.uniform(*self._lag)
            )
            self._scheduled = max(done + lag, view.time)
        due = max(self._scheduled, view.time)
        radius = view.locality if self._radius is None else self._radius
        if due <= view.time + EPS and not _hosts(view, radius):
            return None
        return due

    def exhausted(self, view):
        return self._emitted >= self.m

    def emit(self, view):
        radius = view.locality if self._radius is None else self._radius
        hosts = _hosts(view, radius)
        if not hosts:
            return []  # hold the release until some server can host it
        t = max(self._scheduled, view.time)
        self._scheduled = None
        rng = self._rng
        space = view.space
        server = hosts[rng.randrange(len(hosts))]
        src = space.sample_in_ball(rng, view.positions[server], radius)
        dst = space.sample_point(rng) if view.mode == "darp" else src
        rid = self._emitted + 1
        self._emitted += 1
        self._last_rid = rid
        return [Request(rid, t, src, dst)]


def gen_adaptive_random(spec: dict) -> RequestOracle:
    """Oracle from a generator description (the ``generator`` JSON object)."""
    spec = dict(spec)
    law = spec.pop("law", "fixed-interval")
    if law == "sequential":
        keys = {"m", "lag_lo", "lag_hi", "first", "final_lag", "seed"}
        return SequentialOracle(**{k: v for k, v in spec.items() if k in keys})
    keys = {"m", "interval", "lo", "hi", "burst", "start", "seed"}
    return AdaptiveOracle(law=law, **{k: v for k, v in spec.items() if k in keys})


@dataclass(frozen=True)
class StreamSetup:
    """An instance whose requests come from an oracle instead of a list."""

    space: Space
    oracle: RequestOracle
    mode: str = "tsp"
    ending: str = "nomadic"
    k: int = 1
    locality: float = 0.0
    arrival: str = "general"

    @property
    def locality_ratio(self) -> float:
        d = self.space.diameter
        return self.locality / d if d > 0 else 0.0


def setup_from_instance(inst: Instance) -> StreamSetup:
    return StreamSetup(
        space=inst.space,
        oracle=FixedOracle(inst.requests),
        mode=inst.mode,
        ending=inst.ending,
        k=inst.k,
        locality=inst.locality,
        arrival=inst.arrival,
    )


def load_stream(path: str) -> StreamSetup:
    """Stream setup from an instance-shaped file with a ``generator`` field."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if "generator" not in obj:
        return setup_from_instance(instance_from_json(obj))
    space = space_from_json(obj["space"])
    return StreamSetup(
        space=space,
        oracle=gen_adaptive_random(obj["generator"]),
        mode=obj.get("mode", "tsp"),
        ending=obj.get("ending", "nomadic"),
        k=int(obj.get("k", 1)),
        locality=float(obj.get("delta", 0.0)),
        arrival=obj.get("arrival", "general"),
    )
