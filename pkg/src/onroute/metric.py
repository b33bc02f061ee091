"""Metric spaces servers move in: a bounded line segment or an explicit
finite metric given by a distance matrix.

Points on a line are float coordinates in ``[-left, right]`` with the origin
at 0. Points of a general space are indices ``0..n-1``. Servers can sit
between points of a general space while traveling; such interior positions
are ``EdgePos`` values and distances to them follow the usual geodesic
completion (best route via either end of the edge being traversed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import EmptyBall, MetricViolation, SchemaViolation

EPS = 1e-9

Point = Union[float, int]


@dataclass(frozen=True)
class EdgePos:
    """Interior position on the virtual edge ``a -> b``, ``offset`` from a."""

    a: int
    b: int
    offset: float


Position = Union[float, int, EdgePos]


@dataclass(frozen=True)
class MetricCheck:
    ok: bool
    kind: str = "ok"
    where: tuple = ()

    def message(self) -> str:
        return self.kind if self.ok else f"{self.kind} at {self.where}"


def validate_metric(dist: Sequence[Sequence[float]]) -> MetricCheck:
    """Check the metric axioms on a square matrix.

    Returns the first violation found: shape, negativity, nonzero diagonal,
    asymmetry or a broken triangle, scanned in that order with ascending
    indices so the report is deterministic.
    """
    n = len(dist)
    for i, row in enumerate(dist):
        if len(row) != n:
            return MetricCheck(False, "shape", (i,))
    for i in range(n):
        if abs(dist[i][i]) > EPS:
            return MetricCheck(False, "diagonal", (i,))
        for j in range(n):
            if dist[i][j] < -EPS:
                return MetricCheck(False, "negative", (i, j))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(dist[i][j] - dist[j][i]) > EPS:
                return MetricCheck(False, "symmetry", (i, j))
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            for j in range(n):
                if dist[i][j] > dik + dist[k][j] + EPS:
                    return MetricCheck(False, "triangle", (i, k, j))
    return MetricCheck(True)


class LineSpace:
    """Segment ``[-left, +right]`` with the depot fixed at coordinate 0."""

    kind = "line"

    def __init__(self, left: float, right: float):
        if left < 0 or right < 0:
            raise SchemaViolation("line extents must be nonnegative")
        self.left = float(left)
        self.right = float(right)
        self.origin: float = 0.0

    @property
    def diameter(self) -> float:
        return self.left + self.right

    @property
    def min_side_ratio(self) -> float:
        """Share of the segment on the shorter side of the depot (0..1/2)."""
        d = self.diameter
        return min(self.left, self.right) / d if d > 0 else 0.0

    @property
    def max_side_ratio(self) -> float:
        d = self.diameter
        return max(self.left, self.right) / d if d > 0 else 1.0

    def contains(self, x: Point) -> bool:
        return -self.left - EPS <= x <= self.right + EPS

    def clamp(self, x: float) -> float:
        return min(max(x, -self.left), self.right)

    def dist(self, x: Point, y: Point) -> float:
        return abs(x - y)

    # Positions on a line are plain coordinates, so the position helpers
    # coincide with dist; they exist to mirror GeneralSpace.
    def pos_dist(self, pos: Position, point: Point) -> float:
        return abs(pos - point)

    def pos_pair_dist(self, p: Position, q: Position) -> float:
        return abs(p - q)

    def sample_point(self, rng) -> float:
        return rng.uniform(-self.left, self.right)

    def ball_interval(self, pos: float, radius: float) -> tuple[float, float]:
        lo = max(pos - radius, -self.left)
        hi = min(pos + radius, self.right)
        if lo > hi + EPS:
            raise EmptyBall(f"no line points within {radius} of {pos}")
        return lo, hi

    def ball_nonempty(self, pos: Position, radius: float) -> bool:
        return True  # the segment is a continuum; every position is in it

    def sample_in_ball(self, rng, pos: Position, radius: float) -> float:
        lo, hi = self.ball_interval(float(pos), radius)
        return rng.uniform(lo, hi) if hi > lo else lo

    def to_json(self) -> dict:
        return {"kind": "line", "left": self.left, "right": self.right}

    def __repr__(self) -> str:
        return f"LineSpace(left={self.left}, right={self.right})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LineSpace)
            and other.left == self.left
            and other.right == self.right
        )


class GeneralSpace:
    """Finite metric space given by an explicit distance matrix.

    ``repair=True`` coerces a near-metric into one: the matrix is
    symmetrized by taking the cheaper direction, the diagonal is zeroed and
    all-pairs shortest paths restore the triangle inequality. Without the
    flag any axiom violation raises ``MetricViolation``.
    """

    kind = "general"

    def __init__(self, dist: Sequence[Sequence[float]], origin: int = 0, repair: bool = False):
        mat = [[float(v) for v in row] for row in dist]
        n = len(mat)
        if any(len(row) != n for row in mat):
            raise SchemaViolation("distance matrix must be square")
        if not 0 <= origin < n:
            raise SchemaViolation(f"origin index {origin} outside 0..{n - 1}")
        if repair:
            for i in range(n):
                mat[i][i] = 0.0
                for j in range(i + 1, n):
                    if mat[i][j] < 0 or mat[j][i] < 0:
                        raise MetricViolation("negative distances cannot be repaired")
                    lo = min(mat[i][j], mat[j][i])
                    mat[i][j] = mat[j][i] = lo
            for k in range(n):
                rk = mat[k]
                for i in range(n):
                    ri = mat[i]
                    dik = ri[k]
                    for j in range(n):
                        alt = dik + rk[j]
                        if alt < ri[j]:
                            ri[j] = alt
        check = validate_metric(mat)
        if not check.ok:
            raise MetricViolation(f"not a metric: {check.message()}")
        self._dist = tuple(tuple(row) for row in mat)
        self.n = n
        self.origin = origin

    @property
    def diameter(self) -> float:
        return max(max(row) for row in self._dist) if self.n else 0.0

    @property
    def points(self) -> range:
        return range(self.n)

    def contains(self, x: Point) -> bool:
        return isinstance(x, int) and 0 <= x < self.n

    def dist(self, x: Point, y: Point) -> float:
        return self._dist[x][y]

    def pos_dist(self, pos: Position, point: int) -> float:
        """Distance from a (possibly interior) position to a point."""
        if isinstance(pos, EdgePos):
            span = self._dist[pos.a][pos.b]
            via_a = pos.offset + self._dist[pos.a][point]
            via_b = (span - pos.offset) + self._dist[pos.b][point]
            return min(via_a, via_b)
        return self._dist[pos][point]

    def pos_pair_dist(self, p: Position, q: Position) -> float:
        if isinstance(p, EdgePos) and isinstance(q, EdgePos):
            best = math.inf
            if (p.a, p.b) == (q.a, q.b):
                best = abs(p.offset - q.offset)
            span = self._dist[p.a][p.b]
            via_a = p.offset + self.pos_dist(q, p.a)
            via_b = (span - p.offset) + self.pos_dist(q, p.b)
            return min(best, via_a, via_b)
        if isinstance(p, EdgePos):
            return self.pos_dist(p, q)
        return self.pos_dist(q, p)

    def sample_point(self, rng) -> int:
        return rng.randrange(self.n)

    def ball(self, pos: Position, radius: float) -> list[int]:
        return [x for x in range(self.n) if self.pos_dist(pos, x) <= radius + EPS]

    def ball_nonempty(self, pos: Position, radius: float) -> bool:
        # A position deep inside a long edge can be farther than ``radius``
        # from every point of the space.
        return any(self.pos_dist(pos, x) <= radius + EPS for x in range(self.n))

    def sample_in_ball(self, rng, pos: Position, radius: float) -> int:
        candidates = self.ball(pos, radius)
        if not candidates:
            raise EmptyBall(f"no points within {radius} of {pos}")
        return candidates[rng.randrange(len(candidates))]

    def to_json(self) -> dict:
        return {"kind": "general", "dist": [list(row) for row in self._dist], "origin": self.origin}

    def __repr__(self) -> str:
        return f"GeneralSpace(n={self.n}, origin={self.origin})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GeneralSpace)
            and other._dist == self._dist
            and other.origin == self.origin
        )


Space = Union[LineSpace, GeneralSpace]


def space_from_json(obj: dict) -> Space:
    try:
        kind = obj["kind"]
    except (TypeError, KeyError):
        raise SchemaViolation("space object needs a 'kind' field") from None
    if kind == "line":
        try:
            return LineSpace(obj["left"], obj["right"])
        except KeyError as exc:
            raise SchemaViolation(f"line space missing field {exc}") from None
    if kind == "general":
        try:
            return GeneralSpace(obj["dist"], obj.get("origin", 0), repair=bool(obj.get("repair", False)))
        except KeyError as exc:
            raise SchemaViolation(f"general space missing field {exc}") from None
    raise SchemaViolation(f"unknown space kind {kind!r}")


def euclidean_space(coords: Iterable[tuple[float, float]], origin: int = 0) -> GeneralSpace:
    """General space over planar points (handy for generators and tests)."""
    pts = list(coords)
    mat = [
        [math.hypot(px - qx, py - qy) for (qx, qy) in pts]
        for (px, py) in pts
    ]
    return GeneralSpace(mat, origin)
