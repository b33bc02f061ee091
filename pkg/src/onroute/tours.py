"""Shortest anchored walks over points or pickup/delivery pairs.

A "chain" starts at an anchor (the depot, or a server's current position),
visits every item once and either stops at the last item (open) or returns
to the anchor (closed). Items are plain points, or pairs whose pickup and
delivery are visited back to back; chains over pairs never interleave two
requests, which is also the shape the offline baselines optimize over.

Exact orders come from a subset DP in the kernel backend; above the size
cap a nearest-neighbour construction plus local search stands in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import _kernels
from .errors import CapExceeded
from .metric import EPS, Point, Position, Space

TSP_EXACT_CAP = 14
PAIR_EXACT_CAP = 9


@dataclass(frozen=True)
class Tour:
    """An anchored visiting order with its walk length.

    ``stops`` holds points for plain tours and ``(pickup, delivery)`` tuples
    for pair tours. ``visits()`` flattens to the actual waypoint sequence.
    """

    anchor: Position
    stops: tuple
    length: float
    closed: bool = False
    exact: bool = True

    def visits(self) -> list[Point]:
        out: list[Point] = []
        for s in self.stops:
            if isinstance(s, tuple):
                out.extend(s)
            else:
                out.append(s)
        return out


def chain_arrays(space: Space, entries, exits, anchor, *, fold_inner: bool, closed: bool):
    """Kernel inputs for a chain over items with given entry/exit locations.

    With ``fold_inner`` the traversal inside each item is added onto the
    edge that reaches it, which is what the order-only DP wants; the
    makespan search keeps it separate to apply release floors at entries.
    """
    n = len(entries)
    inner = [space.dist(entries[i], exits[i]) for i in range(n)]
    enter = [space.pos_dist(anchor, entries[i]) for i in range(n)]
    step = [[space.dist(exits[i], entries[j]) for j in range(n)] for i in range(n)]
    if fold_inner:
        for i in range(n):
            enter[i] += inner[i]
            row_i = step[i]
            for j in range(n):
                row_i[j] += inner[j]
    leave = [space.pos_dist(anchor, exits[i]) for i in range(n)] if closed else None
    return enter, step, leave, inner


def _chain_cost(enter, step, leave, order) -> float:
    if not order:
        return 0.0
    c = enter[order[0]]
    for a, b in zip(order, order[1:]):
        c += step[a][b]
    if leave is not None:
        c += leave[order[-1]]
    return c


def _nearest_neighbour(enter, step, n) -> list[int]:
    order: list[int] = []
    seen = [False] * n
    prev = -1
    for _ in range(n):
        best, best_j = None, -1
        for j in range(n):
            if seen[j]:
                continue
            c = enter[j] if prev < 0 else step[prev][j]
            if best is None or c < best:
                best, best_j = c, j
        order.append(best_j)
        seen[best_j] = True
        prev = best_j
    return order


def _two_opt(enter, step, leave, order) -> list[int]:
    """Segment-reversal descent. Only valid when ``step`` is symmetric."""
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                oi, oj = order[i], order[j]
                old_in = enter[oi] if i == 0 else step[order[i - 1]][oi]
                new_in = enter[oj] if i == 0 else step[order[i - 1]][oj]
                if j == n - 1:
                    old_out = leave[oj] if leave is not None else 0.0
                    new_out = leave[oi] if leave is not None else 0.0
                else:
                    old_out = step[oj][order[j + 1]]
                    new_out = step[oi][order[j + 1]]
                if new_in + new_out < old_in + old_out - EPS:
                    order[i : j + 1] = order[i : j + 1][::-1]
                    improved = True
    return order


def _relocate(enter, step, leave, order) -> list[int]:
    """Move-one-item descent; safe under asymmetric steps."""
    improved = True
    cost = _chain_cost(enter, step, leave, order)
    while improved:
        improved = False
        n = len(order)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                cand = order[:i] + order[i + 1 :]
                cand.insert(j, order[i])
                c = _chain_cost(enter, step, leave, cand)
                if c < cost - EPS:
                    order, cost = cand, c
                    improved = True
    return order


def _solve_chain(space, entries, exits, anchor, closed, cap, symmetric):
    n = len(entries)
    enter, step, leave, _ = chain_arrays(
        space, entries, exits, anchor, fold_inner=True, closed=closed
    )
    if n <= cap:
        cost, order = _kernels.hk_order(enter, step, leave)
        return cost, order, True
    order = _nearest_neighbour(enter, step, n)
    if symmetric:
        order = _two_opt(enter, step, leave, order)
    order = _relocate(enter, step, leave, order)
    return _chain_cost(enter, step, leave, order), order, False


def _canonical_points(points: Sequence[Point]) -> list[Point]:
    return sorted(set(points))


def tsp_tour_exact(space: Space, points: Sequence[Point], anchor: Position | None = None,
                   closed: bool = False, cap: int = TSP_EXACT_CAP) -> Tour:
    """Cheapest anchored order of the distinct points, by subset DP.

    Raises ``CapExceeded`` above ``cap`` distinct points. Equal-length
    orders resolve toward the one visiting lower coordinates/indices first.
    """
    pts = _canonical_points(points)
    if len(pts) > min(cap, _kernels.MAX_DP_ITEMS):
        raise CapExceeded(f"{len(pts)} points exceeds exact tour cap {cap}")
    anchor = space.origin if anchor is None else anchor
    cost, order, _ = _solve_chain(space, pts, pts, anchor, closed, cap, symmetric=True)
    return Tour(anchor, tuple(pts[i] for i in order), cost, closed, exact=True)


def tsp_tour_heuristic(space: Space, points: Sequence[Point], anchor: Position | None = None,
                       closed: bool = False) -> Tour:
    """Nearest-neighbour order improved by 2-opt and relocation."""
    pts = _canonical_points(points)
    anchor = space.origin if anchor is None else anchor
    cost, order, _ = _solve_chain(space, pts, pts, anchor, closed, cap=-1, symmetric=True)
    return Tour(anchor, tuple(pts[i] for i in order), cost, closed, exact=False)


def tsp_tour(space: Space, points: Sequence[Point], anchor: Position | None = None,
             closed: bool = False, cap: int = TSP_EXACT_CAP) -> Tour:
    """Exact tour within the cap, heuristic beyond it."""
    try:
        return tsp_tour_exact(space, points, anchor, closed, cap)
    except CapExceeded:
        return tsp_tour_heuristic(space, points, anchor, closed)


def pair_tour_exact(space: Space, pairs: Sequence[tuple[Point, Point]],
                    anchor: Position | None = None, closed: bool = False,
                    cap: int = PAIR_EXACT_CAP) -> Tour:
    """Cheapest anchored chain over pickup/delivery pairs (kept back to back)."""
    if len(pairs) > min(cap, _kernels.MAX_DP_ITEMS):
        raise CapExceeded(f"{len(pairs)} pairs exceeds exact chain cap {cap}")
    anchor = space.origin if anchor is None else anchor
    entries = [p for p, _ in pairs]
    exits = [q for _, q in pairs]
    cost, order, _ = _solve_chain(space, entries, exits, anchor, closed, cap, symmetric=False)
    return Tour(anchor, tuple(tuple(pairs[i]) for i in order), cost, closed, exact=True)


def pair_tour_heuristic(space: Space, pairs: Sequence[tuple[Point, Point]],
                        anchor: Position | None = None, closed: bool = False) -> Tour:
    anchor = space.origin if anchor is None else anchor
    entries = [p for p, _ in pairs]
    exits = [q for _, q in pairs]
    cost, order, _ = _solve_chain(space, entries, exits, anchor, closed, cap=-1, symmetric=False)
    return Tour(anchor, tuple(tuple(pairs[i]) for i in order), cost, closed, exact=False)


def pair_tour(space: Space, pairs: Sequence[tuple[Point, Point]],
              anchor: Position | None = None, closed: bool = False,
              cap: int = PAIR_EXACT_CAP) -> Tour:
    try:
        return pair_tour_exact(space, pairs, anchor, closed, cap)
    except CapExceeded:
        return pair_tour_heuristic(space, pairs, anchor, closed)
