"""Pure-Python kernels: anchored-chain DP and min-makespan branch and bound.

These are the reference semantics for the compiled twins in ``_core.pyx``.
Both backends must produce bit-identical results, so every floating point
operation here appears in the same order in the Cython source. Keep the two
files in sync when touching either.

Inputs describe ``n`` abstract items visited by servers that start at an
anchor. Geometry is pre-folded by the caller into:

* ``enter[i]``   cost anchor -> entry of item i (item traversal included)
* ``step[i][j]`` cost exit of i -> entry of j (traversal of j included)
* ``leave[i]``   cost exit of i -> anchor (closed walks only)
* ``inner[i]``   traversal time inside item i (release floors apply at entry)

A plain point is an item with zero ``inner`` whose entry and exit coincide.
A pickup/delivery pair is an item whose entry is the pickup location, exit
the delivery location and ``inner`` the distance between them.
"""

from __future__ import annotations

import math

MAX_DP_ITEMS = 18  # 2**n DP table; 18 keeps memory under ~40 MB


def hk_order(enter, step, leave=None):
    """Cheapest order of all items along one anchored chain.

    Subset dynamic program over item bitmasks, run from the far end toward
    the anchor: ``g[mask][i]`` is the cheapest way to finish the chain when
    ``mask`` is already visited and the server sits at item ``i``.
    Reconstruction then walks forward, taking the smallest item index whose
    continuation reproduces the optimum, so among equal-cost orders the
    lexicographically smallest wins. The re-evaluated sums are bit-identical
    to the ones minimized in the table, so the equality test is exact.

    Returns ``(cost, order)`` where ``order`` lists item indices.
    """
    n = len(enter)
    if n == 0:
        return 0.0, []
    if n > MAX_DP_ITEMS:
        raise ValueError(f"chain DP limited to {MAX_DP_ITEMS} items, got {n}")

    full = 1 << n
    done = full - 1
    inf = math.inf
    g = [[inf] * n for _ in range(full)]
    for j in range(n):
        g[done][j] = leave[j] if leave is not None else 0.0

    for mask in range(full - 2, 0, -1):
        row = g[mask]
        for i in range(n):
            if not (mask >> i) & 1:
                continue
            stepi = step[i]
            best = inf
            for j in range(n):
                if (mask >> j) & 1:
                    continue
                cand = stepi[j] + g[mask | (1 << j)][j]
                if cand < best:
                    best = cand
            row[i] = best

    best = inf
    for j in range(n):
        cand = enter[j] + g[1 << j][j]
        if cand < best:
            best = cand

    order = []
    mask = 0
    cur = -1
    while mask != done:
        target = best if cur < 0 else g[mask][cur]
        for j in range(n):
            if (mask >> j) & 1:
                continue
            base = enter[j] if cur < 0 else step[cur][j]
            if base + g[mask | (1 << j)][j] == target:
                order.append(j)
                mask |= 1 << j
                cur = j
                break
    return best, order


def bb_min_makespan(k, enter, step, leave, inner, release, homing):
    """Exact min-makespan split of items among ``k`` servers.

    Branch and bound over insertion positions: item ``i`` (callers pre-sort
    by release time) is placed at every position of every server's chain at
    depth ``i``, so each assignment/order combination is enumerated exactly
    once. Arrival at an item's entry waits for its release; the makespan is
    the latest exit (plus the ``leave`` hop back to the anchor when
    ``homing``).

    Pruning assumes ``step`` is metric-consistent (inserting an item never
    shortens downstream arrivals), which holds for anything derived from a
    metric space. The first optimum in server-then-position scan order wins,
    making the returned split deterministic.

    Returns ``(makespan, chains)`` with ``chains`` a list of ``k`` item
    index lists.
    """
    m = len(enter)
    if m == 0:
        return 0.0, [[] for _ in range(k)]

    chains = [[] for _ in range(k)]
    finish = [0.0] * k
    best = [math.inf, None]

    tail_floor = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        lb = release[i] + inner[i]
        if homing:
            lb = lb + leave[i]
        tail_floor[i] = lb if lb > tail_floor[i + 1] else tail_floor[i + 1]

    def chain_finish(seq):
        t = 0.0
        prev = -1
        for it in seq:
            arrive = enter[it] if prev < 0 else t + step[prev][it]
            rel = release[it]
            start = arrive if arrive > rel else rel
            t = start + inner[it]
            prev = it
        if homing and prev >= 0:
            t = t + leave[prev]
        return t

    def descend(depth, bound):
        if depth == m:
            if bound < best[0]:
                best[0] = bound
                best[1] = [list(c) for c in chains]
            return
        if tail_floor[depth] >= best[0]:
            return
        it = depth
        for srv in range(k):
            seq = chains[srv]
            if not seq and any(not chains[s2] for s2 in range(srv)):
                continue  # identical servers: one empty chain stands for all
            old_finish = finish[srv]
            for pos in range(len(seq) + 1):
                seq.insert(pos, it)
                f = chain_finish(seq)
                finish[srv] = f
                nb = bound if bound > f else f
                if nb < best[0]:
                    descend(depth + 1, nb)
                seq.pop(pos)
            finish[srv] = old_finish

    root = 0.0
    descend(0, root)
    return best[0], best[1]
