"""The compiled kernels and their pure Python twins must be interchangeable.

Agreement is checked three ways: each backend against a permutation
oracle, the two backends against each other on larger random inputs, and
the environment switch that forces the pure twin.
"""

import math
import os
import random
import subprocess
import sys

import pytest

import oracle_naive
from onroute import _kernels
from onroute._kernels import pure


def random_chain(rng, n, closed):
    pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(n + 1)]

    def dist(i, j):
        return math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])

    enter = [dist(0, i + 1) for i in range(n)]
    step = [[dist(i + 1, j + 1) for j in range(n)] for i in range(n)]
    leave = enter[:] if closed else None
    return enter, step, leave


def chain_cost(enter, step, leave, order):
    c = enter[order[0]]
    for a, b in zip(order, order[1:]):
        c += step[a][b]
    if leave is not None:
        c += leave[order[-1]]
    return c


@pytest.mark.parametrize("closed", [False, True])
def test_hk_order_matches_enumeration(closed):
    rng = random.Random(42)
    for trial in range(60):
        n = rng.randint(1, 7)
        enter, step, leave = random_chain(rng, n, closed)
        cost, order = _kernels.hk_order(enter, step, leave)
        assert sorted(order) == list(range(n))
        assert cost == pytest.approx(chain_cost(enter, step, leave, order))
        import itertools

        best = min(
            chain_cost(enter, step, leave, p)
            for p in itertools.permutations(range(n))
        )
        assert cost == pytest.approx(best), f"trial {trial}"


def test_backends_agree_on_orders():
    rng = random.Random(7)
    for _ in range(40):
        n = rng.randint(1, 9)
        closed = rng.random() < 0.5
        enter, step, leave = random_chain(rng, n, closed)
        got = _kernels.hk_order(enter, step, leave)
        ref = pure.hk_order(enter, step, leave)
        assert got[0] == pytest.approx(ref[0], abs=1e-9)
        assert tuple(got[1]) == tuple(ref[1])


def bb_inputs(rng, n, k, mode):
    reqs = []
    for _ in range(n):
        t = rng.uniform(0, 6)
        e = rng.uniform(-8, 8)
        d = rng.uniform(-8, 8) if mode == "darp" else e
        reqs.append((t, e, d))
    enter = [abs(e) for _, e, _ in reqs]
    step = [[abs(d1 - e2) for _, e2, _ in reqs] for _, _, d1 in reqs]
    leave = [abs(d) for _, _, d in reqs]
    inner = [abs(d - e) for _, e, d in reqs]
    release = [t for t, _, _ in reqs]
    return reqs, enter, step, leave, inner, release


@pytest.mark.parametrize("mode", ["tsp", "darp"])
@pytest.mark.parametrize("homing", [False, True])
def test_bb_matches_naive_makespan(mode, homing):
    rng = random.Random(hash((mode, homing)) % 10000)
    for _ in range(30):
        n = rng.randint(1, 5)
        k = rng.randint(1, 2)
        reqs, enter, step, leave, inner, release = bb_inputs(rng, n, k, mode)
        got = _kernels.bb_min_makespan(k, enter, step, leave, inner, release, homing)
        want = oracle_naive.min_makespan(
            oracle_naive.line_dist,
            0.0,
            reqs,
            k=k,
            mode=mode,
            ending="homing" if homing else "nomadic",
        )
        assert got[0] == pytest.approx(want, abs=1e-9)


def test_bb_backends_agree():
    rng = random.Random(99)
    for _ in range(25):
        n = rng.randint(1, 6)
        k = rng.randint(1, 3)
        _, enter, step, leave, inner, release = bb_inputs(rng, n, k, "darp")
        homing = rng.random() < 0.5
        got = _kernels.bb_min_makespan(k, enter, step, leave, inner, release, homing)
        ref = pure.bb_min_makespan(k, enter, step, leave, inner, release, homing)
        assert got[0] == pytest.approx(ref[0], abs=1e-9)
        assert [tuple(c) for c in got[1]] == [tuple(c) for c in ref[1]]


@pytest.mark.parametrize("backend", [_kernels, pure])
def test_empty_inputs(backend):
    assert backend.hk_order([], [], None) == (0.0, [])
    value, chains = backend.bb_min_makespan(2, [], [], [], [], [], False)
    assert value == 0.0
    assert [tuple(c) for c in chains] == [(), ()]


def test_dp_size_limit_shared():
    assert _kernels.MAX_DP_ITEMS == pure.MAX_DP_ITEMS
    assert _kernels.MAX_DP_ITEMS >= 14


def test_env_switch_selects_pure_backend():
    env = dict(os.environ, ONROUTE_PURE_KERNELS="1")
    out = subprocess.run(
        [sys.executable, "-c", "import onroute; print(onroute.KERNEL_BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "pure"


def test_default_backend_is_reported():
    assert _kernels.BACKEND in ("compiled", "pure")
