"""Time the compiled chain kernels against their pure Python twins.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Builds random Euclidean chains, feeds the same arrays to both backends
and prints per-call wall time plus the speedup. Answers are compared on
every call, so this doubles as a slow agreement check.
"""

import argparse
import math
import random
import time

from onroute._kernels import pure

try:
    from onroute._kernels import _core
except ImportError:
    _core = None


def chain_inputs(rng, n):
    pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(n + 1)]

    def dist(i, j):
        return math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])

    enter = [dist(0, i + 1) for i in range(n)]
    step = [[dist(i + 1, j + 1) for j in range(n)] for i in range(n)]
    return enter, step


def time_call(fn, args, repeat):
    best = math.inf
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, value


def bench_hk(repeat):
    rng = random.Random(7)
    print("hk_order (anchored chain DP)")
    print(f"{'n':>4} {'pure':>12} {'compiled':>12} {'speedup':>9}")
    for n in (8, 11, 14):
        enter, step = chain_inputs(rng, n)
        args = (enter, step, enter)
        t_pure, v_pure = time_call(pure.hk_order, args, repeat)
        if _core is None:
            print(f"{n:>4} {t_pure * 1e3:>10.2f}ms {'-':>12} {'-':>9}")
            continue
        t_comp, v_comp = time_call(_core.hk_order, args, repeat)
        assert abs(v_pure[0] - v_comp[0]) < 1e-9
        print(f"{n:>4} {t_pure * 1e3:>10.2f}ms {t_comp * 1e3:>10.2f}ms "
              f"{t_pure / t_comp:>8.1f}x")


def bench_bb(repeat):
    rng = random.Random(11)
    print("bb_min_makespan (k-server split search)")
    print(f"{'k/m':>5} {'pure':>12} {'compiled':>12} {'speedup':>9}")
    for k, m in ((2, 7), (2, 8), (3, 7)):
        enter, step = chain_inputs(rng, m)
        inner = [0.0] * m
        release = [round(rng.uniform(0, 4), 3) for _ in range(m)]
        args = (k, enter, step, enter, inner, release, True)
        t_pure, v_pure = time_call(pure.bb_min_makespan, args, repeat)
        if _core is None:
            print(f"{k}/{m:>3} {t_pure * 1e3:>10.2f}ms {'-':>12} {'-':>9}")
            continue
        t_comp, v_comp = time_call(_core.bb_min_makespan, args, repeat)
        assert abs(v_pure[0] - v_comp[0]) < 1e-9
        print(f"{k}/{m:>3} {t_pure * 1e3:>10.2f}ms {t_comp * 1e3:>10.2f}ms "
              f"{t_pure / t_comp:>8.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3,
                        help="timed repetitions per case, best one counts")
    args = parser.parse_args()
    if _core is None:
        print("compiled backend not available; timing the pure twin only")
    bench_hk(args.repeat)
    print()
    bench_bb(args.repeat)


if __name__ == "__main__":
    main()
