# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics mirror onroute._kernels.pure line for line;
floating point additions and comparisons happen in the same order so both
backends return bit-identical costs and orders. Edit the pure module first,
then port."""

import math

import numpy as np

cimport numpy as cnp

cnp.import_array()

MAX_DP_ITEMS = 18

DEF _STACK_MAX = 24


def hk_order(enter, step, leave=None):
    """Cheapest order of all items along one anchored chain (see pure twin)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] enter_a = np.ascontiguousarray(enter, dtype=np.float64)
    cdef Py_ssize_t n = enter_a.shape[0]
    if n == 0:
        return 0.0, []
    if n > MAX_DP_ITEMS:
        raise ValueError(f"chain DP limited to {MAX_DP_ITEMS} items, got {n}")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] step_a = np.ascontiguousarray(step, dtype=np.float64)
    cdef bint closed = leave is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=1] leave_a
    if closed:
        leave_a = np.ascontiguousarray(leave, dtype=np.float64)
    else:
        leave_a = np.zeros(1, dtype=np.float64)

    cdef Py_ssize_t full = 1 << n
    cdef Py_ssize_t done = full - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.full((full, n), np.inf, dtype=np.float64)

    cdef double inf = math.inf
    cdef Py_ssize_t mask, i, j, cur
    cdef double cand, best, target, base

    for j in range(n):
        g[done, j] = leave_a[j] if closed else 0.0

    for mask in range(full - 2, 0, -1):
        for i in range(n):
            if not (mask >> i) & 1:
                continue
            best = inf
            for j in range(n):
                if (mask >> j) & 1:
                    continue
                cand = step_a[i, j] + g[mask | (1 << j), j]
                if cand < best:
                    best = cand
            g[mask, i] = best

    best = inf
    for j in range(n):
        cand = enter_a[j] + g[1 << j, j]
        if cand < best:
            best = cand

    order = []
    mask = 0
    cur = -1
    while mask != done:
        target = best if cur < 0 else g[mask, cur]
        for j in range(n):
            if (mask >> j) & 1:
                continue
            base = enter_a[j] if cur < 0 else step_a[cur, j]
            if base + g[mask | (1 << j), j] == target:
                order.append(j)
                mask |= 1 << j
                cur = j
                break
    return best, order


cdef struct _BBState:
    Py_ssize_t k
    Py_ssize_t m
    bint homing
    double* enter
    double* step
    double* leave
    double* inner
    double* release
    double* tail_floor
    double* finish
    cnp.int16_t* chains   # k rows of length m
    Py_ssize_t* lens
    double best


cdef double _chain_finish(_BBState* st, Py_ssize_t srv) noexcept:
    cdef double t = 0.0
    cdef Py_ssize_t prev = -1
    cdef Py_ssize_t pos, it
    cdef double arrive, rel, start
    cdef Py_ssize_t m = st.m
    cdef cnp.int16_t* seq = st.chains + srv * m
    for pos in range(st.lens[srv]):
        it = seq[pos]
        if prev < 0:
            arrive = st.enter[it]
        else:
            arrive = t + st.step[prev * m + it]
        rel = st.release[it]
        start = arrive if arrive > rel else rel
        t = start + st.inner[it]
        prev = it
    if st.homing and prev >= 0:
        t = t + st.leave[prev]
    return t


cdef void _descend(_BBState* st, Py_ssize_t depth, double bound, list best_out):
    cdef Py_ssize_t srv, s2, pos, q, L
    cdef double old_finish, f, nb
    cdef bint dup
    cdef Py_ssize_t m = st.m
    cdef cnp.int16_t* seq

    if depth == m:
        if bound < st.best:
            st.best = bound
            best_out[0] = bound
            best_out[1] = [
                [st.chains[s2 * m + q] for q in range(st.lens[s2])]
                for s2 in range(st.k)
            ]
        return
    if st.tail_floor[depth] >= st.best:
        return

    for srv in range(st.k):
        L = st.lens[srv]
        if L == 0:
            dup = False
            for s2 in range(srv):
                if st.lens[s2] == 0:
                    dup = True
                    break
            if dup:
                continue  # identical servers: one empty chain stands for all
        seq = st.chains + srv * m
        old_finish = st.finish[srv]
        for pos in range(L + 1):
            for q in range(L, pos, -1):
                seq[q] = seq[q - 1]
            seq[pos] = <cnp.int16_t> depth
            st.lens[srv] = L + 1
            f = _chain_finish(st, srv)
            st.finish[srv] = f
            nb = bound if bound > f else f
            if nb < st.best:
                _descend(st, depth + 1, nb, best_out)
            for q in range(pos, L):
                seq[q] = seq[q + 1]
            st.lens[srv] = L
        st.finish[srv] = old_finish


def bb_min_makespan(k, enter, step, leave, inner, release, homing):
    """Exact min-makespan split of items among ``k`` servers (see pure twin)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] enter_a = np.ascontiguousarray(enter, dtype=np.float64)
    cdef Py_ssize_t m = enter_a.shape[0]
    cdef Py_ssize_t kk = k
    if m == 0:
        return 0.0, [[] for _ in range(k)]
    # step only becomes a 2-D buffer once it is known to be nonempty
    cdef cnp.ndarray[cnp.float64_t, ndim=2] step_a = np.ascontiguousarray(step, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] leave_a = np.ascontiguousarray(leave, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inner_a = np.ascontiguousarray(inner, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] release_a = np.ascontiguousarray(release, dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] tail = np.zeros(m + 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double lb
    cdef bint hom = bool(homing)
    for i in range(m - 1, -1, -1):
        lb = release_a[i] + inner_a[i]
        if hom:
            lb = lb + leave_a[i]
        tail[i] = lb if lb > tail[i + 1] else tail[i + 1]

    cdef cnp.ndarray[cnp.int16_t, ndim=2] chains = np.zeros((kk, m), dtype=np.int16)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] finish = np.zeros(kk, dtype=np.float64)
    cdef Py_ssize_t[_STACK_MAX] lens_buf
    if kk > _STACK_MAX:
        raise ValueError(f"at most {_STACK_MAX} servers supported, got {k}")
    for i in range(kk):
        lens_buf[i] = 0

    cdef _BBState st
    st.k = kk
    st.m = m
    st.homing = hom
    st.enter = <double*> enter_a.data
    st.step = <double*> step_a.data
    st.leave = <double*> leave_a.data
    st.inner = <double*> inner_a.data
    st.release = <double*> release_a.data
    st.tail_floor = <double*> tail.data
    st.finish = <double*> finish.data
    st.chains = <cnp.int16_t*> chains.data
    st.lens = &lens_buf[0]
    st.best = math.inf

    best_out = [math.inf, None]
    _descend(&st, 0, 0.0, best_out)
    return best_out[0], [[int(x) for x in row] for row in best_out[1]]
