"""Hot numeric kernels: shortest paths on implicit grid graphs and
Lax-Oleinik value iteration.

Two lanes are provided.  The default lane compiles tight loops with numba
(@njit, nogil, cached); the fallback lane uses scipy.sparse.csgraph and
vectorized numpy.  Set HJMETRIC_NO_NUMBA=1 to force the fallback, e.g. on
machines without a working numba toolchain.  benchmarks/bench_kernels.py
times one lane against the other.

Graph encoding: nodes are C-order flat indices of a box grid; `steps[k]`
is the flat-index increment of stencil offset k and `weights[i, k]` the
weight of the edge i -> i + steps[k], with +inf marking edges that leave
the box.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("HJMETRIC_NO_NUMBA", "").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - exercised via the env flag instead
        USE_NUMBA = False

_INF = np.inf


# ---------------------------------------------------------------------------
# numpy / scipy fallback lane
# ---------------------------------------------------------------------------


def _to_csr(weights: np.ndarray, steps: np.ndarray):
    from scipy.sparse import csr_matrix

    n, k = weights.shape
    finite = np.isfinite(weights)
    rows = np.repeat(np.arange(n, dtype=np.int64), k)[finite.ravel()]
    cols = (np.arange(n, dtype=np.int64)[:, None] + steps[None, :]).ravel()[finite.ravel()]
    data = weights.ravel()[finite.ravel()]
    return csr_matrix((data, (rows, cols)), shape=(n, n))


def shortest_numpy(weights: np.ndarray, steps: np.ndarray, init: np.ndarray):
    """Multi-source shortest distances via scipy.sparse.csgraph.

    Sources are the finite entries of `init`, with their values as initial
    labels.  Returns (dist, has_negative_cycle).
    """
    from scipy.sparse import csr_matrix, vstack, hstack
    from scipy.sparse.csgraph import dijkstra, bellman_ford, NegativeCycleError

    n = init.shape[0]
    src = np.isfinite(init)
    if not np.any(src):
        return np.full(n, _INF), False
    base = _to_csr(weights, steps)
    # Virtual super-source carrying the initial labels; a constant shift
    # keeps its out-edges nonnegative so the dijkstra fast path stays valid.
    lift = float(min(0.0, np.min(init[src])))
    srows = np.zeros(int(src.sum()), dtype=np.int64)
    scols = np.nonzero(src)[0].astype(np.int64)
    sdata = init[src] - lift
    super_row = csr_matrix((sdata, (srows, scols)), shape=(1, n))
    g = vstack(
        [hstack([base, csr_matrix((n, 1))]), hstack([super_row, csr_matrix((1, 1))])]
    ).tocsr()
    nonneg = np.all(weights[np.isfinite(weights)] >= 0.0) if np.isfinite(weights).any() else True
    if nonneg:
        d = dijkstra(g, indices=[n])[0][:n]
        return d + lift, False
    try:
        d = bellman_ford(g, indices=[n])[0][:n]
    except NegativeCycleError:
        return np.full(n, _INF), True
    return d + lift, False


def value_iter_numpy(
    cost: np.ndarray,
    offsets: np.ndarray,
    shape: tuple,
    on_reach_limit: np.ndarray,
    n_sweeps: int,
    u0: np.ndarray,
    watch: np.ndarray = None,
):
    """Vectorized Lax-Oleinik sweeps.

    cost[i, k] is the one-step cost of arriving at node i along offset k
    (+inf when the predecessor leaves the box).  Returns the final value
    array and the final sweep's fraction of watched, settled nodes whose
    optimal step sat on the stencil reach limit.  Nodes on the expanding
    reachability frontier (infinite before the sweep) are necessarily at
    the limit and do not count; `watch` restricts the census to the region
    whose values will actually be read.
    """
    u = u0.reshape(shape).copy()
    k_count = offsets.shape[0]
    cost_nd = cost.reshape(shape + (k_count,))
    watched = (
        np.ones(shape, dtype=bool) if watch is None else watch.reshape(shape).astype(bool)
    )
    worst = 0.0
    for _ in range(n_sweeps):
        prev_finite = np.isfinite(u)
        best = np.full(shape, _INF)
        at_limit = np.zeros(shape, dtype=bool)
        for k in range(k_count):
            dst = tuple(
                slice(max(int(z), 0), dim + min(int(z), 0))
                for z, dim in zip(offsets[k], shape)
            )
            src = tuple(
                slice(max(-int(z), 0), dim + min(-int(z), 0))
                for z, dim in zip(offsets[k], shape)
            )
            cand = u[src] + cost_nd[dst + (k,)]
            better = cand < best[dst]
            if np.any(better):
                region = best[dst]
                region[better] = cand[better]
                best[dst] = region
                flag = at_limit[dst]
                flag[better] = bool(on_reach_limit[k])
                at_limit[dst] = flag
        u = best
        settled = np.isfinite(u) & prev_finite & watched
        if settled.any():
            worst = float(at_limit[settled].mean())
    return u.ravel(), worst


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True, nogil=True)
    def _heap_push(hd, hn, size, d, node):
        if size >= hd.shape[0]:
            new_hd = np.empty(hd.shape[0] * 2, np.float64)
            new_hn = np.empty(hn.shape[0] * 2, np.int64)
            new_hd[: hd.shape[0]] = hd
            new_hn[: hn.shape[0]] = hn
            hd, hn = new_hd, new_hn
        i = size
        hd[i] = d
        hn[i] = node
        while i > 0:
            parent = (i - 1) // 2
            if hd[parent] <= hd[i]:
                break
            hd[parent], hd[i] = hd[i], hd[parent]
            hn[parent], hn[i] = hn[i], hn[parent]
            i = parent
        return hd, hn, size + 1

    @njit(cache=True, nogil=True)
    def _heap_pop(hd, hn, size):
        top_d = hd[0]
        top_n = hn[0]
        size -= 1
        hd[0] = hd[size]
        hn[0] = hn[size]
        i = 0
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            small = left
            right = left + 1
            if right < size and hd[right] < hd[left]:
                small = right
            if hd[i] <= hd[small]:
                break
            hd[i], hd[small] = hd[small], hd[i]
            hn[i], hn[small] = hn[small], hn[i]
            i = small
        return top_d, top_n, size

    @njit(cache=True, nogil=True)
    def _dijkstra_njit(weights, steps, init):
        n, k_count = weights.shape
        dist = init.copy()
        done = np.zeros(n, np.uint8)
        hd = np.empty(4 * n + 16, np.float64)
        hn = np.empty(4 * n + 16, np.int64)
        size = 0
        for i in range(n):
            if np.isfinite(dist[i]):
                hd, hn, size = _heap_push(hd, hn, size, dist[i], i)
        while size > 0:
            d, i, size = _heap_pop(hd, hn, size)
            if done[i] or d > dist[i]:
                continue
            done[i] = 1
            for k in range(k_count):
                w = weights[i, k]
                if not np.isfinite(w):
                    continue
                j = i + steps[k]
                nd = d + w
                if nd < dist[j]:
                    dist[j] = nd
                    hd, hn, size = _heap_push(hd, hn, size, nd, j)
        return dist

    @njit(cache=True, nogil=True)
    def _spfa_njit(weights, steps, init):
        """Label-correcting sweep with per-node relaxation counters.

        A node relaxed more than n times witnesses a negative cycle.
        Returns (dist, cycle_flag).
        """
        n, k_count = weights.shape
        dist = init.copy()
        in_queue = np.zeros(n, np.uint8)
        relax_count = np.zeros(n, np.int64)
        queue = np.empty(n + 1, np.int64)
        head = 0
        tail = 0
        count = 0
        for i in range(n):
            if np.isfinite(dist[i]):
                queue[tail] = i
                tail = (tail + 1) % (n + 1)
                in_queue[i] = 1
                count += 1
        while count > 0:
            i = queue[head]
            head = (head + 1) % (n + 1)
            in_queue[i] = 0
            count -= 1
            di = dist[i]
            for k in range(k_count):
                w = weights[i, k]
                if not np.isfinite(w):
                    continue
                j = i + steps[k]
                nd = di + w
                if nd < dist[j]:
                    dist[j] = nd
                    relax_count[j] += 1
                    if relax_count[j] > n:
                        return dist, True
                    if not in_queue[j]:
                        queue[tail] = j
                        tail = (tail + 1) % (n + 1)
                        in_queue[j] = 1
                        count += 1
        return dist, False

    @njit(cache=True, nogil=True)
    def _value_iter_njit(cost, steps, on_reach_limit, n_sweeps, u0, pred_ok, watch):
        n, k_count = cost.shape
        u = u0.copy()
        nxt = np.empty(n, np.float64)
        worst = 0.0
        for _ in range(n_sweeps):
            limit_hits = 0
            settled = 0
            for i in range(n):
                best = _INF
                best_limit = False
                for k in range(k_count):
                    c = cost[i, k]
                    if not np.isfinite(c) or not pred_ok[i, k]:
                        continue
                    cand = u[i - steps[k]] + c
                    if cand < best:
                        best = cand
                        best_limit = on_reach_limit[k]
                nxt[i] = best
                # frontier nodes (infinite before this sweep) are at the
                # reach limit by construction and are not starvation
                if watch[i] and np.isfinite(best) and np.isfinite(u[i]):
                    settled += 1
                    if best_limit:
                        limit_hits += 1
            u, nxt = nxt, u
            if settled > 0:
                worst = limit_hits / settled
        return u.copy(), worst

    def shortest_numba(weights, steps, init):
        finite = np.isfinite(weights)
        nonneg = bool(np.all(weights[finite] >= 0.0)) if finite.any() else True
        if nonneg:
            return _dijkstra_njit(weights, steps, init), False
        dist, cyc = _spfa_njit(weights, steps, init)
        return dist, bool(cyc)

    def value_iter_numba(cost, offsets, shape, on_reach_limit, n_sweeps, u0, watch=None):
        steps = _flat_steps(offsets, shape)
        pred_ok = _pred_valid(offsets, shape)
        n = cost.shape[0]
        watch_arr = (
            np.ones(n, dtype=np.bool_) if watch is None else watch.astype(np.bool_)
        )
        u, worst = _value_iter_njit(
            cost, steps, on_reach_limit.astype(np.bool_), n_sweeps, u0, pred_ok, watch_arr
        )
        return u, float(worst)


# ---------------------------------------------------------------------------
# shared helpers and dispatch
# ---------------------------------------------------------------------------


def _flat_steps(offsets: np.ndarray, shape: tuple) -> np.ndarray:
    strides = np.ones(len(shape), dtype=np.int64)
    for j in range(len(shape) - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]
    return offsets.astype(np.int64) @ strides


def _axis_index_grids(shape: tuple):
    return np.meshgrid(*[np.arange(dim, dtype=np.int64) for dim in shape], indexing="ij")


def edge_valid_mask(offsets: np.ndarray, shape: tuple) -> np.ndarray:
    """valid[i, k]: node i + offset k stays inside the box grid."""
    grids = _axis_index_grids(shape)
    n = int(np.prod(shape))
    out = np.ones((n, offsets.shape[0]), dtype=bool)
    for k, z in enumerate(offsets):
        ok = np.ones(shape, dtype=bool)
        for ax, dz in enumerate(z):
            idx = grids[ax] + int(dz)
            ok &= (idx >= 0) & (idx < shape[ax])
        out[:, k] = ok.ravel()
    return out


def _pred_valid(offsets: np.ndarray, shape: tuple) -> np.ndarray:
    """valid[i, k]: node i - offset k stays inside the box grid."""
    return edge_valid_mask(-offsets, shape)


def shortest_paths(weights: np.ndarray, steps: np.ndarray, init: np.ndarray):
    """Dispatch multi-source shortest distances to the active lane.

    Nonnegative weights take the heap path; otherwise a label-correcting
    sweep with negative-cycle detection runs.  Returns (dist, cycle_flag).
    """
    if USE_NUMBA:
        return shortest_numba(weights, steps, init)
    return shortest_numpy(weights, steps, init)


def value_iteration(cost, offsets, shape, on_reach_limit, n_sweeps, u0, watch=None):
    """Dispatch Lax-Oleinik sweeps to the active lane."""
    if USE_NUMBA:
        return value_iter_numba(cost, offsets, shape, on_reach_limit, n_sweeps, u0, watch)
    return value_iter_numpy(cost, offsets, shape, on_reach_limit, n_sweeps, u0, watch)
