"""Pure-Python square assignment kernel (numpy-vectorized inner loop).

Fallback for the compiled ``ovfact._lap`` extension. Both implement the
same shortest-augmenting-path potentials method for the minimization linear
assignment problem, O(n^3), with identical float operation order and
identical tie handling (first minimum in column-index order), so the two
kernels produce bit-identical assignments and duals. Keep them in sync.

Returns (row_to_col, u, v) where u, v are dual potentials satisfying
cost[i, j] - u[i] - v[j] >= 0 (up to rounding) with equality on assigned
edges; the caller uses them to recover the set of optimal-tie edges.
"""

from __future__ import annotations

import numpy as np


def solve_square(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    n = cost.shape[0]
    row_to_col = np.empty(n, dtype=np.int64)
    u = np.zeros(n, dtype=np.float64)
    # Column n is the virtual start column for each augmenting search.
    v = np.zeros(n + 1, dtype=np.float64)
    if n == 0:
        return row_to_col, u, v[:n]

    p = np.full(n + 1, -1, dtype=np.int64)  # p[j]: row matched to column j
    for i in range(n):
        p[n] = i
        j0 = n
        minv = np.full(n, np.inf)
        way = np.zeros(n, dtype=np.int64)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[:n]
            cur = cost[i0] - u[i0] - v[:n]
            better = free & (cur < minv)
            minv = np.where(better, cur, minv)
            way = np.where(better, j0, way)
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = float(masked[j1])
            used_cols = np.nonzero(used)[0]
            u[p[used_cols]] += delta
            v[used_cols] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] < 0:
                break
        while j0 != n:
            j_prev = int(way[j0])
            p[j0] = p[j_prev]
            j0 = j_prev

    row_to_col[p[:n]] = np.arange(n)
    return row_to_col, u, v[:n]
