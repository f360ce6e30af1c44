"""Compiled square assignment kernel.

Shortest-augmenting-path potentials method for the minimization linear
assignment problem, O(n^3). This is the compiled twin of
``ovfact._lap_py.solve_square``: same float operation order, same
first-minimum tie handling, bit-identical outputs. Keep them in sync.
"""

import numpy as np


def solve_square(cost):
    cost_arr = np.ascontiguousarray(cost, dtype=np.float64)
    if cost_arr.ndim != 2 or cost_arr.shape[0] != cost_arr.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost_arr.shape}")
    cdef Py_ssize_t n = cost_arr.shape[0]
    row_to_col_arr = np.empty(n, dtype=np.int64)
    u_arr = np.zeros(n, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    if n == 0:
        return row_to_col_arr, u_arr, v_arr[:0]

    p_arr = np.full(n + 1, -1, dtype=np.int64)
    minv_arr = np.empty(n, dtype=np.float64)
    way_arr = np.zeros(n, dtype=np.int64)
    used_arr = np.zeros(n + 1, dtype=np.uint8)

    cdef double[:, ::1] cost_v = cost_arr
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] minv = minv_arr
    cdef long long[::1] p = p_arr
    cdef long long[::1] way = way_arr
    cdef long long[::1] row_to_col = row_to_col_arr
    cdef unsigned char[::1] used = used_arr

    cdef Py_ssize_t i, j, j0, j1, j_prev, i0
    cdef double cur, delta
    cdef double INF = float("inf")

    for i in range(n):
        p[n] = i
        j0 = n
        for j in range(n):
            minv[j] = INF
            way[j] = 0
            used[j] = 0
        used[n] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            for j in range(n):
                if used[j] == 0:
                    cur = cost_v[i0, j] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
            delta = INF
            j1 = -1
            for j in range(n):
                if used[j] == 0 and minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j] == 1:
                    u[p[j]] += delta
                    v[j] -= delta
            for j in range(n):
                if used[j] == 0:
                    minv[j] -= delta
            j0 = j1
            if p[j0] < 0:
                break
        while j0 != n:
            j_prev = way[j0]
            p[j0] = p[j_prev]
            j0 = j_prev

    for j in range(n):
        row_to_col[p[j]] = j
    return row_to_col_arr, u_arr, v_arr[:n]
