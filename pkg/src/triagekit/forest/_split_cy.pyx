# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-search kernel: per-column Gini scan."""

import numpy as np


def scan_feature(double[::1] v, double[:, ::1] ys):
    """Mirror of the numpy kernel; see _split_np.scan_feature."""
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t t = ys.shape[1]
    if n < 2:
        return None

    cdef Py_ssize_t i, j, k
    cdef bint any_valid = False
    for i in range(n - 1):
        if v[i + 1] > v[i]:
            any_valid = True
            break
    if not any_valid:
        return None

    left_arr = np.zeros(t, dtype=np.float64)
    total_arr = np.zeros(t, dtype=np.float64)
    cdef double[::1] left = left_arr
    cdef double[::1] total = total_arr
    for i in range(n):
        for k in range(t):
            total[k] += ys[i, k]

    cdef double best_wg = 1e308
    cdef Py_ssize_t best_j = -1
    cdef double nl, nr, lp, rp, acc
    for j in range(n - 1):
        for k in range(t):
            left[k] += ys[j, k]
        if v[j + 1] <= v[j]:
            continue
        nl = j + 1
        nr = n - nl
        acc = 0.0
        for k in range(t):
            lp = left[k]
            rp = total[k] - lp
            acc += 2.0 * lp * (nl - lp) / nl + 2.0 * rp * (nr - rp) / nr
        acc = acc / n
        if acc < best_wg:
            best_wg = acc
            best_j = j
    if best_j < 0:
        return None
    return best_wg, 0.5 * (v[best_j] + v[best_j + 1])
