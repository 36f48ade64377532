"""Pure-numpy split-search kernel (fallback backend)."""

from __future__ import annotations

import numpy as np


def scan_feature(v: np.ndarray, ys: np.ndarray):
    """Scan one sorted feature column for the best Gini split.

    ``v`` is sorted ascending (n,), ``ys`` is the 0/1 target matrix (n, T)
    reordered to match.  Returns (weighted_child_impurity, threshold) for
    the best boundary, or None when the column is constant.  Ties go to the
    lowest threshold.
    """
    n, t = ys.shape
    if n < 2:
        return None
    valid = v[1:] > v[:-1]
    if not valid.any():
        return None
    cs = np.cumsum(ys, axis=0)
    total = cs[-1]
    lp = cs[:-1]
    rp = total - lp
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    wg = (2.0 * lp * (nl - lp) / nl + 2.0 * rp * (nr - rp) / nr).sum(axis=1) / n
    wg[~valid] = np.inf
    j = int(np.argmin(wg))
    thr = 0.5 * (v[j] + v[j + 1])
    return float(wg[j]), float(thr)
