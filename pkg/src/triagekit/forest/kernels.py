"""Split-kernel backend selection: compiled extension if built, numpy otherwise."""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - depends on how the package was built
    from . import _split_cy as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover
    from . import _split_np as _impl

    BACKEND = "numpy"

from . import _split_np

scan_feature = _impl.scan_feature
scan_feature_numpy = _split_np.scan_feature


def parent_impurity(ys: np.ndarray) -> float:
    """Per-sample Gini impurity summed over targets."""
    n = ys.shape[0]
    p = ys.mean(axis=0)
    return float(np.sum(2.0 * p * (1.0 - p)))


def best_split(x: np.ndarray, ys: np.ndarray, feature_ids: np.ndarray):
    """Best Gini split over the given feature columns.

    Returns (feature_id, threshold, gain) or None if nothing improves.
    Feature ids are scanned in sorted order so ties are deterministic.
    """
    g_parent = parent_impurity(ys)
    ysf = np.ascontiguousarray(ys, dtype=np.float64)
    best = None
    for f in np.sort(feature_ids):
        col = x[:, f]
        order = np.argsort(col, kind="mergesort")
        v = np.ascontiguousarray(col[order], dtype=np.float64)
        res = scan_feature(v, np.ascontiguousarray(ysf[order]))
        if res is None:
            continue
        wg, thr = res
        gain = g_parent - wg
        if best is None or gain > best[2]:
            best = (int(f), float(thr), float(gain))
    if best is None or best[2] <= 1e-12:
        return None
    return best
