"""Bayesian lift tables, target filtering, and ranking metrics.

Lift is computed with exact integer counting.  The ranking metrics pool
every (instance, label) cell ("micro"): PR-AUC is the step integral of the
precision-recall curve over score thresholds, ROC-AUC is the Mann-Whitney
statistic with tied scores averaged, and nDCG uses binary gains with the
worst-case ordering inside score ties.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.stats import rankdata

TARGET_KINDS = ("diagnosis", "medication", "lab", "imaging")

_OUTCOME_FIELD = {
    "diagnosis": "diagnoses",
    "medication": "medications",
    "lab": "labs",
    "imaging": "imaging",
}


@dataclass
class LiftTable:
    """lift[(target, cc)] = P[target | cc] / P[target], with supporting counts."""

    entries: dict[tuple[str, str], float]
    joint_counts: dict[tuple[str, str], int]
    target_counts: dict[str, int]
    cc_counts: dict[str, int]
    n: int

    def lift(self, target: str, cc: str) -> Optional[float]:
        return self.entries.get((target, cc))


def bayesian_lift(encounters: Iterable, target_kind: str) -> LiftTable:
    """Count-based lift of each target given each chief complaint.

    ``encounters`` yields objects (or dicts) with ``chief_complaints`` and an
    outcome set named by ``target_kind``.  Pairs with zero cc count cannot
    occur (a cc only enters via an encounter); targets with zero marginal
    count are simply absent.
    """
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"target_kind must be one of {TARGET_KINDS}")
    field_name = _OUTCOME_FIELD[target_kind]

    joint: Counter = Counter()
    target_counts: Counter = Counter()
    cc_counts: Counter = Counter()
    n = 0
    for enc in encounters:
        if isinstance(enc, dict):
            ccs, targets = enc["chief_complaints"], enc[field_name]
        else:
            ccs, targets = enc.chief_complaints, getattr(enc.outcomes, field_name)
        n += 1
        targets = set(targets)
        ccs = set(ccs)
        for t in targets:
            target_counts[t] += 1
        for c in ccs:
            cc_counts[c] += 1
            for t in targets:
                joint[(t, c)] += 1
    if n == 0:
        raise ValueError("empty dataset")

    entries: dict[tuple[str, str], float] = {}
    for c, n_c in cc_counts.items():
        for t, n_t in target_counts.items():
            n_tc = joint.get((t, c), 0)
            # exact ratio of counts: (n_tc/n_c) / (n_t/n)
            entries[(t, c)] = (n_tc * n) / (n_c * n_t)
    return LiftTable(
        entries=entries,
        joint_counts=dict(joint),
        target_counts=dict(target_counts),
        cc_counts=dict(cc_counts),
        n=n,
    )


def filter_targets(
    lift: LiftTable, threshold: float = 2.0, min_count: int = 100
) -> set[tuple[str, str]]:
    """Keep (target, cc) pairs with lift strictly above threshold and enough support."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    kept = set()
    for (t, c), value in lift.entries.items():
        if value > threshold and lift.joint_counts.get((t, c), 0) >= min_count:
            kept.add((t, c))
    return kept


@dataclass(frozen=True)
class RankMetrics:
    micro_pr_auc: float
    micro_roc_auc: float
    ndcg: float


def micro_pr_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Step integral of precision over recall, pooled over all cells."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(truth, dtype=bool).ravel()
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("PR-AUC undefined with no positive labels")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # one threshold per distinct score: cumulative counts at group ends
    boundary = np.nonzero(np.diff(s))[0]
    ends = np.concatenate([boundary, [len(s) - 1]])
    tp = np.cumsum(y)[ends]
    pred_pos = ends + 1
    precision = tp / pred_pos
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def micro_roc_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Mann-Whitney U over pooled cells; ties get average rank."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(truth, dtype=bool).ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ndcg_score(scores: np.ndarray, truth: np.ndarray, k: Optional[int] = None) -> float:
    """Mean per-instance nDCG with binary gains.

    Ties are resolved worst-case (positives ranked after tied negatives).
    Instances without positives are skipped.
    """
    s = np.atleast_2d(np.asarray(scores, dtype=float))
    y = np.atleast_2d(np.asarray(truth, dtype=bool))
    vals = []
    for i in range(s.shape[0]):
        n_pos = int(y[i].sum())
        if n_pos == 0:
            continue
        # sort by score desc; inside ties, negatives first (worst case)
        order = np.lexsort((y[i].astype(int), -s[i]))
        rel = y[i][order]
        if k is not None:
            rel = rel[:k]
            n_ideal = min(n_pos, k)
        else:
            n_ideal = n_pos
        positions = np.nonzero(rel)[0] + 1
        dcg = float(np.sum(1.0 / np.log2(positions + 1)))
        idcg = float(np.sum(1.0 / np.log2(np.arange(1, n_ideal + 1) + 1)))
        vals.append(dcg / idcg)
    if not vals:
        raise ValueError("nDCG undefined: no instance has a positive label")
    return float(np.mean(vals))


def rank_metrics(
    scores: np.ndarray, truth: np.ndarray, ndcg_k: Optional[int] = None
) -> RankMetrics:
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=bool))
    if scores.shape != truth.shape:
        raise ValueError(f"shape mismatch: {scores.shape} vs {truth.shape}")
    return RankMetrics(
        micro_pr_auc=micro_pr_auc(scores, truth),
        micro_roc_auc=micro_roc_auc(scores, truth),
        ndcg=ndcg_score(scores, truth, k=ndcg_k),
    )
