"""CART trees and per-cohort random forests over concept-assertion features.

Trees are grown greedily on Gini impurity summed across the one-vs-rest
diagnosis targets.  Each tree sees a bootstrap sample; at every node a
fresh uniform subset of the features is considered.  Training is
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .features import FeatureSchema

FOREST_FORMAT_VERSION = 1


@dataclass
class TreeParams:
    n_trees: int = 100
    feature_fraction: float = 0.10
    max_depth: int = 15
    seed: int = 0
    min_samples_split: int = 2

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "feature_fraction": self.feature_fraction,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "min_samples_split": self.min_samples_split,
        }


@dataclass
class DecisionTree:
    """Array-of-nodes tree; leaves carry per-target probability vectors."""

    feature: list[int] = field(default_factory=list)  # -1 for leaves
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    leaf_value: dict[int, list[float]] = field(default_factory=dict)

    def add_leaf(self, value: np.ndarray) -> int:
        idx = self._add_node(-1, 0.0)
        self.leaf_value[idx] = [float(v) for v in value]
        return idx

    def add_split(self, feature: int, threshold: float) -> int:
        return self._add_node(feature, threshold)

    def _add_node(self, feature: int, threshold: float) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def predict_one(self, x: np.ndarray) -> np.ndarray:
        node = 0
        while not self.is_leaf(node):
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return np.asarray(self.leaf_value[node])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.stack([self.predict_one(row) for row in np.atleast_2d(x)])

    def depth(self) -> int:
        def walk(node, d):
            if self.is_leaf(node):
                return d
            return max(walk(self.left[node], d + 1), walk(self.right[node], d + 1))

        return walk(0, 0)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "leaf_value": {str(k): v for k, v in self.leaf_value.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=list(d["feature"]),
            threshold=[float(t) for t in d["threshold"]],
            left=list(d["left"]),
            right=list(d["right"]),
            leaf_value={int(k): [float(x) for x in v] for k, v in d["leaf_value"].items()},
        )


@dataclass
class CohortForest:
    cohort_key: tuple[str, str, str]
    trees: list[DecisionTree]
    target_diagnoses: list[str]
    schema: FeatureSchema
    params: TreeParams

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Mean of per-tree leaf probability vectors."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != len(self.schema):
            raise ValueError(
                f"feature vector has {x2.shape[1]} features, schema expects "
                f"{len(self.schema)}"
            )
        acc = np.zeros((x2.shape[0], len(self.target_diagnoses)))
        for tree in self.trees:
            acc += tree.predict(x2)
        acc /= len(self.trees)
        return acc[0] if single else acc

    def to_dict(self) -> dict:
        return {
            "format_version": FOREST_FORMAT_VERSION,
            "cohort_key": list(self.cohort_key),
            "params": self.params.to_dict(),
            "target_diagnoses": self.target_diagnoses,
            "schema": self.schema.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CohortForest":
        version = d.get("format_version")
        if version != FOREST_FORMAT_VERSION:
            raise ValueError(
                f"forest format version {version} incompatible with "
                f"{FOREST_FORMAT_VERSION}"
            )
        return cls(
            cohort_key=tuple(d["cohort_key"]),
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            target_diagnoses=list(d["target_diagnoses"]),
            schema=FeatureSchema.from_dict(d["schema"]),
            params=TreeParams(**d["params"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "CohortForest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _grow_tree(
    x: np.ndarray, y: np.ndarray, params: TreeParams, rng: np.random.Generator
) -> DecisionTree:
    tree = DecisionTree()
    n, d = x.shape
    m = max(1, math.ceil(params.feature_fraction * d))

    def build(idx: np.ndarray, depth: int) -> int:
        yn = y[idx]
        p = yn.mean(axis=0)
        pure = bool(np.all((p == 0.0) | (p == 1.0)))
        if depth >= params.max_depth or len(idx) < params.min_samples_split or pure:
            return tree.add_leaf(p)
        feats = rng.choice(d, size=m, replace=False)
        split = kernels.best_split(x[idx], yn.astype(np.float64), feats)
        if split is None:
            return tree.add_leaf(p)
        f, thr, gain = split
        assert gain > 0.0, "chosen split must strictly reduce impurity"
        go_left = x[idx, f] <= thr
        node = tree.add_split(f, thr)
        tree.left[node] = build(idx[go_left], depth + 1)
        tree.right[node] = build(idx[~go_left], depth + 1)
        return node

    root = build(np.arange(n), 0)
    assert root == 0
    return tree


def train_forest(
    x: np.ndarray,
    y: np.ndarray,
    params: Optional[TreeParams] = None,
    cohort_key: tuple[str, str, str] = ("", "", ""),
    schema: Optional[FeatureSchema] = None,
    target_diagnoses: Optional[list[str]] = None,
) -> CohortForest:
    """Train a bagged forest; per-tree seeds derive from the forest seed."""
    params = params or TreeParams()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"bad shapes x={x.shape} y={y.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows to train")
    n = x.shape[0]
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(x[boot], y[boot], params, rng))
    if schema is None:
        from .features import Feature, FeatureSchema as _FS

        schema = _FS([Feature("concept", f"f{i}", "ordinal") for i in range(x.shape[1])])
    return CohortForest(
        cohort_key=cohort_key,
        trees=trees,
        target_diagnoses=target_diagnoses or [f"t{j}" for j in range(y.shape[1])],
        schema=schema,
        params=params,
    )
