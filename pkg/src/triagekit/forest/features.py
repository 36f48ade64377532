"""Cohort feature extraction for the question-sequencing forests.

Categorical concepts encode as certain=+1 / absent=-1 / unasserted=0
("unsure" counts as unasserted).  Ordinal concepts encode their numeric
value; a parallel boolean mask records which concept features are actually
asserted, which the vote traversal needs to tell "0" apart from "never
asked".  Demographics and history-presence indicators are always asserted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..catalog import Assertion, ConceptCatalog, ResponseEvaluation
from ..metrics import LiftTable
from ..worldgen import CohortKey, Encounter, HISTORY_CHANNELS


class CohortSkip(Exception):
    """Signal that a cohort has too little data to train a model."""


@dataclass(frozen=True)
class Feature:
    kind: str  # "concept" | "age" | "sex" | "history"
    ref: str  # concept_id, or "channel:item" for history
    split_kind: str  # "categorical" | "ordinal" | "numeric"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ref": self.ref, "split_kind": self.split_kind}

    @classmethod
    def from_dict(cls, d: dict) -> "Feature":
        return cls(d["kind"], d["ref"], d["split_kind"])


@dataclass
class FeatureSchema:
    features: list[Feature]
    history_window_days: int = 180

    def __len__(self) -> int:
        return len(self.features)

    @property
    def concept_ids(self) -> list[str]:
        return [f.ref for f in self.features if f.kind == "concept"]

    def index_of_concept(self, concept_id: str) -> Optional[int]:
        for i, f in enumerate(self.features):
            if f.kind == "concept" and f.ref == concept_id:
                return i
        return None

    def to_dict(self) -> dict:
        return {
            "features": [f.to_dict() for f in self.features],
            "history_window_days": self.history_window_days,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            [Feature.from_dict(f) for f in d["features"]],
            d.get("history_window_days", 180),
        )


def encode_assertion_value(assertion: Assertion, split_kind: str) -> float:
    if split_kind == "categorical":
        if assertion.value == "certain":
            return 1.0
        if assertion.value == "absent":
            return -1.0
        return 0.0
    return float(assertion.value) if not assertion.is_categorical else 0.0


def encode_assertions(
    schema: FeatureSchema,
    assertions: Iterable[Assertion],
    age_years: float = 0.0,
    sex: str = "female",
    history: Optional[dict] = None,
):
    """Encode one observation against the schema -> (x, asserted_mask)."""
    x = np.zeros(len(schema.features))
    mask = np.zeros(len(schema.features), dtype=bool)
    by_concept = {}
    for a in assertions:
        by_concept[a.concept_id] = a
    hist_items = _history_item_set(history, schema.history_window_days)
    for i, f in enumerate(schema.features):
        if f.kind == "concept":
            a = by_concept.get(f.ref)
            if a is not None:
                x[i] = encode_assertion_value(a, f.split_kind)
                mask[i] = a.value != "unsure"
        elif f.kind == "age":
            x[i] = age_years / 100.0
            mask[i] = True
        elif f.kind == "sex":
            x[i] = 1.0 if sex == "male" else 0.0
            mask[i] = True
        else:  # history indicator
            x[i] = 1.0 if f.ref in hist_items else 0.0
            mask[i] = True
    return x, mask


def _history_item_set(history: Optional[dict], window_days: int) -> set[str]:
    items: set[str] = set()
    if not history:
        return items
    for channel, entries in history.items():
        for e in entries:
            if isinstance(e, dict):
                days, entry_items = e["days_ago"], e["items"]
            else:
                days, entry_items = e.days_ago, e.items
            if days <= window_days:
                for it in entry_items:
                    items.add(f"{channel}:{it}")
    return items


def build_schema(
    encounters: list[Encounter],
    catalog: ConceptCatalog,
    max_concepts: int = 1000,
    concept_min_count: int = 1,
    include_history: bool = True,
    history_top_k: int = 20,
    history_window_days: int = 180,
) -> FeatureSchema:
    concept_freq: Counter = Counter()
    hist_freq: Counter = Counter()
    for enc in encounters:
        for a in enc.assertions:
            if a.concept_id in catalog.concepts:
                concept_freq[a.concept_id] += 1
        if include_history:
            for item in _history_item_set(enc.history, history_window_days):
                hist_freq[item] += 1

    kept = [
        cid
        for cid, cnt in sorted(concept_freq.items(), key=lambda kv: (-kv[1], kv[0]))
        if cnt >= concept_min_count
    ][:max_concepts]

    features = []
    for cid in kept:
        ev = catalog.get(cid).response_evaluation
        split_kind = "categorical" if ev is ResponseEvaluation.CATEGORICAL else "ordinal"
        features.append(Feature("concept", cid, split_kind))
    features.append(Feature("age", "age_years", "numeric"))
    features.append(Feature("sex", "sex", "numeric"))
    if include_history:
        for item, _ in sorted(hist_freq.items(), key=lambda kv: (-kv[1], kv[0]))[
            :history_top_k
        ]:
            features.append(Feature("history", item, "numeric"))
    return FeatureSchema(features, history_window_days)


def cohort_encounters(encounters: Iterable[Encounter], cohort: CohortKey) -> list[Encounter]:
    return [
        e
        for e in encounters
        if cohort.chief_complaint in e.chief_complaints
        and e.age_bin == cohort.age_bin
        and e.sex == cohort.sex
    ]


def prepare_cohort_data(
    encounters: list[Encounter],
    cohort: CohortKey,
    lift: LiftTable,
    catalog: ConceptCatalog,
    max_concepts: int = 1000,
    max_targets: int = 50,
    lift_threshold: float = 2.0,
    min_count: int = 100,
    min_rows: int = 20,
    include_history: bool = True,
    history_top_k: int = 20,
    history_window_days: int = 180,
):
    """Build (X, mask, Y, schema, targets) for one cohort.

    Concepts are ranked by frequency and capped; target diagnoses must pass
    the lift filter, appear at least ``min_count`` times in the cohort, and
    are capped at the ``max_targets`` most common.
    """
    rows = cohort_encounters(encounters, cohort)
    if len(rows) < max(1, min_rows):
        raise CohortSkip(f"cohort {cohort} has only {len(rows)} encounters")

    schema = build_schema(
        rows,
        catalog,
        max_concepts=max_concepts,
        concept_min_count=min(min_count, len(rows)) if min_count > 1 else 1,
        include_history=include_history,
        history_top_k=history_top_k,
        history_window_days=history_window_days,
    )

    dx_freq: Counter = Counter()
    for e in rows:
        for dx in set(e.outcomes.diagnoses):
            dx_freq[dx] += 1
    targets = [
        dx
        for dx, cnt in sorted(dx_freq.items(), key=lambda kv: (-kv[1], kv[0]))
        if cnt >= min_count
        and (lift.lift(dx, cohort.chief_complaint) or 0.0) > lift_threshold
    ][:max_targets]
    if not targets:
        raise CohortSkip(f"cohort {cohort}: no diagnosis passes the target filter")

    n = len(rows)
    x = np.zeros((n, len(schema)))
    mask = np.zeros((n, len(schema)), dtype=bool)
    y = np.zeros((n, len(targets)), dtype=np.uint8)
    t_index = {t: j for j, t in enumerate(targets)}
    for i, e in enumerate(rows):
        x[i], mask[i] = encode_assertions(
            schema, e.assertions, e.age_years, e.sex, e.history
        )
        for dx in e.outcomes.diagnoses:
            j = t_index.get(dx)
            if j is not None:
                y[i, j] = 1
    return x, mask, y, schema, targets
