"""Clinical concept catalog: synonym groups, assertion vocabulary, question rendering.

The catalog is a single versioned JSON document.  Each grouped concept owns a
set of raw source identifiers (synonyms), patient-facing question text, and
metadata describing how the answer is interpreted downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

CATEGORICAL_VALUES = ("certain", "absent", "unsure")


class CatalogError(Exception):
    """Raised when a catalog document fails to parse or validate."""


class ResponseType(str, Enum):
    YES_NO = "yes_no"
    SINGLE_SELECT = "single_select"
    MULTI_SELECT = "multi_select"
    DURATION_DROPDOWN = "duration_dropdown"
    SEVERITY_SCALE = "severity_scale"
    FREE_TEXT = "free_text"


class NoteSection(str, Enum):
    CC = "CC"
    HPI = "HPI"
    ROS = "ROS"
    PE = "PE"


class ResponseEvaluation(str, Enum):
    CATEGORICAL = "categorical"
    ORDINAL_DURATION = "ordinal_duration"
    ORDINAL_SEVERITY = "ordinal_severity"


# Every duration dropdown offers the same day counts.
DURATION_CHOICES = (1, 2, 3, 5, 7, 14, 30, 90)


@dataclass(frozen=True)
class Concept:
    concept_id: str
    canonical_name: str
    synonym_ids: frozenset[str]
    patient_text: str
    response_type: ResponseType
    note_section: NoteSection
    response_evaluation: ResponseEvaluation
    stem: Optional[str] = None
    post_text: Optional[str] = None
    # single/multi select only: each option asserts on a child concept
    option_concept_ids: tuple[str, ...] = ()

    def validate(self) -> None:
        is_dur = self.response_type is ResponseType.DURATION_DROPDOWN
        if is_dur != (self.response_evaluation is ResponseEvaluation.ORDINAL_DURATION):
            raise CatalogError(
                f"concept {self.concept_id!r}: duration_dropdown and "
                f"ordinal_duration must go together"
            )
        is_sev = self.response_type is ResponseType.SEVERITY_SCALE
        if is_sev != (self.response_evaluation is ResponseEvaluation.ORDINAL_SEVERITY):
            raise CatalogError(
                f"concept {self.concept_id!r}: severity_scale and "
                f"ordinal_severity must go together"
            )
        if self.response_type in (ResponseType.SINGLE_SELECT, ResponseType.MULTI_SELECT):
            if len(self.option_concept_ids) < 2:
                raise CatalogError(
                    f"concept {self.concept_id!r}: select questions need >= 2 options"
                )


@dataclass(frozen=True)
class Assertion:
    """A recorded truth value for one concept.

    ``value`` is one of the categorical strings for categorical concepts,
    or a non-negative int (duration days / severity 0..10) for ordinals.
    """

    concept_id: str
    value: Union[str, int]

    def __post_init__(self):
        if isinstance(self.value, str):
            if self.value not in CATEGORICAL_VALUES:
                raise ValueError(f"bad categorical assertion value {self.value!r}")
        elif isinstance(self.value, bool) or not isinstance(self.value, int):
            raise ValueError(f"assertion value must be str or int, got {self.value!r}")
        elif self.value < 0:
            raise ValueError("ordinal assertion value must be >= 0")

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.value, str)

    def check_against(self, concept: Concept) -> None:
        ev = concept.response_evaluation
        if ev is ResponseEvaluation.CATEGORICAL:
            if not self.is_categorical:
                raise ValueError(
                    f"concept {concept.concept_id!r} is categorical, got {self.value!r}"
                )
        else:
            if self.is_categorical:
                raise ValueError(
                    f"concept {concept.concept_id!r} is ordinal, got {self.value!r}"
                )
            if ev is ResponseEvaluation.ORDINAL_SEVERITY and not 0 <= self.value <= 10:
                raise ValueError(f"severity {self.value} outside [0, 10]")


@dataclass
class ConceptCatalog:
    concepts: dict[str, Concept]
    version: str
    _synonym_index: dict[str, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._synonym_index = {}
        for cid, concept in self.concepts.items():
            for raw in concept.synonym_ids:
                other = self._synonym_index.get(raw)
                if other is not None and other != cid:
                    raise CatalogError(
                        f"raw concept {raw!r} grouped under both {other!r} and {cid!r}"
                    )
                self._synonym_index[raw] = cid
            concept.validate()
        for concept in self.concepts.values():
            for opt in concept.option_concept_ids:
                if opt not in self.concepts:
                    raise CatalogError(
                        f"concept {concept.concept_id!r} option {opt!r} not in catalog"
                    )

    def __len__(self) -> int:
        return len(self.concepts)

    def get(self, concept_id: str) -> Concept:
        try:
            return self.concepts[concept_id]
        except KeyError:
            raise KeyError(f"unknown concept {concept_id!r}") from None


def resolve_synonym(catalog: ConceptCatalog, raw_id: str) -> Optional[str]:
    """Map a raw source identifier to its grouped concept id, or None."""
    hit = catalog._synonym_index.get(raw_id)
    if hit is not None:
        return hit
    # a grouped id is trivially its own synonym
    if raw_id in catalog.concepts:
        return raw_id
    return None


_REQUIRED_KEYS = {
    "id",
    "canonical_name",
    "synonyms",
    "patient_text",
    "response_type",
    "note_section",
    "response_evaluation",
}


def load_catalog(path) -> ConceptCatalog:
    """Load and validate a catalog JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CatalogError(
                f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}"
            ) from exc
    return catalog_from_dict(doc)


def catalog_from_dict(doc: dict) -> ConceptCatalog:
    if not isinstance(doc, dict) or "concepts" not in doc or "version" not in doc:
        raise CatalogError("catalog document must have 'version' and 'concepts'")
    concepts: dict[str, Concept] = {}
    for entry in doc["concepts"]:
        missing = _REQUIRED_KEYS - set(entry)
        if missing:
            raise CatalogError(f"concept entry missing keys {sorted(missing)}: {entry}")
        cid = entry["id"]
        if cid in concepts:
            raise CatalogError(f"duplicate concept id {cid!r}")
        try:
            concept = Concept(
                concept_id=cid,
                canonical_name=entry["canonical_name"],
                synonym_ids=frozenset(entry["synonyms"]),
                patient_text=entry["patient_text"],
                response_type=ResponseType(entry["response_type"]),
                note_section=NoteSection(entry["note_section"]),
                response_evaluation=ResponseEvaluation(entry["response_evaluation"]),
                stem=entry.get("stem"),
                post_text=entry.get("post_text"),
                option_concept_ids=tuple(entry.get("options", ())),
            )
        except ValueError as exc:
            raise CatalogError(f"concept {cid!r}: {exc}") from exc
        concepts[cid] = concept
    return ConceptCatalog(concepts=concepts, version=doc["version"])


def catalog_to_dict(catalog: ConceptCatalog) -> dict:
    entries = []
    for c in catalog.concepts.values():
        entry = {
            "id": c.concept_id,
            "canonical_name": c.canonical_name,
            "synonyms": sorted(c.synonym_ids),
            "patient_text": c.patient_text,
            "response_type": c.response_type.value,
            "note_section": c.note_section.value,
            "response_evaluation": c.response_evaluation.value,
        }
        if c.stem is not None:
            entry["stem"] = c.stem
        if c.post_text is not None:
            entry["post_text"] = c.post_text
        if c.option_concept_ids:
            entry["options"] = list(c.option_concept_ids)
        entries.append(entry)
    return {"version": catalog.version, "concepts": entries}


@dataclass(frozen=True)
class RenderedQuestion:
    concept_id: str
    text: str
    # (display label, assertion payload the answer maps to)
    options: tuple[tuple[str, Union[str, int]], ...]
    response_type: ResponseType


_YES_NO_OPTIONS = (("Yes", "certain"), ("No", "absent"), ("Not sure", "unsure"))


def render_question(
    catalog: ConceptCatalog, concept_id: str, mode: str = "patient", answer=None
):
    """Render a concept as patient-facing question text or a provider phrase.

    Patient mode returns a RenderedQuestion; provider mode returns the
    clinical phrase (string) for the given answer.
    """
    concept = catalog.get(concept_id)
    if mode == "provider":
        return provider_phrase(concept, answer)
    if mode != "patient":
        raise ValueError(f"unknown render mode {mode!r}")

    parts = []
    if concept.stem:
        parts.append(concept.stem)
    parts.append(concept.patient_text)
    if concept.post_text:
        parts.append(concept.post_text)
    text = " ".join(parts)

    rt = concept.response_type
    if rt is ResponseType.YES_NO:
        options = _YES_NO_OPTIONS
    elif rt is ResponseType.SEVERITY_SCALE:
        options = tuple((str(i), i) for i in range(11))
    elif rt is ResponseType.DURATION_DROPDOWN:
        options = tuple(
            (f"{d} day" if d == 1 else f"{d} days", d) for d in DURATION_CHOICES
        )
    elif rt in (ResponseType.SINGLE_SELECT, ResponseType.MULTI_SELECT):
        options = tuple(
            (catalog.get(opt).patient_text, opt) for opt in concept.option_concept_ids
        )
    else:  # free text: single verbatim-capture option
        options = (("(free text)", "certain"),)
    return RenderedQuestion(
        concept_id=concept_id, text=text, options=options, response_type=rt
    )


def provider_phrase(concept: Concept, answer) -> str:
    """Clinical phrase with sense for a recorded answer."""
    name = concept.canonical_name
    if answer is None:
        return name
    if isinstance(answer, Assertion):
        answer = answer.value
    if concept.response_evaluation is ResponseEvaluation.ORDINAL_DURATION:
        unit = "day" if answer == 1 else "days"
        return f"{name}: {answer} {unit}"
    if concept.response_evaluation is ResponseEvaluation.ORDINAL_SEVERITY:
        return f"{name}: severity {answer}/10"
    if answer == "certain" or answer == "yes" or answer is True:
        return f"Reports {name.lower()}."
    if answer == "absent" or answer == "no" or answer is False:
        return f"Denies {name.lower()}."
    return f"Unsure about {name.lower()}."
