"""Question sequencing: scripted HPI phase, rules engine, and forest voting.

One round of the ML phase runs: infer assertions (forward chaining) ->
forest vote -> prerequisite adjustment -> fixer filtering -> argmax weight.
Ties break by (weight desc, concept_id asc) so replays are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .catalog import (
    Assertion,
    ConceptCatalog,
    ResponseEvaluation,
    ResponseType,
)
from .forest.features import encode_assertions
from .forest.model import CohortForest
from .worldgen import CohortKey


class RuleError(Exception):
    """Bad knowledge-base content (unresolvable references, cycles)."""


class InferenceConflict(Exception):
    """Two inference rules derived different values for one concept."""


class OrderingError(Exception):
    """An answer arrived for a question that is not pending."""


@dataclass(frozen=True)
class PrerequisiteRule:
    target_concept: str
    prerequisite_concept: str
    ask_prereq_first: bool = True


@dataclass(frozen=True)
class Condition:
    concept_id: str
    value: Union[str, int]  # categorical value, or "present"/"absent" for ordinals

    def matches(self, asserted: dict[str, Assertion]) -> bool:
        a = asserted.get(self.concept_id)
        if a is None:
            return False
        if self.value == "present":
            return a.value == "certain" or (not a.is_categorical and a.value > 0)
        if self.value == "absent":
            return a.value == "absent" or (not a.is_categorical and a.value == 0)
        return a.value == self.value


@dataclass(frozen=True)
class FixerRule:
    blocked_concepts: frozenset[str]
    chief_complaint: Optional[str] = None
    requires: tuple[Condition, ...] = ()

    def applies(self, cohort: CohortKey, asserted: dict[str, Assertion]) -> bool:
        if self.chief_complaint is not None and cohort.chief_complaint != self.chief_complaint:
            return False
        return all(c.matches(asserted) for c in self.requires)


@dataclass(frozen=True)
class InferenceRule:
    rule_id: str
    antecedents: tuple[Condition, ...]
    consequents: tuple[tuple[str, Union[str, int]], ...]


@dataclass(frozen=True)
class ScriptedItem:
    concept_id: str
    only_sex: Optional[str] = None


@dataclass
class KnowledgeBase:
    prerequisites: list[PrerequisiteRule] = field(default_factory=list)
    fixers: list[FixerRule] = field(default_factory=list)
    inference_rules: list[InferenceRule] = field(default_factory=list)
    scripted_hpi: dict[str, list[ScriptedItem]] = field(default_factory=dict)

    def prereq_for(self, target: str) -> Optional[PrerequisiteRule]:
        for r in self.prerequisites:
            if r.target_concept == target:
                return r
        return None

    def validate(self, catalog: ConceptCatalog) -> None:
        def check(cid: str, where: str) -> None:
            if cid not in catalog.concepts:
                raise RuleError(f"{where} references unknown concept {cid!r}")

        edges: dict[str, str] = {}
        for r in self.prerequisites:
            check(r.target_concept, "prerequisite rule")
            check(r.prerequisite_concept, "prerequisite rule")
            edges[r.target_concept] = r.prerequisite_concept
        for start in edges:
            seen = {start}
            node = start
            while node in edges:
                node = edges[node]
                if node in seen:
                    raise RuleError(f"prerequisite cycle through {node!r}")
                seen.add(node)
        for r in self.fixers:
            for cid in r.blocked_concepts:
                check(cid, "fixer rule")
            for c in r.requires:
                check(c.concept_id, "fixer rule")
        for r in self.inference_rules:
            for c in r.antecedents:
                check(c.concept_id, f"inference rule {r.rule_id}")
            for cid, _ in r.consequents:
                check(cid, f"inference rule {r.rule_id}")
        for cc, items in self.scripted_hpi.items():
            for item in items:
                check(item.concept_id, f"scripted HPI for {cc}")

    def to_dict(self) -> dict:
        return {
            "prerequisites": [
                {
                    "target": r.target_concept,
                    "prerequisite": r.prerequisite_concept,
                    "ask_prereq_first": r.ask_prereq_first,
                }
                for r in self.prerequisites
            ],
            "fixers": [
                {
                    "blocked": sorted(r.blocked_concepts),
                    **({"chief_complaint": r.chief_complaint} if r.chief_complaint else {}),
                    "requires": [
                        {"concept": c.concept_id, "value": c.value} for c in r.requires
                    ],
                }
                for r in self.fixers
            ],
            "inference_rules": [
                {
                    "id": r.rule_id,
                    "if": [{"concept": c.concept_id, "value": c.value} for c in r.antecedents],
                    "then": [{"concept": cid, "value": v} for cid, v in r.consequents],
                }
                for r in self.inference_rules
            ],
            "scripted_hpi": {
                cc: [
                    item.concept_id
                    if item.only_sex is None
                    else {"concept": item.concept_id, "only_sex": item.only_sex}
                    for item in items
                ]
                for cc, items in self.scripted_hpi.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeBase":
        prereqs = [
            PrerequisiteRule(e["target"], e["prerequisite"], bool(e.get("ask_prereq_first", True)))
            for e in d.get("prerequisites", [])
        ]
        fixers = [
            FixerRule(
                blocked_concepts=frozenset(e["blocked"]),
                chief_complaint=e.get("chief_complaint"),
                requires=tuple(
                    Condition(c["concept"], c["value"]) for c in e.get("requires", [])
                ),
            )
            for e in d.get("fixers", [])
        ]
        infer = [
            InferenceRule(
                rule_id=e.get("id", f"rule{i}"),
                antecedents=tuple(Condition(c["concept"], c["value"]) for c in e["if"]),
                consequents=tuple((c["concept"], c["value"]) for c in e["then"]),
            )
            for i, e in enumerate(d.get("inference_rules", []))
        ]
        scripted = {}
        for cc, items in d.get("scripted_hpi", {}).items():
            parsed = []
            for item in items:
                if isinstance(item, str):
                    parsed.append(ScriptedItem(item))
                else:
                    parsed.append(ScriptedItem(item["concept"], item.get("only_sex")))
            scripted[cc] = parsed
        return cls(prereqs, fixers, infer, scripted)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path, catalog: Optional[ConceptCatalog] = None) -> "KnowledgeBase":
        with open(path, "r", encoding="utf-8") as fh:
            kb = cls.from_dict(json.load(fh))
        if catalog is not None:
            kb.validate(catalog)
        return kb


PHASE_HPI = "hpi_scripted"
PHASE_ML = "ml_questions"
PHASE_DONE = "done"


@dataclass
class SessionState:
    session_id: str
    cohort_key: CohortKey
    age_years: int
    sex: str
    history: dict = field(default_factory=dict)
    asserted: dict[str, Assertion] = field(default_factory=dict)
    asked_questions: list[str] = field(default_factory=list)
    inferred: dict[str, str] = field(default_factory=dict)  # concept -> rule id
    remaining_budget: int = 15
    phase: str = PHASE_HPI
    pending_question: Optional[str] = None


@dataclass
class NextQuestion:
    concept_id: str
    phase: str  # "hpi" or "ml"
    vote_count: int = 0
    applied_rules: list[str] = field(default_factory=list)


def infer_assertions(state: SessionState, rules: Iterable[InferenceRule]) -> dict[str, Assertion]:
    """Forward-chain inference rules to fixpoint; idempotent.

    Directly asserted concepts are never overwritten.  Two rules deriving
    different values for the same unasserted concept raise InferenceConflict.
    """
    rules = list(rules)
    derived_by: dict[str, str] = {}
    changed = True
    iterations = 0
    while changed:
        changed = False
        iterations += 1
        if iterations > len(rules) + 1:
            raise RuleError("inference did not reach fixpoint within |rules| iterations")
        for rule in rules:
            if not all(c.matches(state.asserted) for c in rule.antecedents):
                continue
            for cid, value in rule.consequents:
                existing = state.asserted.get(cid)
                if existing is None:
                    state.asserted[cid] = Assertion(cid, value)
                    state.inferred[cid] = rule.rule_id
                    derived_by[cid] = rule.rule_id
                    changed = True
                elif cid in derived_by and existing.value != value:
                    raise InferenceConflict(
                        f"rules {derived_by[cid]!r} and {rule.rule_id!r} disagree on "
                        f"{cid!r}: {existing.value!r} vs {value!r}"
                    )
    return state.asserted


def forest_vote(
    forest: CohortForest, asserted: dict[str, Assertion], age_years: int = 0,
    sex: str = "female", history: Optional[dict] = None,
) -> dict[str, int]:
    """Traverse each tree until a leaf or an unasserted concept split.

    Returns question weights: for each emitted concept, the number of trees
    stopping on it.  Trees reaching leaves emit nothing.
    """
    x, mask = encode_assertions(
        forest.schema, asserted.values(), age_years, sex, history
    )
    weights: dict[str, int] = {}
    for tree in forest.trees:
        node = 0
        while not tree.is_leaf(node):
            f = tree.feature[node]
            feat = forest.schema.features[f]
            if feat.kind == "concept" and not mask[f]:
                weights[feat.ref] = weights.get(feat.ref, 0) + 1
                break
            node = tree.left[node] if x[f] <= tree.threshold[node] else tree.right[node]
    return weights


def apply_prerequisites(
    weights: dict[str, int],
    rules: Iterable[PrerequisiteRule],
    asserted: dict[str, Assertion],
) -> dict[str, int]:
    """Prerequisite semantics per the knowledge-base contract.

    prereq absent -> target weight 0; prereq answered otherwise -> target
    unchanged; prereq unanswered and ask-first -> the target is replaced by
    the prerequisite question, summing weights of all targets mapped to the
    same prerequisite.
    """
    by_target = {}
    for r in rules:
        by_target.setdefault(r.target_concept, r)
    out: dict[str, int] = {}
    for q, w in weights.items():
        rule = by_target.get(q)
        if rule is None:
            out[q] = out.get(q, 0) + w
            continue
        prereq = asserted.get(rule.prerequisite_concept)
        if prereq is not None:
            if Condition(rule.prerequisite_concept, "absent").matches(asserted):
                out[q] = out.get(q, 0)  # weight zeroed
            else:
                out[q] = out.get(q, 0) + w
        elif rule.ask_prereq_first:
            p = rule.prerequisite_concept
            out[p] = out.get(p, 0) + w
        else:
            out[q] = out.get(q, 0) + w
    return out


def apply_fixers(
    weights: dict[str, int],
    fixers: Iterable[FixerRule],
    cohort: CohortKey,
    asserted: dict[str, Assertion],
) -> tuple[dict[str, int], list[str]]:
    blocked: set[str] = set()
    applied = []
    for r in fixers:
        if r.applies(cohort, asserted):
            hit = blocked.union(r.blocked_concepts) - blocked
            if r.blocked_concepts & set(weights):
                applied.append(f"fixer blocks {sorted(r.blocked_concepts & set(weights))}")
            blocked |= r.blocked_concepts
    return {q: w for q, w in weights.items() if q not in blocked}, applied


def select_next_question(
    state: SessionState,
    forest: Optional[CohortForest],
    kb: KnowledgeBase,
    catalog: ConceptCatalog,
) -> Optional[NextQuestion]:
    """Advance the session state machine and pick the next question.

    Returns None when the session is done.
    """
    if state.phase == PHASE_DONE:
        return None

    if state.phase == PHASE_HPI:
        for item in kb.scripted_hpi.get(state.cohort_key.chief_complaint, []):
            if item.only_sex is not None and item.only_sex != state.sex:
                continue
            if item.concept_id in state.asserted or item.concept_id in state.asked_questions:
                continue
            state.pending_question = item.concept_id
            return NextQuestion(item.concept_id, phase="hpi")
        # scripted exhausted
        if forest is None:
            state.phase = PHASE_DONE
            state.pending_question = None
            return None
        state.phase = PHASE_ML

    if state.remaining_budget <= 0:
        state.phase = PHASE_DONE
        state.pending_question = None
        return None

    applied: list[str] = []
    before = set(state.asserted)
    infer_assertions(state, kb.inference_rules)
    newly = set(state.asserted) - before
    if newly:
        applied.append(f"inferred {sorted(newly)}")

    if forest is None:
        state.phase = PHASE_DONE
        state.pending_question = None
        return None

    votes = forest_vote(forest, state.asserted, state.age_years, state.sex, state.history)
    raw_votes = dict(votes)
    votes = apply_prerequisites(votes, kb.prerequisites, state.asserted)
    if votes != raw_votes:
        applied.append("prerequisite rules adjusted candidates")
    votes, fixer_notes = apply_fixers(votes, kb.fixers, state.cohort_key, state.asserted)
    applied.extend(fixer_notes)
    # never re-ask an asserted concept
    votes = {q: w for q, w in votes.items() if q not in state.asserted and w > 0}
    if not votes:
        state.phase = PHASE_DONE
        state.pending_question = None
        return None
    concept_id = min(votes, key=lambda q: (-votes[q], q))
    state.pending_question = concept_id
    return NextQuestion(concept_id, phase="ml", vote_count=votes[concept_id], applied_rules=applied)


def parse_answer(catalog: ConceptCatalog, concept_id: str, answer) -> list[Assertion]:
    """Map a raw client answer to one or more assertions."""
    concept = catalog.get(concept_id)
    rt = concept.response_type
    if rt is ResponseType.YES_NO:
        mapping = {
            "yes": "certain", "no": "absent", "not sure": "unsure",
            "certain": "certain", "absent": "absent", "unsure": "unsure",
            True: "certain", False: "absent",
        }
        key = answer.lower() if isinstance(answer, str) else answer
        if key not in mapping:
            raise ValueError(f"bad yes/no answer {answer!r}")
        return [Assertion(concept_id, mapping[key])]
    if rt is ResponseType.SEVERITY_SCALE:
        if not isinstance(answer, int) or isinstance(answer, bool) or not 0 <= answer <= 10:
            raise ValueError(f"severity answer must be an int in [0, 10], got {answer!r}")
        return [Assertion(concept_id, answer)]
    if rt is ResponseType.DURATION_DROPDOWN:
        if not isinstance(answer, int) or isinstance(answer, bool) or answer < 0:
            raise ValueError(f"duration answer must be a non-negative int, got {answer!r}")
        return [Assertion(concept_id, answer)]
    if rt is ResponseType.SINGLE_SELECT or rt is ResponseType.MULTI_SELECT:
        selected = [answer] if isinstance(answer, str) else list(answer)
        options = set(concept.option_concept_ids)
        bad = set(selected) - options
        if bad:
            raise ValueError(f"unknown options {sorted(bad)} for {concept_id!r}")
        if rt is ResponseType.SINGLE_SELECT and len(selected) != 1:
            raise ValueError("single select takes exactly one option")
        out = [Assertion(concept_id, "certain" if selected else "absent")]
        for opt in concept.option_concept_ids:
            out.append(Assertion(opt, "certain" if opt in selected else "absent"))
        return out
    # free text: captured verbatim, excluded from features; recorded as certain
    return [Assertion(concept_id, "certain")]


def record_answer(
    state: SessionState, concept_id: str, answer, catalog: ConceptCatalog
) -> SessionState:
    """Store the answer for the pending question and advance bookkeeping."""
    if state.pending_question != concept_id:
        raise OrderingError(
            f"answer for {concept_id!r} but pending question is "
            f"{state.pending_question!r}"
        )
    assertions = parse_answer(catalog, concept_id, answer)
    for a in assertions:
        a.check_against(catalog.get(a.concept_id))
        state.asserted[a.concept_id] = a
    state.asked_questions.append(concept_id)
    state.pending_question = None
    if state.phase == PHASE_ML:
        state.remaining_budget -= 1
        if state.remaining_budget <= 0:
            state.phase = PHASE_DONE
    return state
