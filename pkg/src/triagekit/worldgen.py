"""Synthetic EMR world model.

A world is a latent-condition generative model: each encounter draws one
hidden condition (or stays healthy), which emits concept assertions, coded
outcomes, and a free-text reason for visit.  Patients may carry a chronic
condition that surfaces in their history channels and raises the chance of
a related revisit, which is what makes medical history informative for the
learned models.  Because emissions are conditionally independent given the
condition, the exact Bayes posterior is available as an evaluation oracle.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional

import numpy as np

from .catalog import (
    Assertion,
    ConceptCatalog,
    DURATION_CHOICES,
    catalog_from_dict,
    catalog_to_dict,
)

AGE_BINS: list[tuple[str, int, int]] = [
    ("0-1", 0, 1),
    ("2-15", 2, 15),
    ("16-20", 16, 20),
    ("21-29", 21, 29),
    ("30-39", 30, 39),
    ("40-49", 40, 49),
    ("50-59", 50, 59),
    ("60-69", 60, 69),
    ("70-79", 70, 79),
    ("80-89", 80, 89),
    ("90+", 90, 105),
]
AGE_BIN_LABELS = [b[0] for b in AGE_BINS]
_AGE_BIN_WEIGHTS = np.array([2, 6, 4, 10, 12, 10, 10, 10, 6, 3, 1], dtype=float)
_AGE_BIN_WEIGHTS /= _AGE_BIN_WEIGHTS.sum()

SEXES = ("female", "male")
HISTORY_CHANNELS = ("diagnoses", "prescriptions", "procedures", "chief_complaints")

_SYMPTOM_WORDS = [
    "headache", "cough", "fever", "rash", "nausea", "fatigue", "dizziness",
    "congestion", "sneezing", "wheezing", "heartburn", "bloating", "cramping",
    "itching", "swelling", "stiffness", "numbness", "tingling", "palpitations",
    "insomnia", "backache", "earache", "toothache", "chills", "vomiting",
    "diarrhea", "constipation", "discharge", "hoarseness", "snoring",
    "migraine", "bruising", "bleeding", "spotting", "acne", "blisters",
    "soreness", "tenderness", "weakness", "tremor", "sweating", "flushing",
    "hives", "dryness", "lightheadedness", "anxiety", "indigestion", "sciatica",
    "hiccups", "laryngitis", "sinusitis", "vertigo", "gout", "shingles",
    "eczema", "asthma", "allergies", "ulcer", "colic", "jaundice",
]
_NOISE_WORDS = ["since", "yesterday", "mild", "bad", "getting", "worse", "on", "and",
                "off", "really", "some", "slight", "again", "still"]
_FOLLOWUP_PHRASES = [
    "follow up appointment",
    "follow up visit please",
    "check in on my condition",
    "medication refill and check",
    "recheck from last visit",
]


class WorldConfigError(ValueError):
    """Raised for degenerate world configurations."""


def age_bin_of(age_years: int) -> str:
    for label, lo, hi in AGE_BINS:
        if lo <= age_years <= hi:
            return label
    return AGE_BINS[-1][0]


@dataclass(frozen=True)
class CohortKey:
    chief_complaint: str
    age_bin: str
    sex: str

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.chief_complaint, self.age_bin, self.sex)

    def file_stem(self) -> str:
        return f"{self.chief_complaint}_{self.age_bin}_{self.sex}".replace("+", "plus")


@dataclass
class WorldConfig:
    n_chief_complaints: int = 20
    n_conditions: int = 40
    n_concepts: int = 200
    n_diagnoses: int = 60
    n_medications: int = 30
    n_labs: int = 25
    n_imaging: int = 15
    n_procedures: int = 20
    concepts_per_condition: tuple[int, int] = (4, 8)
    emission_range: tuple[float, float] = (0.5, 0.95)
    chronic_fraction: float = 0.3
    p_patient_chronic: float = 0.35
    p_chronic_visit: float = 0.6
    chronic_condition_boost: float = 0.7
    absent_density: float = 0.15
    second_cc_prob: float = 0.15
    healthy_concept_rate: float = 0.02
    followup_keyword_prob: float = 0.3
    lookback_days: int = 365

    def validate(self) -> None:
        if self.n_conditions < 1 or self.n_chief_complaints < 1:
            raise WorldConfigError("need at least one condition and chief complaint")
        if self.n_concepts < self.concepts_per_condition[1]:
            raise WorldConfigError("not enough concepts for per-condition emissions")
        lo, hi = self.emission_range
        if not (0.0 < lo <= hi <= 1.0):
            raise WorldConfigError(f"bad emission range {self.emission_range}")


@dataclass
class Condition:
    condition_id: str
    chief_complaint: str
    chronic: bool
    concept_emissions: dict[str, float]
    ordinal_values: dict[str, int]  # emitted value for ordinal concepts
    diagnosis_emissions: dict[str, float]
    medication_emissions: dict[str, float]
    lab_emissions: dict[str, float]
    imaging_emissions: dict[str, float]
    history_profile: dict[str, list[str]]

    @property
    def main_diagnosis(self) -> str:
        return max(self.diagnosis_emissions, key=lambda d: self.diagnosis_emissions[d])


@dataclass
class Outcomes:
    diagnoses: list[str] = field(default_factory=list)
    medications: list[str] = field(default_factory=list)
    labs: list[str] = field(default_factory=list)
    imaging: list[str] = field(default_factory=list)


@dataclass
class HistoryEntry:
    days_ago: int
    items: list[str]


@dataclass
class Encounter:
    patient_id: str
    age_years: int
    age_bin: str
    sex: str
    reason_text: str
    chief_complaints: list[str]  # primary first
    assertions: list[Assertion]
    history: dict[str, list[HistoryEntry]]
    outcomes: Outcomes
    latent_conditions: list[str]

    @property
    def primary_cc(self) -> str:
        return self.chief_complaints[0]

    def cohort_key(self) -> CohortKey:
        return CohortKey(self.primary_cc, self.age_bin, self.sex)

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "age_years": self.age_years,
            "age_bin": self.age_bin,
            "sex": self.sex,
            "reason_text": self.reason_text,
            "chief_complaints": list(self.chief_complaints),
            "assertions": [
                {"concept_id": a.concept_id, "value": a.value} for a in self.assertions
            ],
            "history": {
                ch: [{"days_ago": e.days_ago, "items": e.items} for e in entries]
                for ch, entries in self.history.items()
            },
            "outcomes": asdict(self.outcomes),
            "latent_conditions": list(self.latent_conditions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encounter":
        return cls(
            patient_id=d["patient_id"],
            age_years=d["age_years"],
            age_bin=d["age_bin"],
            sex=d["sex"],
            reason_text=d["reason_text"],
            chief_complaints=list(d["chief_complaints"]),
            assertions=[
                Assertion(a["concept_id"], a["value"]) for a in d["assertions"]
            ],
            history={
                ch: [HistoryEntry(e["days_ago"], list(e["items"])) for e in entries]
                for ch, entries in d["history"].items()
            },
            outcomes=Outcomes(**d["outcomes"]),
            latent_conditions=list(d["latent_conditions"]),
        )


@dataclass
class WorldModel:
    seed: int
    config: WorldConfig
    chief_complaints: list[str]
    conditions: dict[str, Condition]
    # prior[(cc, age_bin, sex)] -> {condition_id: prob}; residual mass is healthy
    priors: dict[tuple[str, str, str], dict[str, float]]
    catalog_doc: dict
    reason_templates: dict[str, list[str]]  # per cc keyword phrases
    ordinal_partner: dict[str, str]  # ordinal concept -> gating yes/no concept
    healthy_outcome_rates: dict[str, dict[str, float]]

    def catalog(self) -> ConceptCatalog:
        return catalog_from_dict(self.catalog_doc)

    def conditions_for_cc(self, cc: str) -> list[Condition]:
        return [c for c in self.conditions.values() if c.chief_complaint == cc]

    def prior(self, cohort: CohortKey) -> dict[str, float]:
        return self.priors.get(cohort.as_tuple(), {})

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": asdict(self.config),
            "chief_complaints": self.chief_complaints,
            "conditions": {
                k: {
                    "condition_id": c.condition_id,
                    "chief_complaint": c.chief_complaint,
                    "chronic": c.chronic,
                    "concept_emissions": c.concept_emissions,
                    "ordinal_values": c.ordinal_values,
                    "diagnosis_emissions": c.diagnosis_emissions,
                    "medication_emissions": c.medication_emissions,
                    "lab_emissions": c.lab_emissions,
                    "imaging_emissions": c.imaging_emissions,
                    "history_profile": c.history_profile,
                }
                for k, c in self.conditions.items()
            },
            "priors": [
                {"cohort": list(k), "probs": v} for k, v in self.priors.items()
            ],
            "catalog": self.catalog_doc,
            "reason_templates": self.reason_templates,
            "ordinal_partner": self.ordinal_partner,
            "healthy_outcome_rates": self.healthy_outcome_rates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldModel":
        cfg = WorldConfig(**{
            k: tuple(v) if isinstance(v, list) else v for k, v in d["config"].items()
        })
        return cls(
            seed=d["seed"],
            config=cfg,
            chief_complaints=list(d["chief_complaints"]),
            conditions={k: Condition(**v) for k, v in d["conditions"].items()},
            priors={tuple(e["cohort"]): e["probs"] for e in d["priors"]},
            catalog_doc=d["catalog"],
            reason_templates=d["reason_templates"],
            ordinal_partner=d["ordinal_partner"],
            healthy_outcome_rates=d["healthy_outcome_rates"],
        )


def _make_catalog_doc(rng: np.random.Generator, cfg: WorldConfig):
    """Generate concept metadata: mostly yes/no, some severity and duration."""
    concepts = []
    ordinal_partner: dict[str, str] = {}
    n = cfg.n_concepts
    kinds = ["yes_no"] * n
    n_sev = max(1, n // 10)
    n_dur = max(1, n // 10)
    for i in range(n_sev):
        kinds[1 + 3 * i] = "severity_scale"
    for i in range(n_dur):
        kinds[2 + 3 * i] = "duration_dropdown"

    names = []
    for i in range(n):
        w = _SYMPTOM_WORDS[i % len(_SYMPTOM_WORDS)]
        suffix = i // len(_SYMPTOM_WORDS)
        names.append(w if suffix == 0 else f"{w} {suffix + 1}")

    yes_no_ids = [f"c{i:04d}" for i in range(n) if kinds[i] == "yes_no"]
    for i in range(n):
        cid = f"c{i:04d}"
        kind = kinds[i]
        name = names[i]
        n_syn = int(rng.integers(1, 4))
        syns = [f"RAW{i:04d}_{j}" for j in range(n_syn)]
        if kind == "yes_no":
            entry = {
                "id": cid,
                "canonical_name": name.capitalize(),
                "synonyms": syns,
                "patient_text": name,
                "response_type": "yes_no",
                "stem": "Do you have any of the following?",
                "note_section": str(rng.choice(["HPI", "ROS", "PE"])),
                "response_evaluation": "categorical",
            }
        elif kind == "severity_scale":
            partner = yes_no_ids[int(rng.integers(0, len(yes_no_ids)))]
            ordinal_partner[cid] = partner
            entry = {
                "id": cid,
                "canonical_name": f"{name.capitalize()} severity",
                "synonyms": syns,
                "patient_text": f"how severe is your {name}?",
                "response_type": "severity_scale",
                "note_section": "HPI",
                "response_evaluation": "ordinal_severity",
            }
        else:
            partner = yes_no_ids[int(rng.integers(0, len(yes_no_ids)))]
            ordinal_partner[cid] = partner
            entry = {
                "id": cid,
                "canonical_name": f"{name.capitalize()} duration",
                "synonyms": syns,
                "patient_text": f"how long have you had {name}?",
                "response_type": "duration_dropdown",
                "note_section": "HPI",
                "response_evaluation": "ordinal_duration",
            }
        concepts.append(entry)
    doc = {"version": "world-1", "concepts": concepts}
    return doc, ordinal_partner


def build_world(seed: int, config: Optional[WorldConfig] = None) -> WorldModel:
    """Deterministically construct a world from (seed, config)."""
    cfg = config or WorldConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)

    ccs = [f"cc{i:03d}" for i in range(cfg.n_chief_complaints)]
    catalog_doc, ordinal_partner = _make_catalog_doc(rng, cfg)
    concept_ids = [c["id"] for c in catalog_doc["concepts"]]
    eval_by_id = {c["id"]: c["response_evaluation"] for c in catalog_doc["concepts"]}

    dx_codes = [f"dx{i:03d}" for i in range(cfg.n_diagnoses)]
    med_codes = [f"med{i:03d}" for i in range(cfg.n_medications)]
    lab_codes = [f"lab{i:03d}" for i in range(cfg.n_labs)]
    img_codes = [f"img{i:03d}" for i in range(cfg.n_imaging)]
    proc_codes = [f"proc{i:03d}" for i in range(cfg.n_procedures)]

    lo, hi = cfg.emission_range
    n_chronic = int(round(cfg.chronic_fraction * cfg.n_conditions))
    conditions: dict[str, Condition] = {}
    for k in range(cfg.n_conditions):
        cc = ccs[k % len(ccs)]
        n_emit = int(rng.integers(cfg.concepts_per_condition[0],
                                  cfg.concepts_per_condition[1] + 1))
        emitted = rng.choice(len(concept_ids), size=n_emit, replace=False)
        concept_emissions: dict[str, float] = {}
        ordinal_values: dict[str, int] = {}
        for idx in sorted(emitted.tolist()):
            cid = concept_ids[idx]
            concept_emissions[cid] = float(rng.uniform(lo, hi))
            ev = eval_by_id[cid]
            if ev == "ordinal_severity":
                ordinal_values[cid] = int(rng.integers(4, 11))
            elif ev == "ordinal_duration":
                ordinal_values[cid] = int(rng.choice(DURATION_CHOICES))
            # an emitted ordinal implies its gating yes/no concept
            if ev != "categorical":
                partner = ordinal_partner[cid]
                concept_emissions.setdefault(partner, concept_emissions[cid])

        main_dx = dx_codes[k % len(dx_codes)]
        diagnosis_emissions = {main_dx: float(rng.uniform(0.7, 0.95))}
        for extra in rng.choice(len(dx_codes), size=int(rng.integers(0, 3)),
                                replace=False).tolist():
            diagnosis_emissions.setdefault(dx_codes[extra], float(rng.uniform(0.05, 0.3)))
        med = {med_codes[int(rng.integers(0, len(med_codes)))]: float(rng.uniform(0.4, 0.9))}
        lab = {lab_codes[int(rng.integers(0, len(lab_codes)))]: float(rng.uniform(0.3, 0.8))}
        img = {img_codes[int(rng.integers(0, len(img_codes)))]: float(rng.uniform(0.2, 0.7))}

        chronic = k < n_chronic
        history_profile = {
            "diagnoses": [main_dx],
            "prescriptions": sorted(med),
            "procedures": [proc_codes[int(rng.integers(0, len(proc_codes)))]],
            "chief_complaints": [cc],
        }
        cond_id = f"cond{k:03d}"
        conditions[cond_id] = Condition(
            condition_id=cond_id,
            chief_complaint=cc,
            chronic=chronic,
            concept_emissions=concept_emissions,
            ordinal_values=ordinal_values,
            diagnosis_emissions=diagnosis_emissions,
            medication_emissions=med,
            lab_emissions=lab,
            imaging_emissions=img,
            history_profile=history_profile,
        )
        if not any(p > 0.5 for p in diagnosis_emissions.values()):
            raise WorldConfigError(
                f"condition {cond_id} has no diagnosis emitted with p > 0.5"
            )

    # cohort priors: dirichlet weights over the cc's conditions, total mass < 1
    priors: dict[tuple[str, str, str], dict[str, float]] = {}
    by_cc: dict[str, list[str]] = {cc: [] for cc in ccs}
    for cond in conditions.values():
        by_cc[cond.chief_complaint].append(cond.condition_id)
    for cc in ccs:
        conds = by_cc[cc]
        for age_bin in AGE_BIN_LABELS:
            for sex in SEXES:
                if not conds:
                    priors[(cc, age_bin, sex)] = {}
                    continue
                mass = float(rng.uniform(0.55, 0.8))
                w = rng.dirichlet(np.ones(len(conds)) * 2.0)
                priors[(cc, age_bin, sex)] = {
                    cid: float(mass * wi) for cid, wi in zip(conds, w)
                }

    reason_templates = {}
    for i, cc in enumerate(ccs):
        base = [
            _SYMPTOM_WORDS[(3 * i) % len(_SYMPTOM_WORDS)],
            _SYMPTOM_WORDS[(3 * i + 1) % len(_SYMPTOM_WORDS)],
            _SYMPTOM_WORDS[(3 * i + 2) % len(_SYMPTOM_WORDS)],
        ]
        reason_templates[cc] = base

    healthy_outcome_rates = {
        "diagnoses": {dx_codes[-1]: 0.4},
        "medications": {},
        "labs": {lab_codes[-1]: 0.1},
        "imaging": {},
    }

    return WorldModel(
        seed=seed,
        config=cfg,
        chief_complaints=ccs,
        conditions=conditions,
        priors=priors,
        catalog_doc=catalog_doc,
        reason_templates=reason_templates,
        ordinal_partner=ordinal_partner,
        healthy_outcome_rates=healthy_outcome_rates,
    )


def _sample_reason_text(rng, world: WorldModel, cc: str, followup: bool) -> str:
    cfg = world.config
    words = []
    if followup:
        words.extend(rng.choice(_FOLLOWUP_PHRASES).split())
        if rng.random() < cfg.followup_keyword_prob:
            words.append(rng.choice(world.reason_templates[cc]))
    else:
        kws = world.reason_templates[cc]
        n_kw = int(rng.integers(1, 3))
        words.extend(rng.choice(kws, size=n_kw, replace=False).tolist())
        if rng.random() < 0.6:
            words.extend(["for", str(int(rng.integers(1, 15))), "days"])
    n_noise = int(rng.integers(0, 3))
    for _ in range(n_noise):
        words.append(rng.choice(_NOISE_WORDS))
    return " ".join(words)


def _sample_assertions(rng, world: WorldModel, cond: Optional[Condition]) -> list[Assertion]:
    cfg = world.config
    eval_by_id = {c["id"]: c["response_evaluation"] for c in world.catalog_doc["concepts"]}
    assertions = []
    emitted: set[str] = set()
    emissions = cond.concept_emissions if cond is not None else {}
    for cid, p in emissions.items():
        if rng.random() < p:
            emitted.add(cid)
            ev = eval_by_id[cid]
            if ev == "categorical":
                assertions.append(Assertion(cid, "certain"))
            else:
                assertions.append(Assertion(cid, cond.ordinal_values.get(cid, 3)))
    # healthy background noise: rare spurious positives
    all_ids = [c["id"] for c in world.catalog_doc["concepts"]]
    n_noise = rng.binomial(len(all_ids), cfg.healthy_concept_rate)
    if n_noise:
        for idx in rng.choice(len(all_ids), size=n_noise, replace=False).tolist():
            cid = all_ids[idx]
            if cid in emitted or cid in {a.concept_id for a in assertions}:
                continue
            ev = eval_by_id[cid]
            if ev == "categorical":
                assertions.append(Assertion(cid, "certain"))
            else:
                assertions.append(Assertion(cid, int(rng.integers(1, 5))))
    # negated findings for a random slice of the remaining concepts
    asserted_ids = {a.concept_id for a in assertions}
    candidates = [cid for cid in all_ids if cid not in asserted_ids]
    n_neg = rng.binomial(len(candidates), cfg.absent_density)
    if n_neg:
        for idx in rng.choice(len(candidates), size=n_neg, replace=False).tolist():
            cid = candidates[idx]
            ev = eval_by_id[cid]
            if ev == "categorical":
                assertions.append(Assertion(cid, "absent"))
            else:
                assertions.append(Assertion(cid, 0))
    return assertions


def _sample_outcomes(rng, world: WorldModel, cond: Optional[Condition]) -> Outcomes:
    out = Outcomes()
    buckets = (
        ("diagnoses", "diagnosis_emissions"),
        ("medications", "medication_emissions"),
        ("labs", "lab_emissions"),
        ("imaging", "imaging_emissions"),
    )
    if cond is not None:
        for field_name, attr in buckets:
            for code, p in getattr(cond, attr).items():
                if rng.random() < p:
                    getattr(out, field_name).append(code)
    for field_name, rates in world.healthy_outcome_rates.items():
        for code, p in rates.items():
            if code not in getattr(out, field_name) and rng.random() < p:
                getattr(out, field_name).append(code)
    for field_name, _ in buckets:
        getattr(out, field_name).sort()
    return out


def _sample_history(
    rng, world: WorldModel, chronic: Optional[Condition], lookback_days: int
) -> dict[str, list[HistoryEntry]]:
    history: dict[str, list[HistoryEntry]] = {ch: [] for ch in HISTORY_CHANNELS}
    max_day = max(10, lookback_days)
    noise_items = {
        "diagnoses": [d for d in world.healthy_outcome_rates["diagnoses"]],
        "prescriptions": [f"med{i:03d}" for i in range(min(5, world.config.n_medications))],
        "procedures": [f"proc{i:03d}" for i in range(min(5, world.config.n_procedures))],
        "chief_complaints": world.chief_complaints[: min(5, len(world.chief_complaints))],
    }
    for ch in HISTORY_CHANNELS:
        entries = []
        if chronic is not None:
            profile = chronic.history_profile[ch]
            for _ in range(int(rng.integers(2, 6))):
                day = int(rng.integers(10, max_day + 1))
                items = list(profile)
                entries.append(HistoryEntry(day, items))
        for _ in range(int(rng.integers(0, 2))):
            day = int(rng.integers(1, max_day + 1))
            pool = noise_items[ch]
            if pool:
                entries.append(HistoryEntry(day, [str(rng.choice(pool))]))
        # oldest first, capped at the last 8
        entries.sort(key=lambda e: -e.days_ago)
        history[ch] = entries[-8:] if len(entries) > 8 else entries
    return history


def sample_dataset(
    world: WorldModel,
    n_encounters: int,
    lookback_days: Optional[int] = None,
    seed: Optional[int] = None,
) -> list[Encounter]:
    """Sample encounters; deterministic for a fixed (world, n, lookback, seed)."""
    cfg = world.config
    lookback = lookback_days if lookback_days is not None else cfg.lookback_days
    rng = np.random.default_rng(world.seed + 1 if seed is None else seed)
    chronic_conds = [c for c in world.conditions.values() if c.chronic]

    encounters = []
    for i in range(n_encounters):
        bin_idx = int(rng.choice(len(AGE_BINS), p=_AGE_BIN_WEIGHTS))
        label, lo, hi = AGE_BINS[bin_idx]
        age = int(rng.integers(lo, hi + 1))
        sex = str(rng.choice(SEXES))
        chronic = None
        if chronic_conds and rng.random() < cfg.p_patient_chronic:
            chronic = chronic_conds[int(rng.integers(0, len(chronic_conds)))]

        followup = chronic is not None and rng.random() < cfg.p_chronic_visit
        if followup:
            cc = chronic.chief_complaint
            if rng.random() < cfg.chronic_condition_boost:
                cond = chronic
            else:
                cond = _draw_condition(rng, world, CohortKey(cc, label, sex))
        else:
            cc = world.chief_complaints[int(rng.integers(0, len(world.chief_complaints)))]
            cond = _draw_condition(rng, world, CohortKey(cc, label, sex))

        ccs = [cc]
        if rng.random() < cfg.second_cc_prob and len(world.chief_complaints) > 1:
            other = str(rng.choice([c for c in world.chief_complaints if c != cc]))
            ccs.append(other)

        encounters.append(
            Encounter(
                patient_id=f"p{i:06d}",
                age_years=age,
                age_bin=label,
                sex=sex,
                reason_text=_sample_reason_text(rng, world, cc, followup),
                chief_complaints=ccs,
                assertions=_sample_assertions(rng, world, cond),
                history=_sample_history(rng, world, chronic, min(lookback, cfg.lookback_days)),
                outcomes=_sample_outcomes(rng, world, cond),
                latent_conditions=[] if cond is None else [cond.condition_id],
            )
        )
    return encounters


def _draw_condition(rng, world: WorldModel, cohort: CohortKey) -> Optional[Condition]:
    probs = world.prior(cohort)
    if not probs:
        return None
    ids = sorted(probs)
    p = np.array([probs[i] for i in ids])
    healthy = max(0.0, 1.0 - p.sum())
    choice = rng.choice(len(ids) + 1, p=np.append(p, healthy) / (p.sum() + healthy))
    if choice == len(ids):
        return None
    return world.conditions[ids[choice]]


@dataclass
class PosteriorResult:
    condition_probs: dict[str, float]  # includes "healthy"
    diagnosis_probs: dict[str, float]
    degenerate: bool

    def cross_entropy(self, diagnosis: str, floor: float = 1e-9) -> float:
        return -math.log(max(self.diagnosis_probs.get(diagnosis, 0.0), floor))


def true_posterior(
    world: WorldModel, cohort: CohortKey, asserted: Iterable[Assertion]
) -> PosteriorResult:
    """Exact Bayes posterior over the cohort's conditions given assertions.

    Emissions are conditionally independent given the condition.  Ordinal
    assertions enter as presence (value > 0) / absence (value == 0);
    "unsure" answers carry no evidence.  Zero-probability evidence falls
    back to the prior with the degenerate flag set.
    """
    eps = world.config.healthy_concept_rate
    probs = world.prior(cohort)
    ids = sorted(probs)
    prior = np.array([probs[i] for i in ids], dtype=float)
    healthy_prior = max(0.0, 1.0 - prior.sum())
    prior_full = np.append(prior, healthy_prior)

    log_like = np.zeros(len(ids) + 1)
    for a in asserted:
        if a.value == "unsure":
            continue
        present = (a.value == "certain") if a.is_categorical else (a.value > 0)
        for j, cid in enumerate(ids):
            p_emit = world.conditions[cid].concept_emissions.get(a.concept_id, eps)
            log_like[j] += math.log(p_emit if present else 1.0 - p_emit)
        log_like[-1] += math.log(eps if present else 1.0 - eps)

    with np.errstate(over="ignore"):
        post = prior_full * np.exp(log_like - log_like.max())
    total = post.sum()
    degenerate = not np.isfinite(total) or total <= 0.0
    if degenerate:
        post = prior_full.copy()
        total = post.sum() or 1.0
    post = post / total

    condition_probs = {cid: float(post[j]) for j, cid in enumerate(ids)}
    condition_probs["healthy"] = float(post[-1])

    dx_probs: dict[str, float] = {}
    for j, cid in enumerate(ids):
        for dx, p in world.conditions[cid].diagnosis_emissions.items():
            dx_probs[dx] = dx_probs.get(dx, 0.0) + float(post[j]) * p
    for dx, p in world.healthy_outcome_rates["diagnoses"].items():
        dx_probs[dx] = dx_probs.get(dx, 0.0) + float(post[-1]) * p
    return PosteriorResult(condition_probs, dx_probs, degenerate)


def write_jsonl(encounters: Iterable[Encounter], path) -> int:
    import gzip

    opener = gzip.open if str(path).endswith(".gz") else open
    n = 0
    with opener(path, "wt", encoding="utf-8") as fh:
        for enc in encounters:
            fh.write(json.dumps(enc.to_dict()) + "\n")
            n += 1
    return n


def read_jsonl(path) -> list[Encounter]:
    import gzip

    opener = gzip.open if str(path).endswith(".gz") else open
    out = []
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Encounter.from_dict(json.loads(line)))
    return out
