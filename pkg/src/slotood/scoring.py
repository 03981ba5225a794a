"""Scenario-divided detection scores over slot-level predictions.

A test image falls into exactly one of three scenarios, decided by its
frequency set f and the training co-occurrence table:

  S1  single category: |f| = 1. No co-occurrence evidence exists, so the
      score is the scene-level confidence times the best slot confidence.
  S2  typical combination: |f| >= 2 and f is in the table. Categories
      vouch for each other: the score combines the dominant category's
      confidence with each other category's confidence as two independent
      sources of in-distribution evidence and averages the combinations.
  S3  atypical combination: |f| >= 2 and f is absent. Co-occurrence
      contradicts training, so only the best slot confidence remains.

All scores live in [0, 1]; larger means more in-distribution.

Aggregated-logit baselines (max softmax probability, max logit, energy)
are computed here as well so every scored sample carries its comparison
columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

import numpy as np

from .patterns import (
    ConfigurationKind,
    CoOccurrenceTable,
    FrequencySet,
    classify_configuration,
    contains,
    frequency_set,
    slot_predictions,
)
from .slotcore import SlotLogitsRecord, aggregate_logits

__all__ = [
    "Scenario",
    "ConfidenceSummary",
    "ScoredSample",
    "BASELINE_NAMES",
    "confidence_summary",
    "divide_scenario",
    "score_single",
    "belief_combination",
    "score_ambiguous",
    "score_unreliable",
    "oco_score",
    "baseline_scores",
    "score_sample",
]

BASELINE_NAMES = ("msp", "maxlogit", "energy")


class Scenario(Enum):
    S1_SINGLE = "S1"
    S2_TYPICAL = "S2"
    S3_ATYPICAL = "S3"

    @property
    def label(self) -> str:
        return self.value

    @staticmethod
    def from_label(label: str) -> "Scenario":
        for s in Scenario:
            if s.value == label:
                return s
        raise ValueError(f"unknown scenario label {label!r}")


@dataclass(frozen=True)
class ConfidenceSummary:
    """Softmax confidence digests of one record.

    scene_conf: max softmax probability of the aggregated logits.
    slot_conf: max softmax probability over all individual slots.
    per_category: for each class some slot predicts, the highest softmax
    probability that any such slot assigns to it.
    """

    scene_conf: float
    slot_conf: float
    per_category: Dict[int, float]

    def __post_init__(self):
        if not (0.0 <= self.scene_conf <= 1.0):
            raise ValueError(f"scene_conf outside [0, 1]: {self.scene_conf}")
        if not (0.0 <= self.slot_conf <= 1.0):
            raise ValueError(f"slot_conf outside [0, 1]: {self.slot_conf}")
        for cls, p in self.per_category.items():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"per_category[{cls}] outside [0, 1]: {p}")


def _softmax_vec(v: np.ndarray) -> np.ndarray:
    z = v - v.max()
    e = np.exp(z)
    return e / e.sum()


def confidence_summary(record: SlotLogitsRecord) -> ConfidenceSummary:
    """Compute the scene, slot, and per-category confidences of a record."""
    sl = record.slot_logits
    agg = record.agg_logits if record.agg_logits is not None else aggregate_logits(sl)
    scene_conf = float(_softmax_vec(agg).max())
    preds = slot_predictions(sl)
    per_category: Dict[int, float] = {}
    slot_conf = 0.0
    for k in range(sl.shape[0]):
        probs = _softmax_vec(sl[k])
        cls = int(preds[k])
        p = float(probs[cls])
        slot_conf = max(slot_conf, p)
        if p > per_category.get(cls, 0.0):
            per_category[cls] = p
    return ConfidenceSummary(
        scene_conf=scene_conf, slot_conf=slot_conf, per_category=per_category
    )


def divide_scenario(f: FrequencySet, table: CoOccurrenceTable) -> Scenario:
    """Assign the frequency set to exactly one scenario."""
    if classify_configuration(f) is ConfigurationKind.SINGLE_CATEGORY:
        return Scenario.S1_SINGLE
    if contains(table, f):
        return Scenario.S2_TYPICAL
    return Scenario.S3_ATYPICAL


def score_single(cs: ConfidenceSummary) -> float:
    """S1 score: scene confidence times best slot confidence."""
    return cs.scene_conf * cs.slot_conf


def belief_combination(a: float, b: float) -> float:
    """Combine two independent in-distribution evidences in [0, 1].

    Returns a*b + a*(1-b) + (1-a)*b, the probability that at least one
    source is right, equivalently 1 - (1-a)*(1-b). Inputs outside [0, 1]
    are rejected.
    """
    if not (0.0 <= a <= 1.0) or not (0.0 <= b <= 1.0):
        raise ValueError(f"evidence values must lie in [0, 1], got {a}, {b}")
    return a * b + a * (1.0 - b) + (1.0 - a) * b


def score_ambiguous(cs: ConfidenceSummary, f: FrequencySet) -> float:
    """S2 score: mean belief combination of the dominant category with
    each other category in f.

    The dominant category is the one with the largest per-category
    confidence; ties resolve to the lowest class index. Every class in f
    must have a per-category entry, which holds whenever cs and f were
    derived from the same record.
    """
    if len(f) < 2:
        raise ValueError(f"ambiguous scoring needs >= 2 categories, got {f!r}")
    classes = [c for c, _ in f]
    missing = [c for c in classes if c not in cs.per_category]
    if missing:
        raise ValueError(
            f"per-category confidence missing for classes {missing}"
        )
    dominant = min(
        classes, key=lambda c: (-cs.per_category[c], c)
    )
    p_dom = cs.per_category[dominant]
    others = [c for c in classes if c != dominant]
    total = 0.0
    for c in others:
        total += belief_combination(p_dom, cs.per_category[c])
    return total / len(others)


def score_unreliable(cs: ConfidenceSummary) -> float:
    """S3 score: only the best slot confidence is trusted."""
    return cs.slot_conf


def oco_score(
    record: SlotLogitsRecord, table: CoOccurrenceTable
) -> "tuple[Scenario, float]":
    """Scenario assignment and detection score for one record."""
    f = frequency_set(slot_predictions(record.slot_logits))
    scenario = divide_scenario(f, table)
    cs = confidence_summary(record)
    if scenario is Scenario.S1_SINGLE:
        return scenario, score_single(cs)
    if scenario is Scenario.S2_TYPICAL:
        return scenario, score_ambiguous(cs, f)
    return scenario, score_unreliable(cs)


def baseline_scores(record: SlotLogitsRecord) -> Dict[str, float]:
    """Aggregated-logit baselines: msp, maxlogit, energy.

    msp is the max softmax probability, maxlogit the largest raw logit,
    energy the log-sum-exp of the logits. All are computed on the stored
    aggregate logits when present, else on the column sum of the slot
    logits.
    """
    agg = (
        record.agg_logits
        if record.agg_logits is not None
        else aggregate_logits(record.slot_logits)
    )
    top = float(agg.max())
    lse = top + math.log(float(np.exp(agg - top).sum()))
    return {
        "msp": float(_softmax_vec(agg).max()),
        "maxlogit": top,
        "energy": lse,
    }


@dataclass(frozen=True)
class ScoredSample:
    """One record's detection outputs, ready for evaluation or export."""

    sample_id: str
    scenario: Scenario
    oco: float
    baselines: Dict[str, float]
    dataset_tag: str

    def score(self, key: str = "oco") -> float:
        if key == "oco":
            return self.oco
        if key in self.baselines:
            return self.baselines[key]
        raise KeyError(f"unknown score key {key!r}")


def score_sample(record: SlotLogitsRecord, table: CoOccurrenceTable) -> ScoredSample:
    """Full per-record scoring: scenario, detection score, baselines."""
    scenario, value = oco_score(record, table)
    return ScoredSample(
        sample_id=record.sample_id,
        scenario=scenario,
        oco=value,
        baselines=baseline_scores(record),
        dataset_tag=record.dataset_tag,
    )
