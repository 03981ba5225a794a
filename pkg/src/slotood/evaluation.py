"""Detection metrics: TPR-calibrated FPR and AUROC, globally and per scenario.

Positives are in-distribution samples, negatives are out-of-distribution,
and larger scores must mean more in-distribution. Two positive-set modes
exist: "standard" treats only id-tagged samples as positive and drops
csid samples; "fs_ood" treats id and csid together as positive. Negatives
are ood-tagged samples in both modes.

The detection threshold is calibrated on positives only: scores are
sorted descending and tau is the score at index ceil(target_tpr * n) - 1,
the largest threshold whose TPR still meets the target (score >= tau
counts as accepted). FPR is then the fraction of negatives at or above
tau. AUROC is the pairwise ranking probability with ties counted half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .scoring import Scenario, ScoredSample

__all__ = [
    "EVALUATION_MODES",
    "LabeledScore",
    "ScenarioMetrics",
    "MetricsReport",
    "calibrate_threshold",
    "fpr_at_tpr",
    "auroc",
    "evaluate",
]

EVALUATION_MODES = ("standard", "fs_ood")

_POSITIVE_ROLES = {"standard": ("id",), "fs_ood": ("id", "csid")}


@dataclass(frozen=True)
class LabeledScore:
    """A detection score with its evaluation role."""

    score: float
    role: str

    def __post_init__(self):
        if self.role not in ("id", "csid", "ood"):
            raise ValueError(f"role must be id, csid or ood, got {self.role!r}")
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


def _as_scores(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be 1-D")
    if arr.shape[0] == 0:
        raise ValueError(f"{what} must be non-empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} contain non-finite values")
    return arr


def calibrate_threshold(positives, target_tpr: float = 0.95) -> float:
    """Largest threshold whose acceptance rule score >= tau meets the target.

    With n positives sorted descending, tau is the entry at index
    ceil(target_tpr * n) - 1. target_tpr = 1.0 therefore returns the
    minimum positive score.
    """
    pos = _as_scores(positives, "positive scores")
    if not (0.0 < target_tpr <= 1.0):
        raise ValueError(f"target_tpr must be in (0, 1], got {target_tpr}")
    n = pos.shape[0]
    idx = math.ceil(target_tpr * n) - 1
    return float(np.sort(pos)[::-1][idx])


def fpr_at_tpr(positives, negatives, target_tpr: float = 0.95) -> float:
    """Fraction of negatives accepted at the calibrated threshold."""
    tau = calibrate_threshold(positives, target_tpr)
    neg = _as_scores(negatives, "negative scores")
    return float((neg >= tau).mean())


def auroc(positives, negatives) -> float:
    """Probability a random positive outranks a random negative.

    Equal to (wins + 0.5 * ties) / (P * N) over all pairs, computed via
    average ranks so large inputs stay O((P + N) log(P + N)).
    """
    pos = _as_scores(positives, "positive scores")
    neg = _as_scores(negatives, "negative scores")
    combined = np.concatenate([pos, neg])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.shape[0], dtype=np.float64)
    sorted_vals = combined[order]
    i = 0
    while i < sorted_vals.shape[0]:
        j = i
        while j + 1 < sorted_vals.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # average 1-based rank over the tie group [i, j]
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    p = pos.shape[0]
    n = neg.shape[0]
    rank_sum = float(ranks[:p].sum())
    return (rank_sum - p * (p + 1) / 2.0) / (p * n)


@dataclass(frozen=True)
class ScenarioMetrics:
    """Metrics restricted to one scenario; None when a side is empty."""

    count: int
    fpr95: Optional[float]
    auroc: Optional[float]


@dataclass(frozen=True)
class MetricsReport:
    mode: str
    score_key: str
    threshold: float
    tpr_achieved: float
    fpr95: float
    auroc: float
    roles: Dict[str, int]
    scenarios: Dict[str, ScenarioMetrics]

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "threshold": self.threshold,
            "tpr_achieved": self.tpr_achieved,
            "fpr95": self.fpr95,
            "auroc": self.auroc,
            "roles": dict(self.roles),
            "scenarios": {
                label: {
                    "count": sm.count,
                    "fpr95": sm.fpr95,
                    "auroc": sm.auroc,
                }
                for label, sm in self.scenarios.items()
            },
        }


def evaluate(
    samples: Sequence[ScoredSample],
    mode: str = "standard",
    score_key: str = "oco",
    target_tpr: float = 0.95,
    recalibrate_per_scenario: bool = False,
) -> MetricsReport:
    """Global and per-scenario metrics over scored samples.

    Samples tagged csid are dropped in standard mode and counted as
    positives in fs_ood mode. Unlabeled samples are rejected; filter them
    out before evaluating. Per-scenario FPR reuses the global threshold
    unless recalibrate_per_scenario is set, in which case each scenario
    with enough positives gets its own threshold.
    """
    if mode not in EVALUATION_MODES:
        raise ValueError(f"mode must be one of {EVALUATION_MODES}, got {mode!r}")
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to evaluate")
    unlabeled = [s.sample_id for s in samples if s.dataset_tag == "unlabeled"]
    if unlabeled:
        raise ValueError(
            f"{len(unlabeled)} unlabeled samples cannot be evaluated "
            f"(first: {unlabeled[0]!r})"
        )
    roles = {"id": 0, "csid": 0, "ood": 0}
    for s in samples:
        roles[s.dataset_tag] += 1
    positive_roles = _POSITIVE_ROLES[mode]

    def split(subset):
        pos = [s.score(score_key) for s in subset if s.dataset_tag in positive_roles]
        neg = [s.score(score_key) for s in subset if s.dataset_tag == "ood"]
        return pos, neg

    pos, neg = split(samples)
    if not pos:
        raise ValueError(f"no positive samples for mode {mode!r}")
    if not neg:
        raise ValueError("no ood samples to evaluate against")
    tau = calibrate_threshold(pos, target_tpr)
    pos_arr = np.asarray(pos)
    neg_arr = np.asarray(neg)
    report_scenarios: Dict[str, ScenarioMetrics] = {}
    for scenario in Scenario:
        subset = [s for s in samples if s.scenario is scenario]
        count = len(subset)
        s_pos, s_neg = split(subset)
        s_fpr: Optional[float] = None
        s_auroc: Optional[float] = None
        if s_neg:
            s_tau = tau
            if recalibrate_per_scenario and s_pos:
                s_tau = calibrate_threshold(s_pos, target_tpr)
            s_fpr = float((np.asarray(s_neg) >= s_tau).mean())
        if s_pos and s_neg:
            s_auroc = auroc(s_pos, s_neg)
        report_scenarios[scenario.label] = ScenarioMetrics(
            count=count, fpr95=s_fpr, auroc=s_auroc
        )
    return MetricsReport(
        mode=mode,
        score_key=score_key,
        threshold=tau,
        tpr_achieved=float((pos_arr >= tau).mean()),
        fpr95=float((neg_arr >= tau).mean()),
        auroc=auroc(pos_arr, neg_arr),
        roles=roles,
        scenarios=report_scenarios,
    )
