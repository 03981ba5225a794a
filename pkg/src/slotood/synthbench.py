"""Synthetic slot-logits benchmark with known ground truth.

The generator emits records directly at the slot-logits level, so the
whole detection stack can be exercised without a trained model. Per-slot
logits are built from target confidences: the intended class of a slot
gets logit log((M-1) * c / (1 - c)) and every other class gets 0, which
makes the slot's softmax probability of the intended class exactly c at
zero noise. Gaussian noise is then added to the logits (not the
probabilities), preserving the softmax structure.

Three test populations mirror a standard evaluation protocol:

  id    scenes drawn from a fixed graph of in-distribution frequency
        sets, high confidence.
  near  an ID scene with one object replaced by an unseen class; the
        oracle classifier maps it to a confused ID class at moderate
        confidence, yielding plausible but class- or count-shifted
        patterns. A configurable fraction of draws places the unseen
        object in a context its confused class was actually trained
        with, so the predicted pattern is a known combination.
  far   frequency sets absent from the graph, with low, diffuse
        confidences.

A csid population (same patterns as ID, degraded confidence) models
covariate shift for the fs_ood evaluation mode.

Randomness is counter-based: record i of a split is generated from a
generator seeded by (seed, split_code, i), so generation order is
irrelevant and any record can be reproduced in isolation.

A second, scene-level layer supports slot-count studies: scenes are
object sets with areas, slots are apportioned to objects by area, and
per-slot confidence degrades as an object is split across more slots
(its odds divide by slots^overseg_gamma). Under-segmentation hides small
objects, over-segmentation erodes slot evidence, and detection quality
peaks at an intermediate slot count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .evaluation import EVALUATION_MODES, MetricsReport, evaluate
from .patterns import (
    CoOccurrenceTable,
    FrequencySet,
    build_table,
    is_canonical,
)
from .scoring import BASELINE_NAMES, ScoredSample, score_sample
from .slotcore import SlotLogitsRecord

__all__ = [
    "GeneratorConfig",
    "SyntheticSplit",
    "BenchmarkResult",
    "SceneTemplate",
    "SceneConfig",
    "confidence_to_logit",
    "default_config",
    "generate_id",
    "generate_csid",
    "generate_near_ood",
    "generate_far_ood",
    "run_benchmark",
    "allocate_slots",
    "degraded_confidence",
    "default_scene_config",
    "generate_scene_split",
    "slot_count_sweep",
]

_SPLIT_CODES = {"train": 0, "id": 1, "csid": 2, "near": 3, "far": 4}

_CONF_FLOOR = 1e-9
_METHODS = ("oco",) + BASELINE_NAMES


def confidence_to_logit(conf: float, num_classes: int) -> float:
    """Logit giving softmax probability `conf` against M-1 zero logits."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    c = min(max(conf, _CONF_FLOOR), 1.0 - _CONF_FLOOR)
    return math.log((num_classes - 1) * c / (1.0 - c))


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the pattern-graph generator. See the module docstring."""

    num_classes: int = 20
    num_slots: int = 6
    id_pattern_graph: Tuple[FrequencySet, ...] = ()
    near_confusion: Dict[int, Tuple[int, float]] = field(default_factory=dict)
    noise_sigma: float = 0.35
    id_confidence: float = 0.9
    confidence_sd: float = 0.03
    far_confidence: float = 0.3
    csid_confidence: float = 0.65
    near_context_prob: float = 0.5
    train_samples: int = 2000
    eval_samples: int = 500
    seed: int = 7

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if not self.id_pattern_graph:
            raise ValueError("id_pattern_graph must not be empty")
        for f in self.id_pattern_graph:
            if not is_canonical(f):
                raise ValueError(f"graph pattern not canonical: {f!r}")
            if sum(n for _, n in f) != self.num_slots:
                raise ValueError(
                    f"graph pattern counts must sum to {self.num_slots}: {f!r}"
                )
            if any(c >= self.num_classes for c, _ in f):
                raise ValueError(f"graph pattern class outside ID space: {f!r}")
        for unseen, (target, conf) in self.near_confusion.items():
            if unseen < self.num_classes:
                raise ValueError(
                    f"unseen class {unseen} collides with the ID class space"
                )
            if not (0 <= target < self.num_classes):
                raise ValueError(f"confusion target {target} is not an ID class")
            if not (0.0 < conf < 1.0):
                raise ValueError(f"confusion confidence must be in (0, 1): {conf}")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        for name in ("id_confidence", "far_confidence", "csid_confidence"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if not (0.0 <= self.near_context_prob <= 1.0):
            raise ValueError("near_context_prob must be in [0, 1]")
        object.__setattr__(self, "id_pattern_graph", tuple(self.id_pattern_graph))
        object.__setattr__(self, "near_confusion", dict(self.near_confusion))


def default_config() -> GeneratorConfig:
    """20 ID classes, 10 unseen, 6 slots, 2000 train / 500 eval records.

    The graph pairs every class c with its ring neighbor (4 + 2 slots)
    and gives every even class a single-category pattern, so roughly two
    thirds of ID draws are multi-category. Unseen class 20 + j is
    confused with ID class 2j + 1 at confidence 0.55.
    """
    m = 20
    graph: List[FrequencySet] = []
    for c in range(m):
        pair = sorted([(c, 4), ((c + 1) % m, 2)])
        graph.append(tuple(pair))
    for c in range(0, m, 2):
        graph.append(((c, 6),))
    confusion = {m + j: (2 * j + 1, 0.55) for j in range(10)}
    return GeneratorConfig(
        num_classes=m,
        num_slots=6,
        id_pattern_graph=tuple(graph),
        near_confusion=confusion,
    )


@dataclass(frozen=True)
class SyntheticSplit:
    """Generated records plus the zero-noise intent of each record.

    intents[i] is the frequency set record i's slot predictions resolve
    to when noise_sigma is 0 (unseen classes already mapped through the
    confusion oracle).
    """

    name: str
    records: Tuple[SlotLogitsRecord, ...]
    intents: Tuple[FrequencySet, ...]

    def __post_init__(self):
        if len(self.records) != len(self.intents):
            raise ValueError("records and intents must align")
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "intents", tuple(self.intents))


def _record_rng(config_seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng((config_seed, _SPLIT_CODES[split], index))


def _emit(
    rng: np.random.Generator,
    config: GeneratorConfig,
    sample_id: str,
    tag: str,
    slot_classes: Sequence[int],
    slot_confs: Sequence[float],
    label: Optional[int],
) -> SlotLogitsRecord:
    k, m = config.num_slots, config.num_classes
    assert len(slot_classes) == k and len(slot_confs) == k
    logits = np.zeros((k, m))
    for row, (cls, conf) in enumerate(zip(slot_classes, slot_confs)):
        logits[row, cls] = confidence_to_logit(conf, m)
    if config.noise_sigma > 0.0:
        logits = logits + rng.normal(0.0, config.noise_sigma, size=(k, m))
    return SlotLogitsRecord(
        sample_id=sample_id,
        slot_logits=logits,
        label=label,
        dataset_tag=tag,
    )


def _draw_confs(rng, mean: float, sd: float, count: int) -> np.ndarray:
    return np.clip(rng.normal(mean, sd, size=count), 0.02, 0.995)


def _expand(f: FrequencySet) -> List[int]:
    out: List[int] = []
    for cls, count in f:
        out.extend([cls] * count)
    return out


def _dominant_class(f: FrequencySet) -> int:
    # largest count, ties to the lowest class
    return min(f, key=lambda e: (-e[1], e[0]))[0]


def generate_id(
    config: GeneratorConfig,
    n: int,
    split: str = "id",
    confidence: Optional[float] = None,
) -> SyntheticSplit:
    """ID records: a graph pattern per record, high slot confidence."""
    if split not in _SPLIT_CODES:
        raise ValueError(f"unknown split {split!r}")
    conf_mean = config.id_confidence if confidence is None else confidence
    tag = "csid" if split == "csid" else "id"
    records = []
    intents = []
    for i in range(n):
        rng = _record_rng(config.seed, split, i)
        pattern = config.id_pattern_graph[
            int(rng.integers(len(config.id_pattern_graph)))
        ]
        classes = _expand(pattern)
        rng.shuffle(classes)
        confs = _draw_confs(rng, conf_mean, config.confidence_sd, config.num_slots)
        records.append(
            _emit(
                rng,
                config,
                f"{split}-{i:05d}",
                tag,
                classes,
                confs,
                label=_dominant_class(pattern),
            )
        )
        intents.append(pattern)
    return SyntheticSplit(name=split, records=tuple(records), intents=tuple(intents))


def generate_csid(config: GeneratorConfig, n: int) -> SyntheticSplit:
    """Covariate-shifted ID: the same patterns at degraded confidence."""
    return generate_id(config, n, split="csid", confidence=config.csid_confidence)


def _canonical_from_classes(classes: Sequence[int]) -> FrequencySet:
    vals, counts = np.unique(np.asarray(classes), return_counts=True)
    return tuple((int(c), int(n)) for c, n in zip(vals, counts))


def generate_near_ood(config: GeneratorConfig, n: int) -> SyntheticSplit:
    """Near OOD: one object of an ID scene replaced by an unseen class.

    The unseen class is predicted as its confused ID class at the
    confusion confidence. With probability near_context_prob the scene is
    chosen so the confused class sits in a combination it was trained
    with; otherwise a random object of a random pattern is replaced,
    which usually shifts the pattern off the graph.
    """
    if not config.near_confusion:
        raise ValueError("near_confusion must not be empty for near-OOD")
    unseen_classes = sorted(config.near_confusion)
    graph = config.id_pattern_graph
    records = []
    intents = []
    for i in range(n):
        rng = _record_rng(config.seed, "near", i)
        unseen = unseen_classes[int(rng.integers(len(unseen_classes)))]
        target, conf_mean = config.near_confusion[unseen]
        use_context = rng.random() < config.near_context_prob
        context = [
            p for p in graph if len(p) >= 2 and any(c == target for c, _ in p)
        ]
        if use_context and context:
            pattern = context[int(rng.integers(len(context)))]
            replaced_class = target
        else:
            pattern = graph[int(rng.integers(len(graph)))]
            distinct = [c for c, _ in pattern]
            replaced_class = distinct[int(rng.integers(len(distinct)))]
        slot_classes = []
        slot_conf_means = []
        for cls in _expand(pattern):
            if cls == replaced_class:
                slot_classes.append(target)
                slot_conf_means.append(conf_mean)
            else:
                slot_classes.append(cls)
                slot_conf_means.append(config.id_confidence)
        order = rng.permutation(config.num_slots)
        slot_classes = [slot_classes[j] for j in order]
        slot_conf_means = [slot_conf_means[j] for j in order]
        confs = [
            float(np.clip(rng.normal(mu, config.confidence_sd), 0.02, 0.995))
            for mu in slot_conf_means
        ]
        records.append(
            _emit(
                rng,
                config,
                f"near-{i:05d}",
                "ood",
                slot_classes,
                confs,
                label=None,
            )
        )
        intents.append(_canonical_from_classes(slot_classes))
    return SyntheticSplit(name="near", records=tuple(records), intents=tuple(intents))


def generate_far_ood(config: GeneratorConfig, n: int) -> SyntheticSplit:
    """Far OOD: multi-category frequency sets absent from the graph,
    rendered at low, diffuse confidence."""
    graph_set = set(config.id_pattern_graph)
    k, m = config.num_slots, config.num_classes
    if k < 2:
        raise ValueError("far-OOD needs at least 2 slots")
    records = []
    intents = []
    for i in range(n):
        rng = _record_rng(config.seed, "far", i)
        pattern = None
        for _ in range(64):
            n_cat = int(rng.integers(2, min(3, k) + 1))
            classes = sorted(rng.choice(m, size=n_cat, replace=False).tolist())
            cuts = sorted(rng.choice(np.arange(1, k), size=n_cat - 1, replace=False))
            bounds = [0] + [int(c) for c in cuts] + [k]
            counts = [bounds[j + 1] - bounds[j] for j in range(n_cat)]
            candidate = tuple((int(c), int(cnt)) for c, cnt in zip(classes, counts))
            if candidate not in graph_set:
                pattern = candidate
                break
        if pattern is None:
            raise RuntimeError(
                "could not draw a pattern absent from the graph; "
                "the graph covers too much of the pattern space"
            )
        classes = _expand(pattern)
        rng.shuffle(classes)
        confs = _draw_confs(
            rng, config.far_confidence, config.confidence_sd, k
        )
        records.append(
            _emit(rng, config, f"far-{i:05d}", "ood", classes, confs, label=None)
        )
        intents.append(pattern)
    return SyntheticSplit(name="far", records=tuple(records), intents=tuple(intents))


@dataclass(frozen=True)
class BenchmarkResult:
    """Everything a benchmark run produced.

    reports is keyed [method][ood_split][mode] with method one of
    oco/msp/maxlogit/energy, ood_split one of near/far/all, and mode one
    of standard/fs_ood. populations counts scenario labels per split.
    """

    config: GeneratorConfig
    table: CoOccurrenceTable
    splits: Dict[str, SyntheticSplit]
    scored: Dict[str, List[ScoredSample]]
    reports: Dict[str, Dict[str, Dict[str, MetricsReport]]]
    populations: Dict[str, Dict[str, int]]


def run_benchmark(config: GeneratorConfig) -> BenchmarkResult:
    """Generate, build the table, score, and evaluate every method."""
    train = generate_id(config, config.train_samples, split="train")
    table = build_table(
        list(train.records), config.num_slots, config.num_classes
    )
    splits = {
        "train": train,
        "id": generate_id(config, config.eval_samples, split="id"),
        "csid": generate_csid(config, config.eval_samples),
        "near": generate_near_ood(config, config.eval_samples),
        "far": generate_far_ood(config, config.eval_samples),
    }
    scored = {
        name: [score_sample(rec, table) for rec in splits[name].records]
        for name in ("id", "csid", "near", "far")
    }
    populations = {
        name: _scenario_counts(samples) for name, samples in scored.items()
    }
    reports: Dict[str, Dict[str, Dict[str, MetricsReport]]] = {}
    ood_subsets = {
        "near": scored["near"],
        "far": scored["far"],
        "all": scored["near"] + scored["far"],
    }
    for method in _METHODS:
        reports[method] = {}
        for ood_name, ood_samples in ood_subsets.items():
            reports[method][ood_name] = {}
            pool = scored["id"] + scored["csid"] + ood_samples
            for mode in EVALUATION_MODES:
                reports[method][ood_name][mode] = evaluate(
                    pool, mode=mode, score_key=method
                )
    return BenchmarkResult(
        config=config,
        table=table,
        splits=splits,
        scored=scored,
        reports=reports,
        populations=populations,
    )


def _scenario_counts(samples: Sequence[ScoredSample]) -> Dict[str, int]:
    counts = {"S1": 0, "S2": 0, "S3": 0}
    for s in samples:
        counts[s.scenario.label] += 1
    return counts


# ------------------------------------------------------------ scene layer


@dataclass(frozen=True)
class SceneTemplate:
    """A scene as objects with relative areas; weight biases sampling."""

    classes: Tuple[int, ...]
    areas: Tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        if len(self.classes) != len(self.areas) or not self.classes:
            raise ValueError("classes and areas must be non-empty and align")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("scene classes must be distinct")
        if any(a <= 0 for a in self.areas):
            raise ValueError("areas must be positive")
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        total = sum(self.areas)
        object.__setattr__(
            self, "areas", tuple(a / total for a in self.areas)
        )
        object.__setattr__(self, "classes", tuple(self.classes))


@dataclass(frozen=True)
class SceneConfig:
    """Scene distribution for slot-count studies; fixed across K."""

    num_classes: int
    templates: Tuple[SceneTemplate, ...]
    near_confusion: Dict[int, Tuple[int, float]]
    noise_sigma: float = 1.0
    id_confidence: float = 0.9
    confidence_sd: float = 0.03
    far_confidence: float = 0.3
    overseg_gamma: float = 1.1
    train_samples: int = 2000
    eval_samples: int = 800
    seed: int = 7

    def __post_init__(self):
        if not self.templates:
            raise ValueError("templates must not be empty")
        for t in self.templates:
            if any(c >= self.num_classes for c in t.classes):
                raise ValueError("template class outside ID space")
        if not self.near_confusion:
            raise ValueError("near_confusion must not be empty")
        object.__setattr__(self, "templates", tuple(self.templates))
        object.__setattr__(self, "near_confusion", dict(self.near_confusion))


def allocate_slots(areas: Sequence[float], k: int) -> List[int]:
    """Apportion k slots to objects proportionally to area.

    Largest-remainder rounding; ties favor the earlier object. Objects can
    receive zero slots when k is smaller than the object count, which is
    exactly the under-segmentation regime.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    areas = np.asarray(areas, dtype=np.float64)
    if areas.ndim != 1 or areas.shape[0] < 1 or (areas <= 0).any():
        raise ValueError("areas must be a non-empty positive 1-D sequence")
    quotas = areas / areas.sum() * k
    counts = np.floor(quotas).astype(int)
    remainder = k - int(counts.sum())
    if remainder > 0:
        fractional = quotas - np.floor(quotas)
        # stable sort: descending fraction, then ascending index
        order = np.lexsort((np.arange(len(areas)), -fractional))
        for idx in order[:remainder]:
            counts[idx] += 1
    return counts.tolist()


def degraded_confidence(base: float, slots_per_object: int, gamma: float) -> float:
    """Confidence of one slot when its object is split across s slots.

    The object's evidence is divided: the odds base/(1-base) shrink by
    s**gamma. s=1 returns base unchanged.
    """
    if slots_per_object < 1:
        raise ValueError("slots_per_object must be >= 1")
    if not (0.0 < base < 1.0):
        raise ValueError("base confidence must be in (0, 1)")
    odds = base / (1.0 - base) / (slots_per_object**gamma)
    return odds / (1.0 + odds)


def _scene_slots(
    rng,
    cfg: SceneConfig,
    k: int,
    classes: Sequence[int],
    areas: Sequence[float],
    conf_means: Sequence[float],
) -> Tuple[List[int], List[float]]:
    counts = allocate_slots(areas, k)
    slot_classes: List[int] = []
    slot_confs: List[float] = []
    for cls, s, mean in zip(classes, counts, conf_means):
        if s == 0:
            continue
        eff = degraded_confidence(mean, s, cfg.overseg_gamma)
        for _ in range(s):
            slot_classes.append(cls)
            slot_confs.append(
                float(np.clip(rng.normal(eff, cfg.confidence_sd), 0.02, 0.995))
            )
    order = rng.permutation(len(slot_classes))
    return (
        [slot_classes[j] for j in order],
        [slot_confs[j] for j in order],
    )


def _scene_emit(rng, cfg: SceneConfig, k: int, sample_id, tag, classes, confs):
    logits = np.zeros((k, cfg.num_classes))
    for row, (cls, conf) in enumerate(zip(classes, confs)):
        logits[row, cls] = confidence_to_logit(conf, cfg.num_classes)
    if cfg.noise_sigma > 0.0:
        logits = logits + rng.normal(0.0, cfg.noise_sigma, size=logits.shape)
    return SlotLogitsRecord(
        sample_id=sample_id, slot_logits=logits, dataset_tag=tag
    )


def _pick_template(rng, cfg: SceneConfig) -> SceneTemplate:
    weights = np.asarray([t.weight for t in cfg.templates])
    probs = weights / weights.sum()
    return cfg.templates[int(rng.choice(len(cfg.templates), p=probs))]


def generate_scene_split(
    cfg: SceneConfig, k: int, n: int, kind: str
) -> List[SlotLogitsRecord]:
    """Records of one split ('id', 'train', 'near', 'far') at slot count k.

    near replaces the smallest-area object of the scene with an unseen
    class, predicted as its confused ID class at the confusion
    confidence. far renders a class set no template uses, at the far
    confidence, with random areas.
    """
    if kind not in ("train", "id", "near", "far"):
        raise ValueError(f"unknown scene split {kind!r}")
    split_code = {"train": 0, "id": 1, "near": 3, "far": 4}[kind]
    tag = "id" if kind in ("train", "id") else "ood"
    template_sets = {frozenset(t.classes) for t in cfg.templates}
    unseen_classes = sorted(cfg.near_confusion)
    records = []
    for i in range(n):
        rng = np.random.default_rng((cfg.seed, 100 + split_code, k, i))
        if kind in ("train", "id"):
            t = _pick_template(rng, cfg)
            classes = list(t.classes)
            areas = list(t.areas)
            conf_means = [cfg.id_confidence] * len(classes)
        elif kind == "near":
            t = _pick_template(rng, cfg)
            unseen = unseen_classes[int(rng.integers(len(unseen_classes)))]
            target, conf = cfg.near_confusion[unseen]
            smallest = int(np.argmin(t.areas))
            classes = [
                target if j == smallest else c for j, c in enumerate(t.classes)
            ]
            areas = list(t.areas)
            conf_means = [
                conf if j == smallest else cfg.id_confidence
                for j in range(len(classes))
            ]
            # a collision between the confused class and a genuine object
            # merges them into one object
            if len(set(classes)) != len(classes):
                merged: Dict[int, Tuple[float, float]] = {}
                for cls, area, mean in zip(classes, areas, conf_means):
                    if cls in merged:
                        a0, m0 = merged[cls]
                        merged[cls] = (a0 + area, min(m0, mean))
                    else:
                        merged[cls] = (area, mean)
                classes = list(merged)
                areas = [merged[c][0] for c in classes]
                conf_means = [merged[c][1] for c in classes]
        else:
            for _ in range(64):
                n_cat = int(rng.integers(2, 4))
                chosen = sorted(
                    rng.choice(cfg.num_classes, size=n_cat, replace=False).tolist()
                )
                if frozenset(chosen) not in template_sets:
                    break
            else:
                raise RuntimeError("could not draw a far scene off the templates")
            classes = chosen
            raw = rng.random(n_cat) + 0.2
            areas = (raw / raw.sum()).tolist()
            conf_means = [cfg.far_confidence] * n_cat
        slot_classes, slot_confs = _scene_slots(
            rng, cfg, k, classes, areas, conf_means
        )
        records.append(
            _scene_emit(
                rng, cfg, k, f"{kind}-k{k}-{i:05d}", tag, slot_classes, slot_confs
            )
        )
    return records


def default_scene_config() -> SceneConfig:
    """Mixed 1/2/3-object scenes over 20 classes; see slot_count_sweep."""
    m = 20
    templates: List[SceneTemplate] = []
    # varied area splits keep slot-apportionment transitions from
    # synchronizing across templates, which would notch the sweep curve
    for i, c in enumerate(range(0, m, 2)):
        big = 0.70 + 0.03 * (i % 5)
        templates.append(
            SceneTemplate(classes=(c, (c + 1) % m), areas=(big, 1.0 - big))
        )
    for j, c in enumerate(range(0, m, 4)):
        areas = (0.55 + 0.02 * j, 0.28 - 0.01 * j, 0.17 - 0.01 * j)
        templates.append(
            SceneTemplate(classes=(c, (c + 3) % m, (c + 9) % m), areas=areas)
        )
    for c in (1, 7, 13):
        templates.append(SceneTemplate(classes=(c,), areas=(1.0,)))
    confusion = {m + j: (2 * j + 1, 0.55) for j in range(10)}
    return SceneConfig(
        num_classes=m,
        templates=tuple(templates),
        near_confusion=confusion,
    )


def slot_count_sweep(
    cfg: SceneConfig, ks: Sequence[int] = tuple(range(2, 11))
) -> List[Tuple[int, float]]:
    """Detection AUROC as a function of the slot count K.

    The scene distribution stays fixed; only the slot apportionment and
    the per-slot evidence dilution change with K. Returns (k, auroc)
    pairs, standard mode, ID versus near plus far.
    """
    out = []
    for k in ks:
        if k < 2:
            raise ValueError("sweep slot counts must be >= 2")
        train = generate_scene_split(cfg, k, cfg.train_samples, "train")
        table = build_table(train, k, cfg.num_classes)
        test_id = generate_scene_split(cfg, k, cfg.eval_samples, "id")
        near = generate_scene_split(cfg, k, cfg.eval_samples // 2, "near")
        far = generate_scene_split(cfg, k, cfg.eval_samples // 2, "far")
        samples = [score_sample(r, table) for r in test_id + near + far]
        report = evaluate(samples, mode="standard", score_key="oco")
        out.append((int(k), float(report.auroc)))
    return out
