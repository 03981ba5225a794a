"""Tests for the synthetic benchmark generator.

The generator's contract is analytic: at zero noise every record's slot
predictions must recover the intended frequency set exactly, because the
confidence-to-logit map is the inverse of softmax against zero logits.
Directional checks on the full benchmark (population shapes, method
ordering) live in the acceptance suite; here we keep sizes small.
"""

import dataclasses
import math

import numpy as np
import pytest

from slotood.evaluation import MetricsReport
from slotood.numerics import softmax_rows
from slotood.patterns import build_table, frequency_set
from slotood.slotcore import SlotLogitsRecord
from slotood.synthbench import (
    GeneratorConfig,
    SceneConfig,
    SceneTemplate,
    allocate_slots,
    confidence_to_logit,
    default_config,
    default_scene_config,
    degraded_confidence,
    generate_csid,
    generate_far_ood,
    generate_id,
    generate_near_ood,
    generate_scene_split,
    run_benchmark,
    slot_count_sweep,
)


def _noiseless(config: GeneratorConfig) -> GeneratorConfig:
    return dataclasses.replace(config, noise_sigma=0.0, confidence_sd=0.0)


def _small_config(**overrides) -> GeneratorConfig:
    base = default_config()
    params = dict(train_samples=300, eval_samples=120)
    params.update(overrides)
    return dataclasses.replace(base, **params)


def _predictions(record: SlotLogitsRecord) -> np.ndarray:
    return np.argmax(record.slot_logits, axis=1)


def _mean_pmax(records) -> float:
    vals = []
    for r in records:
        probs = softmax_rows(r.slot_logits)
        vals.append(float(probs.max()))
    return float(np.mean(vals))


class TestConfidenceToLogit:
    def test_softmax_inverts_exactly(self):
        # one logit L against M-1 zeros must softmax back to c
        for m in (2, 5, 20, 100):
            for c in (0.01, 0.3, 0.5, 0.9, 0.99):
                val = confidence_to_logit(c, m)
                recovered = math.exp(val) / (math.exp(val) + (m - 1))
                assert abs(recovered - c) < 1e-12

    def test_uniform_confidence_gives_zero(self):
        assert confidence_to_logit(1.0 / 8.0, 8) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_confidence(self):
        vals = [confidence_to_logit(c, 10) for c in np.linspace(0.05, 0.95, 19)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_extremes_are_finite(self):
        assert math.isfinite(confidence_to_logit(0.0, 10))
        assert math.isfinite(confidence_to_logit(1.0, 10))

    def test_rejects_degenerate_class_count(self):
        with pytest.raises(ValueError):
            confidence_to_logit(0.5, 1)


class TestGeneratorConfig:
    def test_default_config_is_consistent(self):
        cfg = default_config()
        assert cfg.num_classes == 20
        assert cfg.num_slots == 6
        assert len(cfg.id_pattern_graph) == 30
        for f in cfg.id_pattern_graph:
            assert sum(n for _, n in f) == cfg.num_slots
        assert len(cfg.near_confusion) == 10
        assert all(u >= cfg.num_classes for u in cfg.near_confusion)

    def test_rejects_non_canonical_pattern(self):
        with pytest.raises(ValueError, match="canonical"):
            dataclasses.replace(
                default_config(), id_pattern_graph=(((1, 2), (0, 4)),)
            )

    def test_rejects_wrong_slot_sum(self):
        with pytest.raises(ValueError, match="sum"):
            dataclasses.replace(default_config(), id_pattern_graph=(((0, 5),),))

    def test_rejects_class_outside_id_space(self):
        with pytest.raises(ValueError, match="ID space"):
            dataclasses.replace(
                default_config(), id_pattern_graph=(((0, 4), (20, 2)),)
            )

    def test_rejects_unseen_class_collision(self):
        with pytest.raises(ValueError, match="collides"):
            dataclasses.replace(default_config(), near_confusion={5: (1, 0.5)})

    def test_rejects_bad_confusion_target(self):
        with pytest.raises(ValueError, match="target"):
            dataclasses.replace(default_config(), near_confusion={25: (40, 0.5)})

    def test_rejects_bad_confidences(self):
        with pytest.raises(ValueError):
            dataclasses.replace(default_config(), id_confidence=1.0)
        with pytest.raises(ValueError):
            dataclasses.replace(default_config(), noise_sigma=-0.1)


class TestGenerateId:
    def test_shapes_tags_and_ids(self):
        cfg = _small_config()
        split = generate_id(cfg, 25)
        assert len(split.records) == 25
        for i, rec in enumerate(split.records):
            assert rec.slot_logits.shape == (cfg.num_slots, cfg.num_classes)
            assert rec.dataset_tag == "id"
            assert rec.sample_id == f"id-{i:05d}"

    def test_zero_noise_predictions_recover_intent(self):
        cfg = _noiseless(_small_config())
        split = generate_id(cfg, 60)
        for rec, intent in zip(split.records, split.intents):
            assert frequency_set(_predictions(rec)) == intent

    def test_intents_come_from_the_graph(self):
        cfg = _small_config()
        graph = set(cfg.id_pattern_graph)
        split = generate_id(cfg, 80)
        assert all(f in graph for f in split.intents)

    def test_label_is_dominant_class(self):
        cfg = _noiseless(_small_config())
        split = generate_id(cfg, 40)
        for rec, intent in zip(split.records, split.intents):
            best = min(intent, key=lambda e: (-e[1], e[0]))[0]
            assert rec.label == best

    def test_deterministic_and_order_free(self):
        cfg = _small_config()
        a = generate_id(cfg, 50)
        b = generate_id(cfg, 50)
        prefix = generate_id(cfg, 20)
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.slot_logits, rb.slot_logits)
        # counter-based seeding: a shorter run is a prefix of a longer one
        for ra, rp in zip(a.records, prefix.records):
            assert np.array_equal(ra.slot_logits, rp.slot_logits)

    def test_seed_changes_the_records(self):
        a = generate_id(_small_config(), 10)
        b = generate_id(_small_config(seed=8), 10)
        assert not np.array_equal(a.records[0].slot_logits, b.records[0].slot_logits)

    def test_train_split_naming(self):
        split = generate_id(_small_config(), 5, split="train")
        assert split.records[0].sample_id == "train-00000"
        assert split.records[0].dataset_tag == "id"

    def test_rejects_unknown_split(self):
        with pytest.raises(ValueError, match="split"):
            generate_id(_small_config(), 5, split="bogus")


class TestGenerateCsid:
    def test_tag_and_degraded_confidence(self):
        cfg = _small_config()
        csid = generate_csid(cfg, 60)
        ident = generate_id(cfg, 60)
        assert all(r.dataset_tag == "csid" for r in csid.records)
        assert _mean_pmax(csid.records) < _mean_pmax(ident.records)

    def test_patterns_still_from_graph(self):
        cfg = _noiseless(_small_config())
        graph = set(cfg.id_pattern_graph)
        csid = generate_csid(cfg, 40)
        for rec, intent in zip(csid.records, csid.intents):
            assert intent in graph
            assert frequency_set(_predictions(rec)) == intent


class TestGenerateNearOod:
    def test_zero_noise_predictions_recover_intent(self):
        cfg = _noiseless(_small_config())
        split = generate_near_ood(cfg, 80)
        for rec, intent in zip(split.records, split.intents):
            assert frequency_set(_predictions(rec)) == intent

    def test_tag_and_no_label(self):
        split = generate_near_ood(_small_config(), 20)
        assert all(r.dataset_tag == "ood" for r in split.records)
        assert all(r.label is None for r in split.records)

    def test_full_context_mode_lands_on_graph_patterns(self):
        cfg = _noiseless(_small_config(near_context_prob=1.0))
        graph = set(cfg.id_pattern_graph)
        split = generate_near_ood(cfg, 60)
        assert all(f in graph for f in split.intents)

    def test_swap_mode_mostly_leaves_the_graph(self):
        cfg = _noiseless(_small_config(near_context_prob=0.0))
        graph = set(cfg.id_pattern_graph)
        split = generate_near_ood(cfg, 200)
        off = sum(f not in graph for f in split.intents)
        assert off > 100

    def test_mean_confidence_below_id(self):
        cfg = _small_config()
        near = generate_near_ood(cfg, 150)
        ident = generate_id(cfg, 150)
        assert _mean_pmax(near.records) < _mean_pmax(ident.records)

    def test_requires_confusion_map(self):
        cfg = dataclasses.replace(_small_config(), near_confusion={})
        with pytest.raises(ValueError, match="near_confusion"):
            generate_near_ood(cfg, 5)


class TestGenerateFarOod:
    def test_patterns_absent_from_graph_and_multi(self):
        cfg = _small_config()
        graph = set(cfg.id_pattern_graph)
        split = generate_far_ood(cfg, 120)
        for f in split.intents:
            assert f not in graph
            assert len(f) >= 2
            assert sum(n for _, n in f) == cfg.num_slots

    def test_zero_noise_predictions_recover_intent(self):
        cfg = _noiseless(_small_config())
        split = generate_far_ood(cfg, 60)
        for rec, intent in zip(split.records, split.intents):
            assert frequency_set(_predictions(rec)) == intent

    def test_low_confidence(self):
        cfg = _small_config()
        far = generate_far_ood(cfg, 100)
        ident = generate_id(cfg, 100)
        assert _mean_pmax(far.records) + 0.3 < _mean_pmax(ident.records)


class TestRunBenchmark:
    def test_report_grid_and_populations(self):
        res = run_benchmark(_small_config())
        assert set(res.splits) == {"train", "id", "csid", "near", "far"}
        assert set(res.scored) == {"id", "csid", "near", "far"}
        for method in ("oco", "msp", "maxlogit", "energy"):
            for sub in ("near", "far", "all"):
                for mode in ("standard", "fs_ood"):
                    rep = res.reports[method][sub][mode]
                    assert isinstance(rep, MetricsReport)
                    assert rep.mode == mode
        for name, pops in res.populations.items():
            assert sum(pops.values()) == len(res.scored[name])

    def test_table_built_from_train_matches_direct_build(self):
        cfg = _small_config()
        res = run_benchmark(cfg)
        direct = build_table(
            list(res.splits["train"].records), cfg.num_slots, cfg.num_classes
        )
        assert res.table.patterns == direct.patterns

    def test_far_is_mostly_unreliable_id_is_not(self):
        res = run_benchmark(_small_config())
        id_pop = res.populations["id"]
        far_pop = res.populations["far"]
        n = sum(id_pop.values())
        assert (id_pop["S1"] + id_pop["S2"]) / n >= 0.9
        assert far_pop["S3"] / sum(far_pop.values()) > 0.9


class TestAllocateSlots:
    def test_exact_hand_cases(self):
        assert allocate_slots([0.7, 0.3], 2) == [1, 1]
        assert allocate_slots([0.8, 0.2], 2) == [2, 0]
        assert allocate_slots([0.5, 0.3, 0.2], 3) == [1, 1, 1]
        assert allocate_slots([0.6, 0.25, 0.15], 3) == [2, 1, 0]

    def test_counts_sum_to_k(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            areas = rng.random(n) + 0.05
            k = int(rng.integers(1, 12))
            counts = allocate_slots(areas, k)
            assert sum(counts) == k
            assert all(c >= 0 for c in counts)

    def test_proportionality_bound(self):
        # largest-remainder never misses the quota by a full slot
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            areas = rng.random(n) + 0.05
            k = int(rng.integers(1, 12))
            quotas = np.asarray(areas) / np.sum(areas) * k
            counts = allocate_slots(areas, k)
            for c, q in zip(counts, quotas):
                assert math.floor(q) <= c <= math.ceil(q)

    def test_tie_prefers_earlier_object(self):
        assert allocate_slots([0.5, 0.5], 3) == [2, 1]

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            allocate_slots([0.5, 0.5], 0)
        with pytest.raises(ValueError):
            allocate_slots([], 3)
        with pytest.raises(ValueError):
            allocate_slots([0.5, -0.1], 3)


class TestDegradedConfidence:
    def test_single_slot_is_identity(self):
        for c in (0.1, 0.5, 0.9):
            assert degraded_confidence(c, 1, 1.1) == pytest.approx(c, abs=1e-12)

    def test_monotone_decreasing_in_slots(self):
        vals = [degraded_confidence(0.9, s, 1.0) for s in range(1, 10)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_gamma_zero_is_constant(self):
        for s in (1, 3, 7):
            assert degraded_confidence(0.8, s, 0.0) == pytest.approx(0.8)

    def test_exact_odds_arithmetic(self):
        # odds 9 / 3 = 3 -> confidence 0.75
        assert degraded_confidence(0.9, 3, 1.0) == pytest.approx(0.75, abs=1e-12)

    def test_stays_in_unit_interval(self):
        for s in range(1, 20):
            v = degraded_confidence(0.99, s, 2.0)
            assert 0.0 < v < 1.0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            degraded_confidence(0.9, 0, 1.0)
        with pytest.raises(ValueError):
            degraded_confidence(1.0, 2, 1.0)


class TestSceneTemplates:
    def test_areas_are_normalized(self):
        t = SceneTemplate(classes=(0, 1), areas=(2.0, 2.0))
        assert t.areas == (0.5, 0.5)

    def test_rejects_mismatch_and_duplicates(self):
        with pytest.raises(ValueError):
            SceneTemplate(classes=(0, 1), areas=(1.0,))
        with pytest.raises(ValueError):
            SceneTemplate(classes=(0, 0), areas=(0.5, 0.5))
        with pytest.raises(ValueError):
            SceneTemplate(classes=(0,), areas=(-1.0,))

    def test_default_scene_config_valid(self):
        cfg = default_scene_config()
        assert cfg.num_classes == 20
        assert len(cfg.templates) == 18
        sizes = {len(t.classes) for t in cfg.templates}
        assert sizes == {1, 2, 3}


class TestGenerateSceneSplit:
    def test_shapes_and_tags(self):
        cfg = default_scene_config()
        for kind, tag in (("id", "id"), ("near", "ood"), ("far", "ood")):
            records = generate_scene_split(cfg, 5, 10, kind)
            assert len(records) == 10
            for rec in records:
                assert rec.slot_logits.shape == (5, cfg.num_classes)
                assert rec.dataset_tag == tag

    def test_deterministic(self):
        cfg = default_scene_config()
        a = generate_scene_split(cfg, 4, 8, "near")
        b = generate_scene_split(cfg, 4, 8, "near")
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.slot_logits, rb.slot_logits)

    def test_slot_count_changes_records(self):
        cfg = default_scene_config()
        a = generate_scene_split(cfg, 4, 3, "id")
        b = generate_scene_split(cfg, 6, 3, "id")
        assert a[0].slot_logits.shape != b[0].slot_logits.shape

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError, match="scene split"):
            generate_scene_split(default_scene_config(), 4, 3, "bogus")


class TestSlotCountSweep:
    def test_small_sweep_returns_scores(self):
        cfg = dataclasses.replace(
            default_scene_config(), train_samples=200, eval_samples=80
        )
        curve = slot_count_sweep(cfg, ks=(3, 5, 7))
        assert [k for k, _ in curve] == [3, 5, 7]
        for _, score in curve:
            assert 0.0 <= score <= 1.0

    def test_rejects_degenerate_slot_count(self):
        with pytest.raises(ValueError):
            slot_count_sweep(default_scene_config(), ks=(1,))
