"""CLI tests.

main() is exercised in-process (it returns exit codes rather than
raising SystemExit) except for one subprocess check of the installed
entry point. File fixtures are built once per session.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from slotood.bundle import WeightBundle, save_bundle
from slotood.cli import main
from slotood.numerics import GruWeights
from slotood.patterns import build_table, load_table
from slotood.records import (
    atomic_write_bytes,
    read_records,
    read_scored_csv,
    write_features,
    write_records,
)
from slotood.slotcore import (
    ClassifierWeights,
    FeatureMap,
    SlotAttentionWeights,
)


def _make_bundle(scale=0.3):
    rng = np.random.default_rng(0)
    d, c, m, k = 4, 5, 6, 3
    att = SlotAttentionWeights(
        query_proj=rng.normal(size=(d, d)) * scale,
        key_proj=rng.normal(size=(c, d)) * scale,
        value_proj=rng.normal(size=(c, d)) * scale,
        gru=GruWeights(
            *(rng.normal(size=(d, d)) * 0.2 for _ in range(6)),
            *(rng.normal(size=d) * 0.1 for _ in range(3)),
        ),
        slot_mean=rng.normal(size=d),
        slot_log_scale=np.full(d, -1.0),
        num_slots=k,
        num_iters=2,
    )
    clf = ClassifierWeights(
        weight=rng.normal(size=(d, m)), bias=rng.normal(size=m)
    )
    return WeightBundle(attention=att, classifier=clf)


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    """Bundle + feature file fixtures shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(1)
    atomic_write_bytes(str(root / "model.ocow"), save_bundle(_make_bundle()))
    maps = [FeatureMap(rng.normal(size=(4, 4, 5))) for _ in range(6)]
    write_features(str(root / "features.ocof"), maps)
    return root


@pytest.fixture(scope="session")
def simdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    rc = main(
        [
            "simulate",
            "--outdir",
            str(root),
            "--train-samples",
            "400",
            "--eval-samples",
            "150",
        ]
    )
    assert rc == 0
    return root


class TestUsage:
    def test_no_arguments_is_usage_error(self, capsys):
        assert main([]) == 2
        capsys.readouterr()

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_missing_required_flag(self, capsys):
        assert main(["score", "--records", "x"]) == 2
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()

    def test_installed_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "slotood.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "build-stats" in proc.stdout


class TestInfer:
    def test_produces_consistent_records(self, workdir, tmp_path, capsys):
        out = str(tmp_path / "inferred.jsonl")
        rc = main(
            [
                "infer",
                "--bundle",
                str(workdir / "model.ocow"),
                "--features",
                str(workdir / "features.ocof"),
                "--output",
                out,
                "--tag",
                "id",
                "--seed",
                "3",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        records = read_records(out)
        assert len(records) == 6
        for i, rec in enumerate(records):
            assert rec.sample_id == f"sample-{i:05d}"
            assert rec.dataset_tag == "id"
            assert rec.slot_logits.shape == (3, 6)
            assert rec.agg_logits is not None

    def test_deterministic_per_seed(self, workdir, tmp_path, capsys):
        args = [
            "infer",
            "--bundle",
            str(workdir / "model.ocow"),
            "--features",
            str(workdir / "features.ocof"),
        ]
        out_a = str(tmp_path / "a.jsonl")
        out_b = str(tmp_path / "b.jsonl")
        out_c = str(tmp_path / "c.jsonl")
        assert main(args + ["--output", out_a, "--seed", "3"]) == 0
        assert main(args + ["--output", out_b, "--seed", "3"]) == 0
        assert main(args + ["--output", out_c, "--seed", "4"]) == 0
        capsys.readouterr()
        bytes_a = open(out_a, "rb").read()
        assert bytes_a == open(out_b, "rb").read()
        assert bytes_a != open(out_c, "rb").read()

    def test_id_prefix_flag(self, workdir, tmp_path, capsys):
        out = str(tmp_path / "named.jsonl")
        rc = main(
            [
                "infer",
                "--bundle",
                str(workdir / "model.ocow"),
                "--features",
                str(workdir / "features.ocof"),
                "--output",
                out,
                "--id-prefix",
                "val",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        assert read_records(out)[0].sample_id == "val-00000"

    def test_corrupt_bundle_is_data_error(self, workdir, tmp_path, capsys):
        bad = tmp_path / "bad.ocow"
        bad.write_bytes(b"NOPE" + b"\x00" * 40)
        rc = main(
            [
                "infer",
                "--bundle",
                str(bad),
                "--features",
                str(workdir / "features.ocof"),
                "--output",
                str(tmp_path / "out.jsonl"),
            ]
        )
        assert rc == 3
        assert "error" in capsys.readouterr().err

    def test_missing_file_is_io_error(self, workdir, tmp_path, capsys):
        rc = main(
            [
                "infer",
                "--bundle",
                str(tmp_path / "absent.ocow"),
                "--features",
                str(workdir / "features.ocof"),
                "--output",
                str(tmp_path / "out.jsonl"),
            ]
        )
        assert rc == 3
        capsys.readouterr()

    def test_numeric_blowup_is_numeric_error(self, workdir, tmp_path, capsys):
        blown = _make_bundle(scale=1e200)
        path = tmp_path / "blown.ocow"
        path.write_bytes(save_bundle(blown))
        with np.errstate(over="ignore", invalid="ignore"):
            rc = main(
                [
                    "infer",
                    "--bundle",
                    str(path),
                    "--features",
                    str(workdir / "features.ocof"),
                    "--output",
                    str(tmp_path / "out.jsonl"),
                ]
            )
        assert rc == 4
        assert "numeric" in capsys.readouterr().err


class TestBuildStatsAndScore:
    def test_matches_library_build(self, simdir, tmp_path, capsys):
        out = str(tmp_path / "table.json")
        rc = main(
            ["build-stats", "--records", str(simdir / "train.jsonl"), "--output", out]
        )
        assert rc == 0
        capsys.readouterr()
        with open(out, "rb") as fh:
            table = load_table(fh.read())
        records = read_records(str(simdir / "train.jsonl"))
        direct = build_table(records, 6, 20)
        assert table.patterns == direct.patterns

    def test_min_support_filters(self, simdir, tmp_path, capsys):
        lo = str(tmp_path / "lo.json")
        hi = str(tmp_path / "hi.json")
        recs = str(simdir / "train.jsonl")
        assert main(["build-stats", "--records", recs, "--output", lo]) == 0
        assert (
            main(
                [
                    "build-stats",
                    "--records",
                    recs,
                    "--output",
                    hi,
                    "--min-support",
                    "10",
                ]
            )
            == 0
        )
        capsys.readouterr()
        with open(lo, "rb") as fh:
            low = load_table(fh.read())
        with open(hi, "rb") as fh:
            high = load_table(fh.read())
        assert set(high.patterns) <= set(low.patterns)
        assert all(s >= 10 for s in high.patterns.values())

    def test_empty_records_rejected(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_bytes(b"")
        rc = main(
            [
                "build-stats",
                "--records",
                str(empty),
                "--output",
                str(tmp_path / "t.json"),
            ]
        )
        assert rc == 3
        capsys.readouterr()

    def test_score_round_trip(self, simdir, tmp_path, capsys):
        out = str(tmp_path / "scores.csv")
        rc = main(
            [
                "score",
                "--records",
                str(simdir / "test_all.jsonl"),
                "--table",
                str(simdir / "table.json"),
                "--output",
                out,
            ]
        )
        assert rc == 0
        capsys.readouterr()
        assert open(out, "rb").read() == open(simdir / "scored.csv", "rb").read()

    def test_score_shape_mismatch_names_record(self, simdir, tmp_path, capsys):
        records = read_records(str(simdir / "id_test.jsonl"))[:3]
        shrunk = [
            type(records[0])(
                sample_id=r.sample_id,
                slot_logits=r.slot_logits[:, :5],
                dataset_tag=r.dataset_tag,
            )
            for r in records
        ]
        path = str(tmp_path / "shrunk.jsonl")
        write_records(path, shrunk)
        rc = main(
            [
                "score",
                "--records",
                path,
                "--table",
                str(simdir / "table.json"),
                "--output",
                str(tmp_path / "out.csv"),
            ]
        )
        assert rc == 3
        assert "id-00000" in capsys.readouterr().err


class TestEval:
    def test_report_matches_simulation(self, simdir, tmp_path, capsys):
        out = str(tmp_path / "report.json")
        rc = main(
            [
                "eval",
                "--scores",
                str(simdir / "scored.csv"),
                "--output",
                out,
                "--mode",
                "standard",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        expected = (simdir / "reports" / "oco_all_standard.json").read_bytes()
        assert open(out, "rb").read() == expected

    def test_score_key_selects_baseline(self, simdir, tmp_path, capsys):
        out = str(tmp_path / "msp.json")
        rc = main(
            [
                "eval",
                "--scores",
                str(simdir / "scored.csv"),
                "--output",
                out,
                "--score-key",
                "msp",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        expected = (simdir / "reports" / "msp_all_standard.json").read_bytes()
        assert open(out, "rb").read() == expected

    def test_unlabeled_rows_warned_and_dropped(self, simdir, tmp_path, capsys):
        samples = read_scored_csv(str(simdir / "scored.csv"))
        doctored = samples + [
            type(samples[0])(
                sample_id="u0",
                scenario=samples[0].scenario,
                oco=0.5,
                baselines=dict(samples[0].baselines),
                dataset_tag="unlabeled",
            )
        ]
        from slotood.records import write_scored_csv

        path = str(tmp_path / "mixed.csv")
        write_scored_csv(path, doctored)
        rc = main(
            [
                "eval",
                "--scores",
                path,
                "--output",
                str(tmp_path / "r.json"),
            ]
        )
        assert rc == 0
        captured = capsys.readouterr()
        assert "1 unlabeled" in captured.err
        expected = (simdir / "reports" / "oco_all_standard.json").read_bytes()
        assert open(str(tmp_path / "r.json"), "rb").read() == expected

    def test_corrupt_csv_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_bytes(b"not,a,real,header\n")
        rc = main(
            ["eval", "--scores", str(bad), "--output", str(tmp_path / "r.json")]
        )
        assert rc == 3
        capsys.readouterr()


class TestSimulate:
    EXPECTED_FILES = [
        "train.jsonl",
        "id_test.jsonl",
        "csid.jsonl",
        "near.jsonl",
        "far.jsonl",
        "test_all.jsonl",
        "table.json",
        "scored.csv",
    ]

    def test_writes_complete_layout(self, simdir):
        for name in self.EXPECTED_FILES:
            assert (simdir / name).is_file(), name
        reports = sorted(p.name for p in (simdir / "reports").iterdir())
        assert len(reports) == 24
        for method in ("oco", "msp", "maxlogit", "energy"):
            for subset in ("near", "far", "all"):
                for mode in ("standard", "fs_ood"):
                    assert f"{method}_{subset}_{mode}.json" in reports

    def test_split_sizes(self, simdir):
        assert len(read_records(str(simdir / "train.jsonl"))) == 400
        for name in ("id_test.jsonl", "csid.jsonl", "near.jsonl", "far.jsonl"):
            assert len(read_records(str(simdir / name))) == 150
        assert len(read_records(str(simdir / "test_all.jsonl"))) == 600

    def test_byte_deterministic(self, simdir, tmp_path, capsys):
        again = tmp_path / "again"
        rc = main(
            [
                "simulate",
                "--outdir",
                str(again),
                "--train-samples",
                "400",
                "--eval-samples",
                "150",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        for name in self.EXPECTED_FILES:
            assert (again / name).read_bytes() == (simdir / name).read_bytes(), name
        for report in (simdir / "reports").iterdir():
            assert (again / "reports" / report.name).read_bytes() == (
                report.read_bytes()
            ), report.name

    def test_seed_changes_outputs(self, simdir, tmp_path, capsys):
        other = tmp_path / "other"
        rc = main(
            [
                "simulate",
                "--outdir",
                str(other),
                "--seed",
                "8",
                "--train-samples",
                "400",
                "--eval-samples",
                "150",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        assert (other / "scored.csv").read_bytes() != (
            simdir / "scored.csv"
        ).read_bytes()

    def test_report_json_is_valid(self, simdir):
        obj = json.loads((simdir / "reports" / "oco_all_standard.json").read_text())
        assert obj["mode"] == "standard"
        assert 0.0 <= obj["auroc"] <= 1.0
        assert set(obj["scenarios"]) == {"S1", "S2", "S3"}
