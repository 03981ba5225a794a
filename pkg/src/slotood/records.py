"""File formats shared across the pipeline and with external producers.

Record files (JSONL): one JSON object per line,

    {"id": str, "slot_logits": [[float x M] x K],
     "agg_logits": [float x M]?, "label": int?,
     "tag": "id" | "csid" | "ood" | "unlabeled"}

optional keys are simply omitted. Every record in a file must agree on K
and M. Parse errors name the 1-based line number.

Feature files (binary): a 24-byte header followed by raw float64 grids,

    magic   4 bytes, b"OCOF"
    version u32 little-endian, currently 1
    H, W, C, count   u32 little-endian each
    data    count grids of H*W*C float64 little-endian, row-major

so a valid file is exactly 24 + 8*H*W*C*count bytes long.

Scored CSV: header id,tag,scenario,oco_score,msp,maxlogit,energy with one
row per sample, floats printed at 17 significant digits so parsing the
text recovers the exact float64 values.

All writers go through an atomic temp-file-and-rename, so a failed write
never leaves a partial file at the target path.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from typing import Iterable, List, Sequence

import numpy as np

from .evaluation import MetricsReport
from .scoring import BASELINE_NAMES, Scenario, ScoredSample
from .slotcore import DATASET_TAGS, FeatureMap, SlotLogitsRecord

__all__ = [
    "FEATURE_MAGIC",
    "FEATURE_VERSION",
    "FEATURE_HEADER_LEN",
    "SCORED_CSV_COLUMNS",
    "RecordFormatError",
    "FeatureFormatError",
    "ScoredCsvFormatError",
    "atomic_write_bytes",
    "records_to_bytes",
    "records_from_bytes",
    "write_records",
    "read_records",
    "features_to_bytes",
    "features_from_bytes",
    "write_features",
    "read_features",
    "scored_csv_to_bytes",
    "scored_csv_from_bytes",
    "write_scored_csv",
    "read_scored_csv",
    "report_to_bytes",
    "write_report",
]

FEATURE_MAGIC = b"OCOF"
FEATURE_VERSION = 1
FEATURE_HEADER_LEN = 24

SCORED_CSV_COLUMNS = ("id", "tag", "scenario", "oco_score") + BASELINE_NAMES


class RecordFormatError(ValueError):
    """A record file line is malformed."""


class FeatureFormatError(ValueError):
    """Feature file bytes are malformed."""


class ScoredCsvFormatError(ValueError):
    """A scored CSV row is malformed."""


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over path."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- records


def records_to_bytes(records: Iterable[SlotLogitsRecord]) -> bytes:
    lines = []
    for rec in records:
        obj = {"id": rec.sample_id, "slot_logits": rec.slot_logits.tolist()}
        if rec.agg_logits is not None:
            obj["agg_logits"] = rec.agg_logits.tolist()
        if rec.label is not None:
            obj["label"] = rec.label
        obj["tag"] = rec.dataset_tag
        lines.append(json.dumps(obj, separators=(",", ":")))
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def _parse_record_line(obj, lineno: int) -> SlotLogitsRecord:
    def fail(msg):
        raise RecordFormatError(f"line {lineno}: {msg}")

    if not isinstance(obj, dict):
        fail(f"expected an object, got {type(obj).__name__}")
    for key in ("id", "slot_logits", "tag"):
        if key not in obj:
            fail(f"missing required key {key!r}")
    unknown = set(obj) - {"id", "slot_logits", "agg_logits", "label", "tag"}
    if unknown:
        fail(f"unknown keys {sorted(unknown)}")
    if not isinstance(obj["id"], str):
        fail("'id' must be a string")
    if obj["tag"] not in DATASET_TAGS:
        fail(f"'tag' must be one of {DATASET_TAGS}, got {obj['tag']!r}")
    sl = obj["slot_logits"]
    if (
        not isinstance(sl, list)
        or not sl
        or not all(isinstance(row, list) and row for row in sl)
    ):
        fail("'slot_logits' must be a non-empty list of non-empty rows")
    widths = {len(row) for row in sl}
    if len(widths) != 1:
        fail(f"'slot_logits' rows have unequal widths {sorted(widths)}")
    label = obj.get("label")
    if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
        fail("'label' must be an integer")
    try:
        return SlotLogitsRecord(
            sample_id=obj["id"],
            slot_logits=np.asarray(sl, dtype=np.float64),
            agg_logits=(
                np.asarray(obj["agg_logits"], dtype=np.float64)
                if obj.get("agg_logits") is not None
                else None
            ),
            label=label,
            dataset_tag=obj["tag"],
        )
    except (TypeError, ValueError) as e:
        fail(str(e))


def records_from_bytes(data: bytes) -> List[SlotLogitsRecord]:
    records: List[SlotLogitsRecord] = []
    shape = None
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordFormatError(
                f"line {lineno}: invalid JSON at column {e.colno}: {e.msg}"
            ) from e
        rec = _parse_record_line(obj, lineno)
        if shape is None:
            shape = rec.slot_logits.shape
        elif rec.slot_logits.shape != shape:
            raise RecordFormatError(
                f"line {lineno}: record {rec.sample_id!r} has shape "
                f"{rec.slot_logits.shape}, file started with {shape}"
            )
        records.append(rec)
    return records


def write_records(path: str, records: Iterable[SlotLogitsRecord]) -> None:
    atomic_write_bytes(path, records_to_bytes(records))


def read_records(path: str) -> List[SlotLogitsRecord]:
    with open(path, "rb") as fh:
        return records_from_bytes(fh.read())


# --------------------------------------------------------------- features


def features_to_bytes(maps: Sequence[FeatureMap]) -> bytes:
    if maps:
        h, w, c = maps[0].values.shape
    else:
        h = w = c = 1
    for i, fm in enumerate(maps):
        if fm.values.shape != (h, w, c):
            raise ValueError(
                f"feature map {i} has shape {fm.values.shape}, "
                f"expected {(h, w, c)}"
            )
    header = FEATURE_MAGIC + struct.pack(
        "<IIIII", FEATURE_VERSION, h, w, c, len(maps)
    )
    body = b"".join(
        np.ascontiguousarray(fm.values, dtype="<f8").tobytes() for fm in maps
    )
    return header + body


def features_from_bytes(data: bytes) -> List[FeatureMap]:
    if len(data) < FEATURE_HEADER_LEN:
        raise FeatureFormatError(
            f"feature file too short for header: {len(data)} bytes"
        )
    if data[:4] != FEATURE_MAGIC:
        raise FeatureFormatError(
            f"bad magic {data[:4]!r}, expected {FEATURE_MAGIC!r}"
        )
    version, h, w, c, count = struct.unpack("<IIIII", data[4:FEATURE_HEADER_LEN])
    if version != FEATURE_VERSION:
        raise FeatureFormatError(
            f"unsupported feature file version {version}, "
            f"expected {FEATURE_VERSION}"
        )
    if min(h, w, c) < 1:
        raise FeatureFormatError(f"degenerate dimensions H={h} W={w} C={c}")
    expected = FEATURE_HEADER_LEN + 8 * h * w * c * count
    if len(data) != expected:
        raise FeatureFormatError(
            f"feature file length {len(data)} does not match header: "
            f"expected {expected} bytes for {count} grids of {h}x{w}x{c}"
        )
    grid = h * w * c
    out = []
    for i in range(count):
        start = FEATURE_HEADER_LEN + 8 * grid * i
        arr = np.frombuffer(data[start : start + 8 * grid], dtype="<f8")
        values = arr.reshape(h, w, c).astype(np.float64)
        try:
            out.append(FeatureMap(values))
        except ValueError as e:
            raise FeatureFormatError(f"grid {i}: {e}") from e
    return out


def write_features(path: str, maps: Sequence[FeatureMap]) -> None:
    atomic_write_bytes(path, features_to_bytes(maps))


def read_features(path: str) -> List[FeatureMap]:
    with open(path, "rb") as fh:
        return features_from_bytes(fh.read())


# -------------------------------------------------------------- scored CSV


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any float64 exactly.
    return format(float(x), ".17g")


def scored_csv_to_bytes(samples: Iterable[ScoredSample]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORED_CSV_COLUMNS)
    for s in samples:
        writer.writerow(
            [s.sample_id, s.dataset_tag, s.scenario.label, _fmt(s.oco)]
            + [_fmt(s.baselines[name]) for name in BASELINE_NAMES]
        )
    return buf.getvalue().encode("utf-8")


def scored_csv_from_bytes(data: bytes) -> List[ScoredSample]:
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ScoredCsvFormatError("empty CSV")
    if tuple(rows[0]) != SCORED_CSV_COLUMNS:
        raise ScoredCsvFormatError(
            f"bad header {rows[0]!r}, expected {list(SCORED_CSV_COLUMNS)}"
        )
    samples = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(SCORED_CSV_COLUMNS):
            raise ScoredCsvFormatError(
                f"row {i}: expected {len(SCORED_CSV_COLUMNS)} columns, "
                f"got {len(row)}"
            )
        sid, tag, scenario_label = row[0], row[1], row[2]
        if tag not in DATASET_TAGS:
            raise ScoredCsvFormatError(f"row {i}: unknown tag {tag!r}")
        try:
            scenario = Scenario.from_label(scenario_label)
        except ValueError as e:
            raise ScoredCsvFormatError(f"row {i}: {e}") from e
        try:
            values = [float(v) for v in row[3:]]
        except ValueError as e:
            raise ScoredCsvFormatError(f"row {i}: bad float: {e}") from e
        samples.append(
            ScoredSample(
                sample_id=sid,
                scenario=scenario,
                oco=values[0],
                baselines=dict(zip(BASELINE_NAMES, values[1:])),
                dataset_tag=tag,
            )
        )
    return samples


def write_scored_csv(path: str, samples: Iterable[ScoredSample]) -> None:
    atomic_write_bytes(path, scored_csv_to_bytes(samples))


def read_scored_csv(path: str) -> List[ScoredSample]:
    with open(path, "rb") as fh:
        return scored_csv_from_bytes(fh.read())


# ----------------------------------------------------------------- report


def report_to_bytes(report: MetricsReport) -> bytes:
    return (json.dumps(report.to_json_dict(), indent=2) + "\n").encode("utf-8")


def write_report(path: str, report: MetricsReport) -> None:
    atomic_write_bytes(path, report_to_bytes(report))
