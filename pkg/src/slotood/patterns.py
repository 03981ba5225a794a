"""Object co-occurrence statistics over per-slot class predictions.

Each image yields one frequency set: the multiset of per-slot argmax
classes, canonicalized to (class, count) pairs sorted by class. Frequency
sets observed in training with two or more distinct classes populate a
co-occurrence table; membership queries against that table later divide
test images into scoring scenarios.

Single-category sets are deliberately excluded from the table. A lone
category carries no co-occurrence information, and keeping the table
multi-category makes the scenario split exhaustive: one category, a known
combination, or an unknown combination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .slotcore import SlotLogitsRecord

__all__ = [
    "FrequencySet",
    "ConfigurationKind",
    "CoOccurrenceTable",
    "TableFormatError",
    "TABLE_VERSION",
    "slot_predictions",
    "frequency_set",
    "is_canonical",
    "classify_configuration",
    "build_table",
    "contains",
    "save_table",
    "load_table",
]

# Canonical form: ((class, count), ...) with classes strictly ascending,
# counts >= 1. Hashable, so it doubles as the table key.
FrequencySet = Tuple[Tuple[int, int], ...]

TABLE_VERSION = 1


class ConfigurationKind(Enum):
    SINGLE_CATEGORY = "single"
    MULTI_CATEGORY = "multi"


class TableFormatError(ValueError):
    """Bytes do not encode a valid co-occurrence table."""


def slot_predictions(slot_logits: np.ndarray) -> np.ndarray:
    """Argmax class per slot; ties resolve to the lowest class index."""
    sl = np.asarray(slot_logits, dtype=np.float64)
    if sl.ndim != 2 or min(sl.shape) < 1:
        raise ValueError(f"slot logits must be K x M, got shape {sl.shape}")
    if not np.isfinite(sl).all():
        raise ValueError("slot logits contain non-finite entries")
    # np.argmax returns the first maximal index, which is the lowest class.
    return sl.argmax(axis=1)


def frequency_set(predictions: Sequence[int]) -> FrequencySet:
    """Canonicalize slot predictions to sorted (class, count) pairs."""
    preds = np.asarray(predictions)
    if preds.ndim != 1 or preds.shape[0] < 1:
        raise ValueError("predictions must be a non-empty 1-D sequence")
    if not np.issubdtype(preds.dtype, np.integer):
        raise ValueError(f"predictions must be integers, got dtype {preds.dtype}")
    if (preds < 0).any():
        raise ValueError("class indices must be non-negative")
    classes, counts = np.unique(preds, return_counts=True)
    return tuple((int(c), int(n)) for c, n in zip(classes, counts))


def is_canonical(f: FrequencySet) -> bool:
    if not f:
        return False
    prev = -1
    for entry in f:
        if (
            not isinstance(entry, tuple)
            or len(entry) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in entry)
        ):
            return False
        cls, count = entry
        if cls <= prev or count < 1:
            return False
        prev = cls
    return True


def _require_canonical(f: FrequencySet, what: str = "frequency set"):
    if not is_canonical(f):
        raise ValueError(f"{what} is not canonical: {f!r}")


def classify_configuration(f: FrequencySet) -> ConfigurationKind:
    """SINGLE_CATEGORY iff the set has exactly one distinct class."""
    _require_canonical(f)
    if len(f) == 1:
        return ConfigurationKind.SINGLE_CATEGORY
    return ConfigurationKind.MULTI_CATEGORY


@dataclass
class CoOccurrenceTable:
    """Multi-category frequency sets seen in training, with support counts."""

    num_slots: int
    num_classes: int
    patterns: Dict[FrequencySet, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_slots < 1:
            raise ValueError(f"num_slots must be >= 1, got {self.num_slots}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        for f, support in self.patterns.items():
            self._check_pattern(f, support)

    def _check_pattern(self, f: FrequencySet, support: int):
        _require_canonical(f, "table pattern")
        if len(f) < 2:
            raise ValueError(f"table patterns must be multi-category: {f!r}")
        if sum(n for _, n in f) != self.num_slots:
            raise ValueError(
                f"pattern counts must sum to num_slots={self.num_slots}: {f!r}"
            )
        if any(c >= self.num_classes for c, _ in f):
            raise ValueError(
                f"pattern class outside [0, {self.num_classes}): {f!r}"
            )
        if not isinstance(support, int) or support < 1:
            raise ValueError(f"support must be a positive int, got {support!r}")


def build_table(
    records: Iterable[SlotLogitsRecord],
    num_slots: int,
    num_classes: int,
    min_support: int = 1,
) -> CoOccurrenceTable:
    """Accumulate multi-category frequency sets over training records.

    Every record must have exactly num_slots slot rows and num_classes
    logit columns; a mismatch is reported with the offending record id.
    Patterns whose final support falls below min_support are dropped.
    """
    if min_support < 1:
        raise ValueError(f"min_support must be >= 1, got {min_support}")
    counts: Dict[FrequencySet, int] = {}
    for rec in records:
        if rec.slot_logits.shape != (num_slots, num_classes):
            raise ValueError(
                f"record {rec.sample_id!r} has shape {rec.slot_logits.shape}, "
                f"expected ({num_slots}, {num_classes})"
            )
        f = frequency_set(slot_predictions(rec.slot_logits))
        if classify_configuration(f) is ConfigurationKind.MULTI_CATEGORY:
            counts[f] = counts.get(f, 0) + 1
    if min_support > 1:
        counts = {f: n for f, n in counts.items() if n >= min_support}
    return CoOccurrenceTable(
        num_slots=num_slots, num_classes=num_classes, patterns=counts
    )


def contains(table: CoOccurrenceTable, f: FrequencySet, relaxed: bool = False) -> bool:
    """Exact multiset membership of f in the table.

    Same classes with different counts do not match. relaxed=True loosens
    the query to category-set membership (counts ignored), for studying
    tables built at a different slot count.
    """
    _require_canonical(f)
    if not relaxed:
        return f in table.patterns
    classes = tuple(c for c, _ in f)
    return any(tuple(c for c, _ in p) == classes for p in table.patterns)


def save_table(table: CoOccurrenceTable) -> bytes:
    """Serialize to canonical JSON bytes.

    Patterns are ordered by their entry tuples, so equal tables always
    produce identical bytes and save(load(save(t))) == save(t).
    """
    obj = {
        "version": TABLE_VERSION,
        "num_slots": table.num_slots,
        "num_classes": table.num_classes,
        "patterns": [
            {"entries": [[c, n] for c, n in f], "support": table.patterns[f]}
            for f in sorted(table.patterns)
        ],
    }
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def _expect_key(obj: dict, key: str, where: str):
    if key not in obj:
        raise TableFormatError(f"missing {key!r} in {where}")
    return obj[key]


def _expect_int(value, where: str, minimum: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise TableFormatError(f"{where} must be an int >= {minimum}, got {value!r}")
    return value


def load_table(data: bytes) -> CoOccurrenceTable:
    """Parse table bytes; malformed input reports where parsing failed."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise TableFormatError(f"table bytes are not UTF-8: {e}") from e
    except json.JSONDecodeError as e:
        raise TableFormatError(
            f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(obj, dict):
        raise TableFormatError(f"table root must be an object, got {type(obj).__name__}")
    version = _expect_key(obj, "version", "table")
    if version != TABLE_VERSION:
        raise TableFormatError(
            f"unsupported table version {version!r}, expected {TABLE_VERSION}"
        )
    num_slots = _expect_int(_expect_key(obj, "num_slots", "table"), "num_slots", 1)
    num_classes = _expect_int(
        _expect_key(obj, "num_classes", "table"), "num_classes", 1
    )
    raw_patterns = _expect_key(obj, "patterns", "table")
    if not isinstance(raw_patterns, list):
        raise TableFormatError("patterns must be a list")
    patterns: Dict[FrequencySet, int] = {}
    for i, entry in enumerate(raw_patterns):
        where = f"patterns[{i}]"
        if not isinstance(entry, dict):
            raise TableFormatError(f"{where} must be an object")
        raw_entries = _expect_key(entry, "entries", where)
        if not isinstance(raw_entries, list) or not raw_entries:
            raise TableFormatError(f"{where}.entries must be a non-empty list")
        pairs = []
        for j, pair in enumerate(raw_entries):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise TableFormatError(
                    f"{where}.entries[{j}] must be a [class, count] pair"
                )
            cls = _expect_int(pair[0], f"{where}.entries[{j}] class", 0)
            count = _expect_int(pair[1], f"{where}.entries[{j}] count", 1)
            pairs.append((cls, count))
        f = tuple(pairs)
        if not is_canonical(f):
            raise TableFormatError(
                f"{where}.entries must be ascending by class: {f!r}"
            )
        if f in patterns:
            raise TableFormatError(f"{where} duplicates pattern {f!r}")
        patterns[f] = _expect_int(
            _expect_key(entry, "support", where), f"{where}.support", 1
        )
    try:
        return CoOccurrenceTable(
            num_slots=num_slots, num_classes=num_classes, patterns=patterns
        )
    except ValueError as e:
        raise TableFormatError(str(e)) from e
