"""Binary serialization of inference weights.

Layout, all integers little-endian u32 and all floats little-endian
float64:

    magic   4 bytes, b"OCOW"
    version u32, currently 1
    tensors repeated until end of buffer:
        name_len u32
        name     name_len bytes of UTF-8
        rank     u32
        dims     rank x u32
        data     prod(dims) float64

Scalar metadata (slot count, iteration count, activation codes) is stored
as rank-1 tensors of length 1 so the container stays homogeneous.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import GruWeights, MlpLayer
from .slotcore import ClassifierWeights, SlotAttentionWeights

__all__ = [
    "BUNDLE_MAGIC",
    "BUNDLE_VERSION",
    "BundleFormatError",
    "WeightBundle",
    "save_bundle",
    "load_bundle",
]

BUNDLE_MAGIC = b"OCOW"
BUNDLE_VERSION = 1

_ACTIVATION_CODES = {"linear": 0, "relu": 1, "tanh": 2, "sigmoid": 3}
_CODE_ACTIVATIONS = {v: k for k, v in _ACTIVATION_CODES.items()}

_GRU_FIELDS = (
    "reset_input",
    "update_input",
    "candidate_input",
    "reset_state",
    "update_state",
    "candidate_state",
    "reset_bias",
    "update_bias",
    "candidate_bias",
)


class BundleFormatError(ValueError):
    """The byte stream is not a valid weight bundle."""


@dataclass(frozen=True)
class WeightBundle:
    """Everything the inference path needs: attention, head, decoder.

    The decoder may be empty; logit inference does not use it.
    """

    attention: SlotAttentionWeights
    classifier: ClassifierWeights
    decoder: tuple = ()

    def __post_init__(self):
        if self.attention.slot_dim != self.classifier.weight.shape[0]:
            raise ValueError(
                f"slot dim {self.attention.slot_dim} does not match classifier "
                f"input {self.classifier.weight.shape[0]}"
            )
        decoder = tuple(self.decoder)
        if decoder:
            if decoder[0].weight.shape[0] != self.attention.slot_dim:
                raise ValueError(
                    "decoder input width does not match slot dim"
                )
            for i in range(len(decoder) - 1):
                if decoder[i].weight.shape[1] != decoder[i + 1].weight.shape[0]:
                    raise ValueError(
                        f"decoder layers {i} and {i + 1} do not chain"
                    )
        object.__setattr__(self, "decoder", decoder)


def _write_tensor(parts: list, name: str, arr) -> None:
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    raw = name.encode("utf-8")
    parts.append(struct.pack("<I", len(raw)))
    parts.append(raw)
    parts.append(struct.pack("<I", arr.ndim))
    parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    parts.append(arr.tobytes())


def save_bundle(bundle: WeightBundle) -> bytes:
    """Serialize a bundle to the canonical byte layout."""
    parts = [BUNDLE_MAGIC, struct.pack("<I", BUNDLE_VERSION)]
    w = bundle.attention
    _write_tensor(parts, "query_proj", w.query_proj)
    _write_tensor(parts, "key_proj", w.key_proj)
    _write_tensor(parts, "value_proj", w.value_proj)
    for f in _GRU_FIELDS:
        _write_tensor(parts, f"gru_{f}", getattr(w.gru, f))
    _write_tensor(parts, "slot_mean", w.slot_mean)
    _write_tensor(parts, "slot_log_scale", w.slot_log_scale)
    _write_tensor(parts, "num_slots", [float(w.num_slots)])
    _write_tensor(parts, "num_iters", [float(w.num_iters)])
    _write_tensor(parts, "classifier_weight", bundle.classifier.weight)
    _write_tensor(parts, "classifier_bias", bundle.classifier.bias)
    for i, layer in enumerate(bundle.decoder):
        _write_tensor(parts, f"decoder_{i}_weight", layer.weight)
        _write_tensor(parts, f"decoder_{i}_bias", layer.bias)
        _write_tensor(
            parts,
            f"decoder_{i}_activation",
            [float(_ACTIVATION_CODES[layer.activation])],
        )
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise BundleFormatError(
                f"truncated bundle: needed {n} bytes for {what} at offset "
                f"{self.pos}, have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def _read_tensors(data: bytes) -> dict:
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != BUNDLE_MAGIC:
        raise BundleFormatError(
            f"bad magic {magic!r} at offset 0, expected {BUNDLE_MAGIC!r}"
        )
    version = r.u32("version")
    if version != BUNDLE_VERSION:
        raise BundleFormatError(
            f"unsupported bundle version {version}, expected {BUNDLE_VERSION}"
        )
    tensors: dict = {}
    while r.pos < len(data):
        at = r.pos
        name_len = r.u32("tensor name length")
        if name_len > 4096:
            raise BundleFormatError(
                f"implausible tensor name length {name_len} at offset {at}"
            )
        try:
            name = r.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise BundleFormatError(
                f"tensor name at offset {at} is not valid UTF-8"
            ) from e
        rank = r.u32(f"rank of {name!r}")
        if rank > 8:
            raise BundleFormatError(
                f"implausible rank {rank} for tensor {name!r} at offset {at}"
            )
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, f"dims of {name!r}"))
        count = 1
        for d in dims:
            count *= d
        raw = r.take(8 * count, f"data of {name!r}")
        if name in tensors:
            raise BundleFormatError(f"duplicate tensor {name!r} at offset {at}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return tensors


def _pop(tensors: dict, name: str, rank: int) -> np.ndarray:
    if name not in tensors:
        raise BundleFormatError(f"missing required tensor {name!r}")
    arr = tensors.pop(name)
    if arr.ndim != rank:
        raise BundleFormatError(
            f"tensor {name!r} has rank {arr.ndim}, expected {rank}"
        )
    return arr


def _pop_scalar_int(tensors: dict, name: str) -> int:
    arr = _pop(tensors, name, 1)
    if arr.shape != (1,):
        raise BundleFormatError(f"tensor {name!r} must hold a single value")
    val = float(arr[0])
    if not val.is_integer():
        raise BundleFormatError(f"tensor {name!r} must hold an integer, got {val}")
    return int(val)


def load_bundle(data: bytes) -> WeightBundle:
    """Parse bundle bytes, validating structure and dimension consistency.

    Raises BundleFormatError on malformed bytes (with the byte offset where
    parsing failed) and on dimensionally inconsistent tensors.
    """
    tensors = _read_tensors(data)
    try:
        gru = GruWeights(
            *[_pop(tensors, f"gru_{f}", 2) for f in _GRU_FIELDS[:6]],
            *[_pop(tensors, f"gru_{f}", 1) for f in _GRU_FIELDS[6:]],
        )
        attention = SlotAttentionWeights(
            query_proj=_pop(tensors, "query_proj", 2),
            key_proj=_pop(tensors, "key_proj", 2),
            value_proj=_pop(tensors, "value_proj", 2),
            gru=gru,
            slot_mean=_pop(tensors, "slot_mean", 1),
            slot_log_scale=_pop(tensors, "slot_log_scale", 1),
            num_slots=_pop_scalar_int(tensors, "num_slots"),
            num_iters=_pop_scalar_int(tensors, "num_iters"),
        )
        classifier = ClassifierWeights(
            weight=_pop(tensors, "classifier_weight", 2),
            bias=_pop(tensors, "classifier_bias", 1),
        )
        decoder = []
        i = 0
        while f"decoder_{i}_weight" in tensors:
            weight = _pop(tensors, f"decoder_{i}_weight", 2)
            bias = _pop(tensors, f"decoder_{i}_bias", 1)
            code = _pop_scalar_int(tensors, f"decoder_{i}_activation")
            if code not in _CODE_ACTIVATIONS:
                raise BundleFormatError(
                    f"decoder layer {i} has unknown activation code {code}"
                )
            decoder.append(MlpLayer(weight, bias, _CODE_ACTIVATIONS[code]))
            i += 1
        bundle = WeightBundle(
            attention=attention, classifier=classifier, decoder=tuple(decoder)
        )
    except BundleFormatError:
        raise
    except ValueError as e:
        raise BundleFormatError(f"inconsistent bundle contents: {e}") from e
    if tensors:
        raise BundleFormatError(
            f"unexpected tensors in bundle: {sorted(tensors)}"
        )
    return bundle
