"""Forward-only slot attention inference and per-slot classification.

A feature map of H*W tokens is routed into K slot vectors by iterated
attention: slots emit queries, tokens emit keys and values, and a gated
recurrent cell folds each slot's attended value back into the slot state.
A shared linear head then maps every slot to class logits; the per-image
logits are the column-wise sum over slots.

Training is out of scope. Everything here consumes fixed weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .numerics import GruWeights, MlpLayer, gru_step, mlp_forward, softmax_rows

__all__ = [
    "NumericError",
    "FeatureMap",
    "SlotAttentionWeights",
    "SlotSet",
    "ClassifierWeights",
    "SlotLogitsRecord",
    "DATASET_TAGS",
    "init_slots",
    "slot_attention_forward",
    "slot_logits",
    "aggregate_logits",
    "cross_entropy",
    "reconstruction_loss",
    "total_loss",
]

DATASET_TAGS = ("id", "csid", "ood", "unlabeled")

# Consistency slack between stored aggregate logits and the column sum of
# the per-slot logits; looser than float64 epsilon because records may have
# passed through decimal text serialization.
AGG_CONSISTENCY_TOL = 1e-6


class NumericError(ArithmeticError):
    """A forward computation produced non-finite values."""


@dataclass(frozen=True)
class FeatureMap:
    """An H x W x C grid of float64 features for one image."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"feature map must be H x W x C, got shape {v.shape}")
        if min(v.shape) < 1:
            raise ValueError(f"feature map dimensions must be >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature map contains non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def tokens(self) -> np.ndarray:
        """The grid flattened row-major to (H*W) x C."""
        return self.values.reshape(-1, self.channels)


@dataclass(frozen=True)
class SlotAttentionWeights:
    """Fixed parameters of the attention loop.

    query_proj acts on slots (d x d); key_proj and value_proj act on tokens
    (C x d). slot_mean and slot_log_scale parameterize the Gaussian the
    initial slots are drawn from. num_iters is the attention iteration
    count T, num_slots is K.
    """

    query_proj: np.ndarray
    key_proj: np.ndarray
    value_proj: np.ndarray
    gru: GruWeights
    slot_mean: np.ndarray
    slot_log_scale: np.ndarray
    num_slots: int
    num_iters: int = 3

    def __post_init__(self):
        q = np.asarray(self.query_proj, dtype=np.float64)
        k = np.asarray(self.key_proj, dtype=np.float64)
        v = np.asarray(self.value_proj, dtype=np.float64)
        mu = np.asarray(self.slot_mean, dtype=np.float64)
        ls = np.asarray(self.slot_log_scale, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"query_proj must be square, got {q.shape}")
        d = q.shape[0]
        for name, m in (("key_proj", k), ("value_proj", v)):
            if m.ndim != 2 or m.shape[1] != d:
                raise ValueError(f"{name} must be C x {d}, got {m.shape}")
        if k.shape[0] != v.shape[0]:
            raise ValueError(
                f"key_proj and value_proj disagree on channels: "
                f"{k.shape[0]} != {v.shape[0]}"
            )
        if self.gru.width != d:
            raise ValueError(f"gru width {self.gru.width} != slot dim {d}")
        if mu.shape != (d,) or ls.shape != (d,):
            raise ValueError("slot_mean and slot_log_scale must have length d")
        if not isinstance(self.num_slots, int) or self.num_slots < 1:
            raise ValueError(f"num_slots must be a positive int, got {self.num_slots}")
        if not isinstance(self.num_iters, int) or self.num_iters < 1:
            raise ValueError(f"num_iters must be a positive int, got {self.num_iters}")
        for name, arr in (
            ("query_proj", q),
            ("key_proj", k),
            ("value_proj", v),
            ("slot_mean", mu),
        ):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
        # slot_log_scale may be -inf (degenerate scale 0), but never nan/+inf.
        if np.isnan(ls).any() or (ls == np.inf).any():
            raise ValueError("slot_log_scale contains nan or +inf entries")
        object.__setattr__(self, "query_proj", q)
        object.__setattr__(self, "key_proj", k)
        object.__setattr__(self, "value_proj", v)
        object.__setattr__(self, "slot_mean", mu)
        object.__setattr__(self, "slot_log_scale", ls)

    @property
    def slot_dim(self) -> int:
        return self.query_proj.shape[0]

    @property
    def channels(self) -> int:
        return self.key_proj.shape[0]


@dataclass(frozen=True)
class SlotSet:
    """Final slot states (K x d) and attention weights (K x N)."""

    slots: np.ndarray
    attention: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.slots, dtype=np.float64)
        a = np.asarray(self.attention, dtype=np.float64)
        if s.ndim != 2 or a.ndim != 2:
            raise ValueError("slots and attention must be 2-D")
        if s.shape[0] != a.shape[0]:
            raise ValueError(
                f"slot count mismatch: slots {s.shape[0]} vs attention {a.shape[0]}"
            )
        object.__setattr__(self, "slots", s)
        object.__setattr__(self, "attention", a)

    @property
    def num_slots(self) -> int:
        return self.slots.shape[0]


@dataclass(frozen=True)
class ClassifierWeights:
    """Shared linear head mapping one slot (d) to class logits (M)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"classifier weight must be d x M, got {w.shape}")
        if b.shape != (w.shape[1],):
            raise ValueError(
                f"classifier bias shape {b.shape} does not match M={w.shape[1]}"
            )
        if w.shape[1] < 2:
            raise ValueError("classifier needs at least 2 classes")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("classifier weights contain non-finite entries")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class SlotLogitsRecord:
    """Per-slot class logits for one image, the pipeline interchange unit.

    agg_logits, when present, must equal the column sum of slot_logits
    within AGG_CONSISTENCY_TOL. label is an optional ground-truth class.
    dataset_tag marks the evaluation role of the image.
    """

    sample_id: str
    slot_logits: np.ndarray
    agg_logits: Optional[np.ndarray] = None
    label: Optional[int] = None
    dataset_tag: str = "unlabeled"

    def __post_init__(self):
        sl = np.asarray(self.slot_logits, dtype=np.float64)
        if sl.ndim != 2 or min(sl.shape) < 1:
            raise ValueError(
                f"record {self.sample_id!r}: slot_logits must be K x M, "
                f"got shape {sl.shape}"
            )
        if not np.isfinite(sl).all():
            raise ValueError(
                f"record {self.sample_id!r}: slot_logits contain non-finite entries"
            )
        object.__setattr__(self, "slot_logits", sl)
        if self.agg_logits is not None:
            agg = np.asarray(self.agg_logits, dtype=np.float64)
            if agg.shape != (sl.shape[1],):
                raise ValueError(
                    f"record {self.sample_id!r}: agg_logits shape {agg.shape} "
                    f"does not match M={sl.shape[1]}"
                )
            if np.abs(agg - sl.sum(axis=0)).max() > AGG_CONSISTENCY_TOL:
                raise ValueError(
                    f"record {self.sample_id!r}: agg_logits disagree with the "
                    f"column sum of slot_logits beyond {AGG_CONSISTENCY_TOL}"
                )
            object.__setattr__(self, "agg_logits", agg)
        if self.label is not None:
            if not isinstance(self.label, int) or isinstance(self.label, bool):
                raise ValueError(f"record {self.sample_id!r}: label must be an int")
            if not (0 <= self.label < sl.shape[1]):
                raise ValueError(
                    f"record {self.sample_id!r}: label {self.label} outside "
                    f"[0, {sl.shape[1]})"
                )
        if self.dataset_tag not in DATASET_TAGS:
            raise ValueError(
                f"record {self.sample_id!r}: dataset_tag {self.dataset_tag!r} "
                f"not one of {DATASET_TAGS}"
            )

    @property
    def num_slots(self) -> int:
        return self.slot_logits.shape[0]

    @property
    def num_classes(self) -> int:
        return self.slot_logits.shape[1]


def init_slots(w: SlotAttentionWeights, seed) -> np.ndarray:
    """Draw the K x d initial slot matrix from the learned Gaussian.

    Each slot is slot_mean + exp(slot_log_scale) * eps with eps standard
    normal from a generator seeded by `seed`. The draw is deterministic in
    the seed. A slot_log_scale of -inf collapses the scale to zero, so
    every slot equals slot_mean exactly.
    """
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((w.num_slots, w.slot_dim))
    scale = np.exp(w.slot_log_scale)
    return w.slot_mean + scale * eps


def _check_finite(arr: np.ndarray, what: str, iteration: int):
    if not np.isfinite(arr).all():
        raise NumericError(
            f"non-finite {what} at attention iteration {iteration}"
        )


def slot_attention_forward(
    x: FeatureMap,
    w: SlotAttentionWeights,
    init: np.ndarray,
    normalization: str = "slot",
) -> SlotSet:
    """Run T attention iterations and return final slots plus attention.

    Per iteration: queries are slots @ query_proj, keys and values are the
    flattened tokens through key_proj/value_proj, and attention logits are
    Q @ K^T / sqrt(d).

    normalization="slot" (default): the logits are softmaxed across slots,
    so slots compete for each token and every attention column sums to 1;
    the attended value per slot is then the attention-weighted mean of the
    value rows. normalization="key": the logits are softmaxed across
    tokens per slot and the attended value is that distribution applied to
    the value rows directly.

    Each slot state is advanced by one GRU step on its attended value. The
    returned attention is the (K x N) softmax output of the final
    iteration. Raises NumericError naming the iteration if any
    intermediate stops being finite.
    """
    if normalization not in ("slot", "key"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if x.channels != w.channels:
        raise ValueError(
            f"feature channels {x.channels} do not match weights ({w.channels})"
        )
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (w.num_slots, w.slot_dim):
        raise ValueError(
            f"init slots shape {init.shape} != ({w.num_slots}, {w.slot_dim})"
        )
    if not np.isfinite(init).all():
        raise ValueError("init slots contain non-finite entries")

    tokens = x.tokens()
    keys = tokens @ w.key_proj
    values = tokens @ w.value_proj
    temp = math.sqrt(w.slot_dim)

    slots = init
    attn = None
    for t in range(w.num_iters):
        queries = slots @ w.query_proj
        logits = (queries @ keys.T) / temp
        _check_finite(logits, "attention logits", t)
        if normalization == "slot":
            # Softmax down each token column: slots compete for tokens.
            attn = softmax_rows(logits.T).T
            weights = attn / attn.sum(axis=1, keepdims=True)
        else:
            attn = softmax_rows(logits)
            weights = attn
        updates = weights @ values
        _check_finite(updates, "attended values", t)
        slots = np.stack(
            [gru_step(slots[k], updates[k], w.gru) for k in range(w.num_slots)]
        )
        _check_finite(slots, "slot states", t)
    return SlotSet(slots=slots, attention=attn)


def slot_logits(slots: SlotSet, c: ClassifierWeights) -> np.ndarray:
    """Apply the shared linear head to every slot, giving K x M logits."""
    if slots.slots.shape[1] != c.weight.shape[0]:
        raise ValueError(
            f"slot dim {slots.slots.shape[1]} does not match classifier "
            f"input {c.weight.shape[0]}"
        )
    out = slots.slots @ c.weight + c.bias
    if not np.isfinite(out).all():
        raise NumericError("non-finite slot logits")
    return out


def aggregate_logits(per_slot: np.ndarray) -> np.ndarray:
    """Column-wise sum of K x M per-slot logits, the image-level logits."""
    per_slot = np.asarray(per_slot, dtype=np.float64)
    if per_slot.ndim != 2:
        raise ValueError(f"per-slot logits must be K x M, got {per_slot.shape}")
    return per_slot.sum(axis=0)


def cross_entropy(agg: np.ndarray, label: int) -> float:
    """Negative log softmax probability of the labeled class.

    Computed with max subtraction so large logits stay finite. Always
    non-negative; equals log(M) on constant logits.
    """
    agg = np.asarray(agg, dtype=np.float64)
    if agg.ndim != 1:
        raise ValueError(f"aggregated logits must be 1-D, got shape {agg.shape}")
    if not np.isfinite(agg).all():
        raise ValueError("aggregated logits contain non-finite entries")
    if not isinstance(label, int) or isinstance(label, bool):
        raise ValueError("label must be an int")
    if not (0 <= label < agg.shape[0]):
        raise ValueError(f"label {label} outside [0, {agg.shape[0]})")
    z = agg - agg.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def reconstruction_loss(
    x: FeatureMap, slots: SlotSet, decoder: Sequence[MlpLayer]
) -> float:
    """Euclidean norm of the residual between x and the decoded slots.

    Every slot is decoded through the shared MLP to an H*W*C grid and the
    grids are summed to form the reconstruction. An all-zero decoder
    therefore scores ||x||_2.
    """
    if not decoder:
        raise ValueError("decoder must have at least one layer")
    flat_len = x.height * x.width * x.channels
    if decoder[-1].weight.shape[1] != flat_len:
        raise ValueError(
            f"decoder output width {decoder[-1].weight.shape[1]} does not "
            f"match feature grid size {flat_len}"
        )
    decoded = mlp_forward(slots.slots, decoder)
    recon = decoded.sum(axis=0).reshape(x.height, x.width, x.channels)
    if not np.isfinite(recon).all():
        raise NumericError("non-finite reconstruction")
    return float(np.linalg.norm((x.values - recon).ravel()))


def total_loss(ce: float, aux: float) -> float:
    """Sum of the classification and reconstruction terms."""
    out = ce + aux
    if not math.isfinite(out):
        raise ValueError(f"total loss is not finite: {ce} + {aux}")
    return float(out)
