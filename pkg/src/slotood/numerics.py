"""Dense float64 kernels used by the forward inference path.

All functions operate on plain numpy arrays (row-major, float64) and are
pure: inputs are never mutated. Matrices are strictly 2-D; vector-shaped
state (GRU) is 1-D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GruWeights",
    "MlpLayer",
    "ACTIVATIONS",
    "matmul",
    "softmax_rows",
    "gru_step",
    "mlp_forward",
]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


ACTIVATIONS = {
    "linear": lambda z: z,
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "sigmoid": _sigmoid,
}


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _as_vector(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GruWeights:
    """Weights for a single gated recurrent cell of width d.

    Convention (fixed): z is the update gate, r the reset gate,
    candidate = tanh(input @ candidate_input + (r * state) @ candidate_state + b),
    new state = (1 - z) * state + z * candidate.
    With all-zero weights and biases the cell therefore halves its state.
    """

    reset_input: np.ndarray
    update_input: np.ndarray
    candidate_input: np.ndarray
    reset_state: np.ndarray
    update_state: np.ndarray
    candidate_state: np.ndarray
    reset_bias: np.ndarray
    update_bias: np.ndarray
    candidate_bias: np.ndarray

    def __post_init__(self):
        mats = {
            "reset_input": self.reset_input,
            "update_input": self.update_input,
            "candidate_input": self.candidate_input,
            "reset_state": self.reset_state,
            "update_state": self.update_state,
            "candidate_state": self.candidate_state,
        }
        d = None
        for name, m in mats.items():
            m = _as_matrix(m, name)
            object.__setattr__(self, name, m)
            if m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square, got {m.shape}")
            if d is None:
                d = m.shape[0]
            elif m.shape[0] != d:
                raise ValueError(f"{name} width {m.shape[0]} != {d}")
        for name in ("reset_bias", "update_bias", "candidate_bias"):
            v = _as_vector(getattr(self, name), name)
            object.__setattr__(self, name, v)
            if v.shape[0] != d:
                raise ValueError(f"{name} length {v.shape[0]} != {d}")
        for name in list(mats) + ["reset_bias", "update_bias", "candidate_bias"]:
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def width(self) -> int:
        return self.reset_input.shape[0]

    @staticmethod
    def zeros(d: int) -> "GruWeights":
        z = np.zeros((d, d))
        b = np.zeros(d)
        return GruWeights(z, z, z, z, z, z, b, b, b)


@dataclass(frozen=True)
class MlpLayer:
    """One affine layer with a named activation applied after it."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        w = _as_matrix(self.weight, "weight")
        b = _as_vector(self.bias, "bias")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        if b.shape[0] != w.shape[1]:
            raise ValueError(
                f"bias length {b.shape[0]} does not match weight columns {w.shape[1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; "
                f"expected one of {sorted(ACTIVATIONS)}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("layer weights contain non-finite entries")


def matmul(a, b) -> np.ndarray:
    """Matrix product a @ b with explicit shape checking."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"inner dimensions do not match: {a.shape} @ {b.shape}"
        )
    return a @ b


def softmax_rows(m, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax at the given temperature.

    The row maximum is subtracted before exponentiation, so rows whose
    spread exceeds the float64 exp range still produce finite output.
    Every output row sums to 1 and all entries lie in (0, 1].
    """
    m = _as_matrix(m, "m")
    if not np.isfinite(m).all():
        raise ValueError("softmax input contains non-finite entries")
    if not (temperature > 0.0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = m / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gru_step(state, inp, w: GruWeights) -> np.ndarray:
    """Advance the recurrent state one step given an input vector.

    Returns (1 - z) * state + z * candidate; see GruWeights for the gate
    convention. state and inp must both have length w.width.
    """
    state = _as_vector(state, "state")
    inp = _as_vector(inp, "inp")
    d = w.width
    if state.shape[0] != d or inp.shape[0] != d:
        raise ValueError(
            f"state/input length {state.shape[0]}/{inp.shape[0]} != cell width {d}"
        )
    r = _sigmoid(inp @ w.reset_input + state @ w.reset_state + w.reset_bias)
    z = _sigmoid(inp @ w.update_input + state @ w.update_state + w.update_bias)
    cand = np.tanh(
        inp @ w.candidate_input + (r * state) @ w.candidate_state + w.candidate_bias
    )
    return (1.0 - z) * state + z * cand


def mlp_forward(x, layers) -> np.ndarray:
    """Apply a sequence of MlpLayer to the rows of x.

    Layer widths must chain: columns of x match rows of the first weight,
    and each layer's output width matches the next layer's input width.
    """
    x = _as_matrix(x, "x")
    for i, layer in enumerate(layers):
        if x.shape[1] != layer.weight.shape[0]:
            raise ValueError(
                f"layer {i}: input width {x.shape[1]} does not match "
                f"weight rows {layer.weight.shape[0]}"
            )
        x = ACTIVATIONS[layer.activation](x @ layer.weight + layer.bias)
    return x
