"""Finite-frame evidence calculus: mass functions, belief, plausibility.

Subsets of a frame with n <= 16 elements are encoded as integer bitmasks,
so subset tests are bitwise: B is a subset of A iff B & ~A == 0, and the
two intersect iff B & A != 0.

A mass function assigns non-negative weight to subsets, with zero weight
on the empty set and total weight one. Belief of A sums the mass of all
subsets of A; plausibility sums the mass of all subsets intersecting A.
Two mass functions over the same frame combine by the normalized
conjunctive rule: intersecting focal elements multiply, mass landing on
the empty set is discarded, and the remainder is rescaled by the
complement of that conflict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

__all__ = [
    "MAX_FRAME_SIZE",
    "MASS_TOL",
    "FrameOfDiscernment",
    "MassFunction",
    "InvalidMassError",
    "TotalConflictError",
    "validate_mass",
    "belief",
    "plausibility",
    "dempster_combine",
]

MAX_FRAME_SIZE = 16

# Slack on the unit-total axiom; combination results are validated against
# the same tolerance.
MASS_TOL = 1e-9


class InvalidMassError(ValueError):
    """A mass function violates one of its axioms."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


class TotalConflictError(ArithmeticError):
    """Dempster combination is undefined: the sources fully conflict."""


@dataclass(frozen=True)
class FrameOfDiscernment:
    """A set of n mutually exclusive hypotheses, n between 1 and 16."""

    size: int

    def __post_init__(self):
        if not isinstance(self.size, int) or isinstance(self.size, bool):
            raise ValueError(f"frame size must be an int, got {self.size!r}")
        if not (1 <= self.size <= MAX_FRAME_SIZE):
            raise ValueError(
                f"frame size must be in [1, {MAX_FRAME_SIZE}], got {self.size}"
            )

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    def check_subset(self, mask: int, what: str = "subset"):
        if not isinstance(mask, int) or isinstance(mask, bool):
            raise ValueError(f"{what} must be an int bitmask, got {mask!r}")
        if mask < 0 or mask > self.full_mask:
            raise ValueError(
                f"{what} {bin(mask)} outside frame of size {self.size}"
            )


@dataclass(frozen=True)
class MassFunction:
    """Masses keyed by subset bitmask. Zero-mass entries may be omitted."""

    frame: FrameOfDiscernment
    masses: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for mask in self.masses:
            self.frame.check_subset(mask, "focal element")
        object.__setattr__(self, "masses", dict(self.masses))

    def mass(self, mask: int) -> float:
        return self.masses.get(mask, 0.0)

    @staticmethod
    def vacuous(frame: FrameOfDiscernment) -> "MassFunction":
        """Total ignorance: all mass on the whole frame."""
        return MassFunction(frame, {frame.full_mask: 1.0})


def validate_mass(m: MassFunction) -> List[str]:
    """Return the list of axiom violations; empty means valid.

    Checked axioms: no negative mass, zero mass on the empty set, and
    total mass 1 within MASS_TOL. Each violation names the axiom and the
    magnitude of the deviation.
    """
    violations = []
    for mask, value in m.masses.items():
        if value < 0:
            violations.append(
                f"negative mass {value} on focal element {bin(mask)}"
            )
    empty = m.mass(0)
    if empty != 0.0:
        violations.append(f"empty set carries mass {empty}")
    total = sum(m.masses.values())
    if abs(total - 1.0) > MASS_TOL:
        violations.append(
            f"total mass {total} deviates from 1 by {abs(total - 1.0)}"
        )
    return violations


def _require_valid(m: MassFunction):
    violations = validate_mass(m)
    if violations:
        raise InvalidMassError(violations)


def belief(m: MassFunction, a: int) -> float:
    """Sum of mass over all focal elements contained in a."""
    _require_valid(m)
    m.frame.check_subset(a, "belief argument")
    return sum(v for mask, v in m.masses.items() if mask & ~a == 0 and mask != 0)


def plausibility(m: MassFunction, a: int) -> float:
    """Sum of mass over all focal elements intersecting a."""
    _require_valid(m)
    m.frame.check_subset(a, "plausibility argument")
    return sum(v for mask, v in m.masses.items() if mask & a != 0)


def dempster_combine(m1: MassFunction, m2: MassFunction) -> MassFunction:
    """Normalized conjunctive combination of two valid mass functions.

    Raises TotalConflictError when every pair of focal elements is
    disjoint (the normalizer 1 - conflict vanishes), and InvalidMassError
    if either source violates the mass axioms. The frames must agree.
    """
    if m1.frame != m2.frame:
        raise ValueError(
            f"frames disagree: {m1.frame.size} vs {m2.frame.size} elements"
        )
    _require_valid(m1)
    _require_valid(m2)
    combined: Dict[int, float] = {}
    conflict = 0.0
    for mask1, v1 in m1.masses.items():
        if v1 == 0.0:
            continue
        for mask2, v2 in m2.masses.items():
            if v2 == 0.0:
                continue
            inter = mask1 & mask2
            product = v1 * v2
            if inter == 0:
                conflict += product
            else:
                combined[inter] = combined.get(inter, 0.0) + product
    normalizer = 1.0 - conflict
    if normalizer <= MASS_TOL:
        raise TotalConflictError(
            f"sources are in total conflict (normalizer {normalizer})"
        )
    result = MassFunction(
        m1.frame, {mask: v / normalizer for mask, v in combined.items()}
    )
    _require_valid(result)
    return result
