"""The driving system: an irrational circle rotation on [0, 1) with Lebesgue measure.

Everything ω-dependent in the package is piecewise constant on an
:class:`IntervalPartition`, so the base only needs orbits, partition
refinement along orbits, and a midpoint quadrature rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ValidationError

#: Breakpoints closer than this are treated as one.
BREAKPOINT_TOL = 1e-12
#: Rotation angles equal to p/q with q below this bound are rejected.
MAX_RATIONAL_DENOMINATOR = 10**6
#: Longest orbit index handled by the split-product reduction.
_MAX_ORBIT_INDEX = 2**27


@dataclass(frozen=True)
class BaseRotation:
    """Rotation ``ω -> ω + r (mod 1)``."""

    r: float
    label: str = ""

    def __post_init__(self):
        r = float(self.r)
        if not (0.0 < r < 1.0):
            raise ValidationError(f"rotation angle must lie in (0, 1), got {r!r}")
        approx = Fraction(r).limit_denominator(MAX_RATIONAL_DENOMINATOR)
        if approx.numerator / approx.denominator == r:
            raise ValidationError(
                f"rotation angle {r!r} equals {approx.numerator}/{approx.denominator}; "
                "an irrational angle is required"
            )
        object.__setattr__(self, "r", r)

    def shift(self, omega, k=1):
        """``θ^k ω`` for a scalar or array of points."""
        return _rotate(np.asarray(omega, dtype=float), self.r, np.asarray(k))


def _split(r):
    # r = hi + lo with hi carrying 26 significant bits, so i * hi is exact.
    hi = math.floor(r * 2**26) / 2**26
    return hi, r - hi


def _rotate(omega, r, idx):
    idx = np.asarray(idx)
    if idx.size and np.max(np.abs(idx)) >= _MAX_ORBIT_INDEX:
        raise ValidationError("orbit index too large for exact reduction")
    hi, lo = _split(r)
    whole = np.mod(idx * hi, 1.0)
    return np.mod(omega + whole + idx * lo, 1.0)


def orbit(base: BaseRotation, omega: float, k: int, start: int = 0) -> np.ndarray:
    """Return ``[θ^start ω, ..., θ^(start+k) ω]`` (``k + 1`` points).

    Each point is reduced directly from ``ω + i r`` rather than by repeated
    addition, so there is no drift along long orbits.
    """
    if k < 0:
        raise ValidationError("k must be non-negative")
    idx = np.arange(start, start + k + 1, dtype=np.int64)
    return _rotate(float(omega), base.r, idx)


@dataclass(frozen=True)
class IntervalPartition:
    """Partition of [0, 1) into half-open cells ``[b_i, b_{i+1})``."""

    breakpoints: tuple = (0.0,)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if not bp or bp[0] != 0.0:
            raise ValidationError("first breakpoint must be 0")
        if any(not (0.0 <= b < 1.0) for b in bp):
            raise ValidationError("breakpoints must lie in [0, 1)")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)

    def __len__(self):
        return len(self.breakpoints)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.breakpoints)

    def cells(self):
        """List of ``(lo, hi)`` pairs."""
        bp = self.breakpoints
        return list(zip(bp, bp[1:] + (1.0,)))

    def midpoints(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.cells()])

    def cell_index(self, omega):
        """Index of the cell containing each point (vectorised)."""
        return np.searchsorted(self.array, np.asarray(omega, dtype=float), side="right") - 1

    def union(self, other: "IntervalPartition") -> "IntervalPartition":
        return IntervalPartition(_dedup(np.concatenate([self.array, other.array])))


def _dedup(points) -> tuple:
    pts = np.sort(np.mod(np.asarray(points, dtype=float), 1.0))
    # points within tolerance of 1 wrap onto 0
    pts = np.where(pts > 1.0 - BREAKPOINT_TOL, 0.0, pts)
    pts = np.sort(pts)
    kept = [0.0]
    for p in pts:
        if p - kept[-1] > BREAKPOINT_TOL:
            kept.append(float(p))
    return tuple(kept)


def refine(partition: IntervalPartition, base: BaseRotation, k: int) -> IntervalPartition:
    """Coarsest partition on which ``ω -> (cell(θ^i ω))_{i<k}`` is constant."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    if k == 0:
        return IntervalPartition()
    if k == 1 or len(partition) == 1:
        return partition
    bp = partition.array
    idx = -np.arange(k, dtype=np.int64)
    pre = _rotate(bp[:, None], base.r, idx[None, :])
    return IntervalPartition(_dedup(pre.ravel()))


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint-rule nodes and weights over the cells of a partition."""

    nodes: np.ndarray
    weights: np.ndarray
    partition: IntervalPartition = field(repr=False)
    points_per_cell: int = 1

    def __iter__(self):
        return iter(zip(self.nodes, self.weights))

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def doubled(self) -> "QuadratureGrid":
        return quadrature_grid(self.partition, 2 * self.points_per_cell)


def quadrature_grid(partition: IntervalPartition, points_per_cell: int) -> QuadratureGrid:
    if points_per_cell < 1:
        raise ValidationError("points_per_cell must be at least 1")
    nodes, weights = [], []
    for lo, hi in partition.cells():
        h = (hi - lo) / points_per_cell
        nodes.append(lo + h * (np.arange(points_per_cell) + 0.5))
        weights.append(np.full(points_per_cell, h))
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    weights[-1] = 1.0 - math.fsum(weights[:-1])
    # nudge the last weight until the exactly rounded total is 1
    for _ in range(64):
        total = math.fsum(weights)
        if total == 1.0:
            break
        weights[-1] = np.nextafter(weights[-1], -1.0 if total > 1.0 else 2.0)
    return QuadratureGrid(nodes, weights, partition, points_per_cell)
