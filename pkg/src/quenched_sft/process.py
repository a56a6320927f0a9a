"""The randomly time-changed hitting-time point process of a cylinder set.

Visits ``σ^k x ∈ A`` are placed at the times ``T^k = Σ_{i=1..k} μ_{θ^i ω}(A)``,
which rescales the hit indices so the limit process has unit rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import HorizonError, ValidationError
from .gibbs import DEFAULT_TOL, PotentialSpec, orbit_masses
from .sft import CylinderSet, RandomSFT, window_codes

MAX_HORIZON = 2**22


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint open intervals ``(lo, hi)`` in ``[0, ∞)``, sorted."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not ivs:
            raise ValidationError("an interval union needs at least one interval")
        for lo, hi in ivs:
            if not (0.0 <= lo < hi) or not np.isfinite(hi):
                raise ValidationError(f"interval ({lo}, {hi}) must satisfy 0 <= lo < hi < inf")
        order = sorted(range(len(ivs)), key=lambda i: ivs[i][0])
        for a, b in zip(order, order[1:]):
            if ivs[a][1] > ivs[b][0]:
                raise ValidationError(f"intervals {ivs[a]} and {ivs[b]} overlap")
        object.__setattr__(self, "intervals", tuple(ivs[i] for i in order))

    @classmethod
    def single(cls, lo: float, hi: float) -> "IntervalUnion":
        return cls(((lo, hi),))

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    @property
    def leb(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def sup(self) -> float:
        return self.intervals[-1][1]

    @property
    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.intervals])

    @property
    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.intervals])

    def member(self, t) -> np.ndarray:
        """Index of the interval containing each time, ``-1`` outside (open ends)."""
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self.lows, t, side="left") - 1
        ok = (i >= 0) & (t > self.lows[np.maximum(i, 0)]) & (t < self.highs[np.maximum(i, 0)])
        return np.where(ok, i, -1)


@dataclass(frozen=True)
class TimeChange:
    """Partial sums ``T^k`` for ``k = 0..K`` of the masses ``μ_{θ^k ω}(A)``."""

    omega: float
    A: CylinderSet
    masses: np.ndarray = field(repr=False)  # masses[k-1] = μ_{θ^k ω}(A)

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.ndim != 1 or np.any(m < 0):
            raise ValidationError("time-change masses must be a nonnegative vector")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        # accumulate in extended precision so knots like 9 * (1/9) land on 1.0
        T = np.concatenate([[0.0], np.cumsum(m, dtype=np.longdouble).astype(float)])
        T.setflags(write=False)
        object.__setattr__(self, "_T", T)

    @property
    def T(self) -> np.ndarray:
        return self._T

    @property
    def K(self) -> int:
        return len(self.masses)

    @property
    def max_step(self) -> float:
        return float(self.masses.max()) if self.K else 0.0

    @property
    def min_step(self) -> float:
        return float(self.masses.min()) if self.K else 0.0

    def truncated(self, K: int) -> "TimeChange":
        return TimeChange(self.omega, self.A, self.masses[:K])


def time_change(sft: RandomSFT, psi: PotentialSpec, omega: float, A: CylinderSet, K: int,
                tol: float = DEFAULT_TOL) -> TimeChange:
    if K < 1:
        raise ValidationError("K must be at least 1")
    return TimeChange(float(omega), A, orbit_masses(sft, psi, omega, A, 1, K, tol))


def time_change_covering(sft, psi, omega: float, A: CylinderSet, level: float,
                         tol: float = DEFAULT_TOL, K0: int = 256,
                         K_max: int = MAX_HORIZON) -> TimeChange:
    """Extend the time change until ``T^K > level + max step``.

    Gives up early when the linear projection ``T^K * K_max / K`` of the
    current growth rate cannot reach ``level``.
    """
    masses = orbit_masses(sft, psi, omega, A, 1, K0, tol)
    while True:
        T_end = float(np.sum(masses))
        if T_end > level + masses.max():
            return TimeChange(float(omega), A, masses)
        if len(masses) >= K_max or T_end * K_max / len(masses) < 0.5 * level:
            raise HorizonError(
                f"T^{len(masses)} = {T_end:.4g} does not exceed {level:.4g} within K_max={K_max}"
            )
        more = orbit_masses(sft, psi, omega, A, len(masses) + 1, len(masses), tol)
        masses = np.concatenate([masses, more])


@dataclass(frozen=True)
class WindowConstants:
    """``p_i``, ``q_i`` per interval: windows ``p_i < j <= p_i + q_i`` cover ``R_i``."""

    p: tuple
    q: tuple
    k_star: int

    def windows(self, i: int) -> np.ndarray:
        return np.arange(self.p[i] + 1, self.p[i] + self.q[i] + 1)

    def all_windows(self) -> np.ndarray:
        return np.concatenate([self.windows(i) for i in range(len(self.p))])


def window_constants(tc: TimeChange, R: IntervalUnion) -> WindowConstants:
    """``p_i = max{k : T^k <= inf R_i}`` (0 when even ``T^1`` exceeds it), ``p_i + q_i = max{k : T^k <= sup R_i}``."""
    T = tc.T
    if T[-1] <= R.sup:
        raise HorizonError(
            f"time change ends at T^{tc.K} = {T[-1]:.4g} <= sup R = {R.sup:.4g}; extend K"
        )
    p = np.searchsorted(T, R.lows, side="right") - 1
    pq = np.searchsorted(T, R.highs, side="right") - 1
    return WindowConstants(tuple(int(v) for v in p), tuple(int(v) for v in pq - p), int(pq.max()))


def hit_windows(tc: TimeChange, R: IntervalUnion) -> np.ndarray:
    """Indices ``k`` whose time ``T^k`` lies in ``R``, with the interval of each."""
    if tc.T[-1] <= R.sup:
        raise HorizonError(f"time change ends at {tc.T[-1]:.4g} <= sup R = {R.sup:.4g}; extend K")
    idx = R.member(tc.T[1:])
    ks = np.flatnonzero(idx >= 0) + 1
    return np.stack([ks, idx[ks - 1]])


@dataclass(frozen=True)
class PointProcessRealization:
    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        if np.any(np.diff(t) < 0):
            raise ValidationError("realization times must be sorted")
        if t.size and (t[0] < 0 or not np.all(np.isfinite(t))):
            raise ValidationError("realization times must be finite and nonnegative")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.times)


def visits(x: np.ndarray, A: CylinderSet, b: int) -> np.ndarray:
    """Boolean mask over window offsets ``k`` with ``σ^k x ∈ A``."""
    return A.indicator(b)[window_codes(x, A.depth, b)]


def realize_process(x: Sequence[int], A: CylinderSet, tc: TimeChange, b: int) -> PointProcessRealization:
    x = np.asarray(x)
    if len(x) < tc.K + A.depth:
        raise ValidationError(f"path of length {len(x)} is shorter than K + depth = {tc.K + A.depth}")
    hits = visits(x[: tc.K + A.depth], A, b)
    ks = np.flatnonzero(hits[1 : tc.K + 1]) + 1
    return PointProcessRealization(tc.T[ks])


def counts_in(re: PointProcessRealization, R: IntervalUnion) -> np.ndarray:
    idx = R.member(re.times)
    return np.bincount(idx[idx >= 0], minlength=len(R))


def first_hitting(x: Sequence[int], A: CylinderSet, k_max: int, b: int) -> Optional[int]:
    """Least ``1 <= k <= k_max`` with ``σ^k x ∈ A``, or ``None``."""
    x = np.asarray(x)
    if k_max < 1:
        return None
    hits = visits(x[: k_max + A.depth], A, b)
    ks = np.flatnonzero(hits[1 : k_max + 1])
    return int(ks[0]) + 1 if ks.size else None
