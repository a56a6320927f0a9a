"""Random transition-matrix cocycles over a rotation and their word combinatorics.

Symbols are ``1..b`` in every public structure; arrays index them from 0
internally.  A word of length ``n`` names the n-cylinder of sequences that
start with it, and a :class:`CylinderSet` is a finite union of such cylinders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .base import BaseRotation, IntervalPartition, orbit, refine
from .errors import ValidationError, WordCapExceeded

WORD_CAP = 10**7

Word = tuple


def as_word(symbols: Iterable[int], b: Optional[int] = None) -> Word:
    w = tuple(int(s) for s in symbols)
    if not w:
        raise ValidationError("words must be non-empty")
    if min(w) < 1 or (b is not None and max(w) > b):
        raise ValidationError(f"word {w} has symbols outside 1..{b}")
    return w


class CylinderSet:
    """A set of equal-length words, stored as a sorted, duplicate-free array."""

    __slots__ = ("_array",)

    def __init__(self, words, depth: Optional[int] = None):
        try:
            arr = np.asarray(words if not isinstance(words, CylinderSet) else words.array)
        except ValueError:
            raise ValidationError("all words of a CylinderSet must have the same length") from None
        if arr.size == 0:
            if depth is None:
                raise ValidationError("an empty CylinderSet needs an explicit depth")
            arr = np.zeros((0, depth), dtype=np.int64)
        if arr.ndim == 1:
            arr = arr[None, :]
        arr = arr.astype(np.int64)
        if depth is not None and arr.shape[1] != depth:
            raise ValidationError(f"words have length {arr.shape[1]}, expected {depth}")
        if arr.size and arr.min() < 1:
            raise ValidationError("symbols start at 1")
        arr = np.unique(arr, axis=0) if len(arr) else arr
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def single(cls, word: Sequence[int]) -> "CylinderSet":
        return cls([as_word(word)])

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def depth(self) -> int:
        return self._array.shape[1]

    @property
    def words(self) -> tuple:
        return tuple(tuple(int(s) for s in row) for row in self._array)

    def __len__(self):
        return len(self._array)

    def __iter__(self):
        return iter(self.words)

    def __contains__(self, word):
        w = np.asarray(word)
        return w.shape == (self.depth,) and bool(np.any(np.all(self._array == w, axis=1)))

    def __eq__(self, other):
        return (
            isinstance(other, CylinderSet)
            and self._array.shape == other._array.shape
            and bool(np.all(self._array == other._array))
        )

    def __hash__(self):
        return hash((self._array.shape, self._array.tobytes()))

    def __repr__(self):
        if len(self) <= 6:
            return f"CylinderSet({list(self.words)})"
        return f"CylinderSet(depth={self.depth}, size={len(self)})"

    def codes(self, b: int) -> np.ndarray:
        """Base-``b`` integer code of every word (symbols shifted to 0..b-1)."""
        return encode_words(self._array, b)

    def indicator(self, b: int) -> np.ndarray:
        """Boolean array over all ``b**depth`` codes marking members."""
        mask = np.zeros(b**self.depth, dtype=bool)
        mask[self.codes(b)] = True
        return mask


def encode_words(words: np.ndarray, b: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64)
    code = np.zeros(words.shape[:-1], dtype=np.int64)
    for j in range(words.shape[-1]):
        code = code * b + (words[..., j] - 1)
    return code


def window_codes(x: np.ndarray, n: int, b: int) -> np.ndarray:
    """Codes of every length-``n`` window of the path(s) ``x`` (last axis)."""
    x = np.asarray(x, dtype=np.int64) - 1
    count = x.shape[-1] - n + 1
    if count <= 0:
        return np.zeros(x.shape[:-1] + (0,), dtype=np.int64)
    code = np.zeros(x.shape[:-1] + (count,), dtype=np.int64)
    for j in range(n):
        code = code * b + x[..., j : j + count]
    return code


@dataclass(frozen=True)
class RandomSFT:
    """A 0/1 matrix cocycle ``Q(ω)``, constant on the cells of ``partition``.

    ``matrices[c]`` is the ``b x b`` transition matrix on cell ``c``; entry
    ``[i-1, j-1]`` allows symbol ``j`` to follow symbol ``i``.
    """

    base: BaseRotation
    alphabet_size: int
    partition: IntervalPartition
    matrices: np.ndarray = field(repr=False)
    word_cap: int = WORD_CAP

    def __post_init__(self):
        b = int(self.alphabet_size)
        if b < 2:
            raise ValidationError("alphabet size must be at least 2")
        mats = np.array(self.matrices, dtype=np.int8)
        if mats.shape != (len(self.partition), b, b):
            raise ValidationError(
                f"expected matrices of shape {(len(self.partition), b, b)}, got {mats.shape}"
            )
        if not np.all((mats == 0) | (mats == 1)):
            raise ValidationError("transition matrices must be 0/1")
        for c, m in enumerate(mats):
            if not (m.any(axis=1).all() and m.any(axis=0).all()):
                lo, hi = self.partition.cells()[c]
                raise ValidationError(
                    f"Q(ω) on cell [{lo:.6g}, {hi:.6g}) has an all-zero row or column"
                )
        mats.setflags(write=False)
        object.__setattr__(self, "alphabet_size", b)
        object.__setattr__(self, "matrices", mats)

    @property
    def b(self) -> int:
        return self.alphabet_size

    def matrices_along(self, omega: float, k: int, start: int = 0) -> np.ndarray:
        """``Q(θ^i ω)`` for ``i = start .. start + k - 1`` as a ``(k, b, b)`` array."""
        if k == 0:
            return np.zeros((0, self.b, self.b), dtype=np.int8)
        pts = orbit(self.base, omega, k - 1, start=start)
        return self.matrices[self.partition.cell_index(pts)]


def transition_matrix(sft: RandomSFT, omega: float) -> np.ndarray:
    return sft.matrices[int(sft.partition.cell_index(omega))]


def is_admissible(sft: RandomSFT, omega: float, w: Sequence[int]) -> bool:
    w = np.asarray(as_word(w, sft.b)) - 1
    if len(w) == 1:
        return True
    mats = sft.matrices_along(omega, len(w) - 1)
    return bool(np.all(mats[np.arange(len(w) - 1), w[:-1], w[1:]] == 1))


def _extend(words: np.ndarray, mats: np.ndarray, cap: int) -> np.ndarray:
    """Extend 0-based words by one admissible symbol per matrix in ``mats``."""
    for q in mats:
        allowed = q[words[:, -1]]
        count = int(allowed.sum())
        if count > cap:
            raise WordCapExceeded(count, cap)
        rows, syms = np.nonzero(allowed)
        words = np.hstack([words[rows], syms[:, None]])
    return words


def admissible_words(sft: RandomSFT, omega: float, n: int, cap: Optional[int] = None) -> CylinderSet:
    """All length-``n`` words admissible along the orbit of ``omega``."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    cap = sft.word_cap if cap is None else cap
    if sft.b > cap:
        raise WordCapExceeded(sft.b, cap)
    words = np.arange(sft.b, dtype=np.int64)[:, None]
    words = _extend(words, sft.matrices_along(omega, n - 1), cap)
    return CylinderSet(words + 1, depth=n)


def count_admissible(sft: RandomSFT, omega: float, n: int) -> int:
    """Number of admissible n-words, from the product ``1^T Q(ω)...Q(θ^{n-2}ω) 1``."""
    v = np.ones(sft.b, dtype=object)
    for q in sft.matrices_along(omega, n - 1)[::-1]:
        v = q.astype(object) @ v
    return int(sum(v))


def aperiodicity_constant(sft: RandomSFT, M_max: int) -> Optional[int]:
    """Least ``M <= M_max`` with ``Q(ω)...Q(θ^{M-1}ω) > 0`` for every ω, else ``None``.

    Exact: the product is constant on each cell of the depth-M refinement, so
    one representative per cell suffices.
    """
    if M_max < 1:
        raise ValidationError("M_max must be at least 1")
    for M in range(1, M_max + 1):
        reps = refine(sft.partition, sft.base, M).midpoints()
        ok = True
        for w in reps:
            prod = np.eye(sft.b, dtype=np.int64)
            for q in sft.matrices_along(w, M):
                prod = np.minimum(prod @ q, 1)
            if not prod.all():
                ok = False
                break
        if ok:
            return M
    return None


def min_return_q(w: Sequence[int]) -> int:
    """Shortest self-overlap shift of ``w``; ``len(w)`` when there is none."""
    w = tuple(w)
    n = len(w)
    if n < 1:
        raise ValidationError("n must be at least 1")
    for j in range(1, n):
        if w[j:] == w[: n - j]:
            return j
    return n


def cylinder_intersection(
    sft: RandomSFT,
    omega: float,
    A: CylinderSet,
    j: int,
    B: CylinderSet,
    cap: Optional[int] = None,
) -> CylinderSet:
    """``A ∩ σ^{-j} B`` restricted to the fibre of ``omega``, as words of length ``n + j``."""
    if j < 1:
        raise ValidationError("shift j must be at least 1")
    n = A.depth
    if B.depth != n:
        raise ValidationError("A and B must have the same depth")
    cap = sft.word_cap if cap is None else cap
    length = n + j
    mats = sft.matrices_along(omega, length - 1)
    pos = np.arange(length - 1)
    out = []
    for a in A.array - 1:
        if not np.all(mats[pos[: n - 1], a[:-1], a[1:]]):
            continue
        if j < n:
            for bw in B.array - 1:
                if np.array_equal(a[j:], bw[: n - j]):
                    word = np.concatenate([a, bw[n - j :]])
                    if np.all(mats[pos, word[:-1], word[1:]]):
                        out.append(word)
        else:
            middle = _extend(a[None, :], mats[n - 1 : j - 1], cap)
            for bw in B.array - 1:
                link = mats[j - 1, middle[:, -1], bw[0]] == 1
                inner = np.all(mats[pos[j : length - 1], bw[:-1], bw[1:]]) if n > 1 else True
                if inner and link.any():
                    tail = np.broadcast_to(bw, (int(link.sum()), n))
                    out.append(np.hstack([middle[link], tail]))
    if not out:
        return CylinderSet([], depth=length)
    words = np.vstack([np.atleast_2d(o) for o in out])
    if len(words) > cap:
        raise WordCapExceeded(len(words), cap)
    return CylinderSet(words + 1, depth=length)
