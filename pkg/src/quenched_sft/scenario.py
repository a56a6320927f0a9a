"""Prebuilt systems: a non-mixing three-symbol example and two closed-form oracles.

The three-symbol example switches its transitions on ``I = [0, 3/4)`` and
``J = [0, 1/4) ∪ [1/2, 1)``.  Since ``I - 1/2 = J`` (mod 1), shifting ω by
1/2 while swapping the symbols 1 and 3 maps the system onto itself, and the
sample measures inherit that symmetry.  The symmetry forces the marginal
measure to be non-mixing, which :func:`nonmixing_gap` exhibits numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .base import BaseRotation, IntervalPartition, QuadratureGrid, quadrature_grid, refine
from .errors import ValidationError
from .gibbs import DEFAULT_TOL, PotentialSpec, all_cylinder_measures, cylinder_measures
from .sft import RandomSFT, as_word, encode_words, is_admissible, min_return_q
from .stats import CheckEntry

DEFAULT_R = math.sqrt(2) - 1
EXAMPLE_BREAKPOINTS = (0.0, 0.25, 0.5, 0.75)


@dataclass(frozen=True)
class Scenario:
    name: str
    sft: RandomSFT
    psi: PotentialSpec
    word: tuple
    notes: str = ""
    exact: Optional[Callable] = field(default=None, repr=False, compare=False)

    @property
    def b(self) -> int:
        return self.sft.b

    def with_psi(self, psi: PotentialSpec, name: Optional[str] = None) -> "Scenario":
        return Scenario(name or self.name, self.sft, psi, self.word, self.notes, None)


def example_matrix(omega: float) -> np.ndarray:
    i = float(omega < 0.75)
    j = float(omega < 0.25 or omega >= 0.5)
    return np.array([[1, i, i * j], [i, 1, j], [i * j, j, 1]], dtype=np.int8)


def tilt_potential() -> PotentialSpec:
    """Nonconstant two-symbol potential that respects the 1↔3 / ω+1/2 symmetry.

    ``ψ(ω, uv) = 0.3 s(ω) (g(u) + g(v)) + 0.2 [u = v]`` with ``s = ±1`` on the
    two halves of the circle and ``g = (1, 0, -1)``.
    """
    g = np.array([1.0, 0.0, -1.0])
    vals = np.array([0.3 * s * (g[:, None] + g[None, :]) + 0.2 * np.eye(3) for s in (1.0, -1.0)])
    return PotentialSpec(IntervalPartition((0.0, 0.5)), vals, name="tilt")


def fibonacci_word(length: int, symbols=(1, 2)) -> tuple:
    """Prefix of the Fibonacci word ``0100101001001...`` mapped to ``symbols``."""
    a, b = "0", "01"
    while len(b) < length:
        a, b = b, b + a
    return tuple(symbols[int(c)] for c in b[:length])


def unbordered_word(length: int) -> tuple:
    """``1 2 2 2 ...``: no prefix has a proper border, so ``q_n = n`` for every n."""
    return (1,) + (2,) * (length - 1)


def admissible_fibonacci_word(sft: RandomSFT, omega: float, length: int) -> tuple:
    """Fibonacci prefix over {1, 2}, made admissible along the orbit of ``omega``.

    A switch that ``Q(θ^i ω)`` forbids is replaced by repeating the current
    symbol (the diagonal is always allowed in the example system).
    """
    f = fibonacci_word(length)
    mats = sft.matrices_along(omega, length - 1)
    y = [f[0]]
    for i in range(length - 1):
        c = f[i + 1]
        if not mats[i][y[-1] - 1, c - 1]:
            c = y[-1]
            if not mats[i][c - 1, c - 1]:
                raise ValidationError(f"cannot continue the word admissibly at step {i}")
        y.append(c)
    return tuple(y)


DEFAULT_ANCHOR = 0.1


def build_example5(r: float = DEFAULT_R, psi: str | PotentialSpec = "zero",
                   word_length: int = 24, anchor: float = DEFAULT_ANCHOR) -> Scenario:
    base = BaseRotation(r, label="rotation")
    part = IntervalPartition(EXAMPLE_BREAKPOINTS)
    mats = np.array([example_matrix(m) for m in part.midpoints()])
    sft = RandomSFT(base, 3, part, mats)
    if isinstance(psi, str):
        if psi == "zero":
            psi = PotentialSpec.zero(3)
        elif psi == "tilt":
            psi = tilt_potential()
        else:
            raise ValidationError(f"unknown potential {psi!r}; expected 'zero' or 'tilt'")
    word = admissible_fibonacci_word(sft, anchor, word_length)
    if not has_positive_measure(sft, word):
        raise ValidationError("designated word is not admissible on any cell")
    return Scenario("example5", sft, psi, word, notes="three symbols, Q switched by I and J")


def build_bernoulli_oracle(b: int = 3, r: float = DEFAULT_R) -> Scenario:
    sft = RandomSFT(BaseRotation(r), b, IntervalPartition(), np.ones((1, b, b), dtype=np.int8))
    return Scenario("bernoulli", sft, PotentialSpec.zero(b), unbordered_word(24),
                    notes="full shift with uniform weights", exact=lambda w: float(b) ** -len(w))


def markov_closed_form(weights: np.ndarray) -> Callable:
    """Stationary-chain cylinder probabilities for a positive 2x2 weight matrix."""
    M = np.asarray(weights, dtype=float)
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    lam = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    right = np.array([M[0, 1], lam - M[0, 0]])
    left = np.array([M[1, 0], lam - M[0, 0]])
    norm = float(left @ right)

    def prob(w):
        x = np.asarray(w) - 1
        p = left[x[0]] * right[x[-1]] / norm
        for a, c in zip(x[:-1], x[1:]):
            p *= M[a, c] / lam
        return float(p)

    prob.eigenvalues = (lam, tr - lam)
    return prob


def build_markov_oracle(weights, r: float = DEFAULT_R) -> Scenario:
    M = np.asarray(weights, dtype=float)
    if M.shape != (2, 2) or np.any(M <= 0):
        raise ValidationError("Markov oracle needs a positive 2x2 weight matrix")
    sft = RandomSFT(BaseRotation(r), 2, IntervalPartition(), np.ones((1, 2, 2), dtype=np.int8))
    psi = PotentialSpec.constant(np.log(M), name="markov")
    return Scenario("markov", sft, psi, unbordered_word(24), notes="stationary 2-state chain",
                    exact=markov_closed_form(M))


def has_positive_measure(sft: RandomSFT, word: Sequence[int], n: Optional[int] = None) -> bool:
    """True when the prefix is admissible on some cell of positive length.

    Admissibility of an n-word is constant on the cells of the depth-(n-1)
    refinement, so one midpoint per cell decides it.
    """
    word = as_word(word if n is None else word[:n], sft.b)
    cells = refine(sft.partition, sft.base, max(len(word) - 1, 1))
    return any(is_admissible(sft, w, word) for w in cells.midpoints())


def swap_word(w: Sequence[int], b: int = 3) -> tuple:
    return tuple(b + 1 - s for s in w)


def psi_respects_symmetry(psi: PotentialSpec, b: int = 3) -> bool:
    """``ψ(ω, w) = ψ(ω + 1/2, w')`` on every cell, with ``w'`` the symbol swap."""
    shifted = IntervalPartition(tuple(sorted({(x + 0.5) % 1.0 for x in psi.partition.breakpoints} | {0.0})))
    cells = psi.partition.union(shifted)
    vals = psi.pair_values()
    perm = np.arange(b)[::-1]
    for w in cells.midpoints():
        a = vals[psi.partition.cell_index(w)]
        c = vals[psi.partition.cell_index((w + 0.5) % 1.0)]
        if not np.allclose(a, c[np.ix_(perm, perm)], rtol=0, atol=1e-14):
            return False
    return True


def symmetry_check(sc: Scenario, n: int, grid, tol: float = 1e-6,
                   engine_tol: float = DEFAULT_TOL) -> CheckEntry:
    """max over grid ω and n-words of ``|μ_ω(C_n(w)) - μ_{ω+1/2}(C_n(w'))|``."""
    name = f"symmetry_n{n}"
    if not psi_respects_symmetry(sc.psi, sc.b):
        return CheckEntry(name, None, 0.0, tol, False, "oracle",
                          note="potential does not respect the symmetry", applicable=False)
    nodes = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    b = sc.b
    here = all_cylinder_measures(sc.sft, sc.psi, nodes, n, engine_tol)
    there = all_cylinder_measures(sc.sft, sc.psi, (nodes + 0.5) % 1.0, n, engine_tol)
    codes = np.arange(b**n)
    digits = (codes[:, None] // b ** np.arange(n - 1, -1, -1)) % b
    swapped = encode_words(b - digits, b)
    dev = float(np.max(np.abs(here - there[:, swapped])))
    return CheckEntry(name, dev, 0.0, tol, dev < tol, "oracle",
                      details={"grid_points": len(nodes)})


def convergent_denominators(r: float, count: int = 40) -> list:
    """Denominators of the continued-fraction convergents of ``r``."""
    x = Fraction(r)
    frac = x - math.floor(x)
    q_prev, q = 0, 1
    qs = [1]
    for _ in range(count):
        if frac == 0:
            break
        x = 1 / frac
        a = math.floor(x)
        frac = x - a
        q_prev, q = q, a * q + q_prev
        if q != qs[-1]:
            qs.append(q)
    return qs


def approach_sequence(r: float, count: int = 8, k_cap: int = 10**6) -> np.ndarray:
    """Increasing ``k_i`` with ``frac(k_i r)`` strictly closer to 1/2 at each step.

    Record minimisers of ``|frac(k r) - 1/2|`` are searched up to successive
    convergent denominators, which is where new records can appear.
    """
    out = []
    best = 1.0
    for q in convergent_denominators(r):
        if q > k_cap:
            break
        ks = np.arange(1, q + 1)
        dist = np.abs(np.mod(ks * r, 1.0) - 0.5)
        order = np.argsort(dist, kind="stable")
        for idx in order[:1]:
            if dist[idx] < best and (not out or ks[idx] > out[-1]):
                best = float(dist[idx])
                out.append(int(ks[idx]))
        if len(out) >= count:
            break
    return np.array(out[:count], dtype=np.int64)


def nonmixing_gap(sc: Scenario, approach: Sequence[int], word: Sequence[int] = (1, 2),
                  points_per_cell: int = 4, tol: float = DEFAULT_TOL) -> CheckEntry:
    """Jensen gap ``∫ μ_ω(C)^2 - (∫ μ_ω(C))^2`` and the correlation integrals along ``k_i``.

    ``corr_i = ∫ μ_ω(C) μ_{ω + 1/2 + k_i r}(C) dω`` should approach the second
    moment rather than the squared mean.
    """
    n = len(word)
    part = refine(sc.sft.partition, sc.sft.base, max(n, 2))

    def moments(grid: QuadratureGrid):
        f = cylinder_measures(sc.sft, sc.psi, grid.nodes, word, tol)
        mean = grid.integrate(f)
        second = grid.integrate(f * f)
        corr = []
        for k in approach:
            shifted = (grid.nodes + 0.5 + float(np.mod(k * sc.sft.base.r, 1.0))) % 1.0
            corr.append(grid.integrate(f * cylinder_measures(sc.sft, sc.psi, shifted, word, tol)))
        return mean, second, np.array(corr), f

    coarse = quadrature_grid(part, points_per_cell)
    fine = coarse.doubled()
    m0, s0, c0, _ = moments(coarse)
    m1, s1, c1, f1 = moments(fine)
    gap = s1 - m1 * m1
    quad_err = abs(s1 - s0) + abs(m1 * m1 - m0 * m0)
    dist_J = np.abs(c1 - s1)
    dist_mean = np.abs(c1 - m1 * m1)
    approaches = bool(dist_J[-1] < dist_mean[-1] and dist_J[-1] <= dist_J[0])
    support = fine.nodes[f1 > 0]
    margin_ok = gap > 0 and gap >= 10 * quad_err
    return CheckEntry(
        f"nonmixing_jensen_gap_n{n}", gap, 0.0, 10 * quad_err, bool(margin_ok and approaches), "oracle",
        note="gap must exceed 10x the two-resolution quadrature error; correlations must end closer to the second moment",
        details={
            "mean_sq": m1 * m1, "second_moment": s1, "quadrature_error": quad_err,
            "k": list(map(int, approach)), "correlations": c1, "distance_to_second_moment": dist_J,
            "distance_to_mean_sq": dist_mean, "support_max": float(support.max()) if support.size else None,
            "support_min": float(support.min()) if support.size else None,
        },
    )


def q_table(word: Sequence[int], n_max: Optional[int] = None) -> list:
    n_max = len(word) if n_max is None else n_max
    return [(n, min_return_q(word[:n])) for n in range(1, n_max + 1)]
