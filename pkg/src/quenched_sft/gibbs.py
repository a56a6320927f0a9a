"""Quenched Gibbs measures of a random SFT with a locally constant potential.

For a potential that reads two coordinates the transfer operator along an
orbit is the matrix cocycle ``W_i = Q(θ^i ω) * exp(ψ(θ^i ω, ., .))``.  The
sample measure of the cylinder of a word ``w`` is

    μ_ω(C_n(w)) = α_0[w_0] W_0[w_0, w_1] ... W_{n-2}[w_{n-2}, w_{n-1}] β_{n-1}[w_{n-1}] / Z

where ``α_0 = 1ᵀ W_{-m} ... W_{-1}`` collects the past of the fibre and
``β_{n-1} = W_{n-1} ... W_{n+m-2} 1`` its future.  Both converge in
projective space as the burn-in ``m`` grows (cone contraction), and ``m`` is
doubled from 8 until successive answers agree to the requested tolerance.
Because ``α_{i+1} ∝ α_i W_i`` the family is equivariant by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .base import IntervalPartition, QuadratureGrid, _rotate
from .errors import NonConvergenceError, ValidationError
from .sft import CylinderSet, RandomSFT, admissible_words, as_word, encode_words, is_admissible

DEFAULT_TOL = 1e-12
M_START = 8
M_MAX = 2**12
MAX_TABLE_DEPTH = 14


@dataclass(frozen=True)
class PotentialSpec:
    """Locally constant potential ``ψ(ω, w_0 ... w_{k-1})``, piecewise constant in ω.

    ``values`` has shape ``(cells, b)`` for ``depth=1`` and ``(cells, b, b)``
    for ``depth=2``.  ``holder_a``/``holder_r`` are the regularity constants
    with ``sup{|ψ(x) - ψ(y)| : x ∈ C_n(y)} <= a r^n``; when omitted they are
    filled with the smallest ``a`` that works for ``r = 1/2``.
    """

    partition: IntervalPartition
    values: np.ndarray = field(repr=False)
    depth: int = 2
    holder_a: Optional[float] = None
    holder_r: float = 0.5
    name: str = ""

    def __post_init__(self):
        if self.depth not in (1, 2):
            raise ValidationError("only potentials of depth 1 or 2 are supported")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != self.depth + 1 or vals.shape[0] != len(self.partition):
            raise ValidationError(f"values of shape {vals.shape} do not match depth/partition")
        if self.depth == 2 and vals.shape[1] != vals.shape[2]:
            raise ValidationError("depth-2 values must be square per cell")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("potential values must be finite")
        if not (0.0 < self.holder_r < 1.0):
            raise ValidationError("holder_r must lie in (0, 1)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        a = self.holder_a
        if a is None:
            a = self._min_holder_a(self.holder_r)
        elif a < self._min_holder_a(self.holder_r) - 1e-12:
            raise ValidationError("holder constants do not bound the variation of ψ")
        object.__setattr__(self, "holder_a", float(a))

    @property
    def b(self) -> int:
        return self.values.shape[1]

    def _min_holder_a(self, r):
        v = self.values
        osc0 = float(np.ptp(v, axis=tuple(range(1, v.ndim))).max())
        if self.depth == 1:
            return osc0
        osc1 = float(np.ptp(v, axis=2).max())
        return max(osc0, osc1 / r)

    def pair_values(self) -> np.ndarray:
        """Values as a depth-2 array (a depth-1 ψ reads only the first symbol)."""
        if self.depth == 2:
            return self.values
        return np.repeat(self.values[:, :, None], self.b, axis=2)

    @classmethod
    def zero(cls, b: int) -> "PotentialSpec":
        return cls(IntervalPartition(), np.zeros((1, b, b)), name="zero")

    @classmethod
    def constant(cls, matrix, name: str = "") -> "PotentialSpec":
        m = np.asarray(matrix, dtype=float)
        return cls(IntervalPartition(), m[None], depth=m.ndim, name=name)


class _Weights:
    """Per-cell weight matrices on the common refinement of Q's and ψ's partitions."""

    def __init__(self, sft: RandomSFT, psi: PotentialSpec):
        if psi.b != sft.b:
            raise ValidationError(f"potential is over {psi.b} symbols, SFT over {sft.b}")
        self.b = sft.b
        self.base = sft.base
        self.partition = sft.partition.union(psi.partition)
        mids = self.partition.midpoints()
        Q = sft.matrices[sft.partition.cell_index(mids)]
        V = psi.pair_values()[psi.partition.cell_index(mids)]
        self.table = np.where(Q == 1, np.exp(V), 0.0)

    def at(self, points) -> np.ndarray:
        return self.table[self.partition.cell_index(points)]


@dataclass
class _Boundary:
    """Weights and boundary vectors for ``L`` positions along ``B`` orbits."""

    W: np.ndarray  # (B, L - 1, b, b) interior weights, positions 0..L-2
    alpha: np.ndarray  # (B, L, b) normalised past vectors
    beta: np.ndarray  # (B, L, b) normalised future vectors


def _boundary(model: _Weights, omegas, L: int, m: int, keep_all=True) -> _Boundary:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    idx = np.arange(-m, L + m - 1, dtype=np.int64)
    W = model.at(_rotate(omegas[:, None], model.base.r, idx[None, :]))
    B, P, b = W.shape[0], W.shape[1], model.b
    v = np.ones((B, b))
    for t in range(m):
        v = np.einsum("ka,kab->kb", v, W[:, t])
        v /= v.max(axis=1, keepdims=True)
    u = np.ones((B, b))
    for t in range(P - 1, L + m - 2, -1):
        u = np.einsum("kab,kb->ka", W[:, t], u)
        u /= u.max(axis=1, keepdims=True)
    n_keep = L if keep_all else 1
    alpha = np.empty((B, n_keep, b))
    beta = np.empty((B, L if keep_all else 1, b))
    alpha[:, 0] = v
    if keep_all:
        for i in range(1, L):
            v = np.einsum("ka,kab->kb", v, W[:, m + i - 1])
            v /= v.max(axis=1, keepdims=True)
            alpha[:, i] = v
        beta[:, L - 1] = u
        for i in range(L - 2, -1, -1):
            u = np.einsum("kab,kb->ka", W[:, m + i], u)
            u /= u.max(axis=1, keepdims=True)
            beta[:, i] = u
    else:
        beta[:, 0] = u
    return _Boundary(W[:, m : m + L - 1], alpha, beta)


def _converge(fn: Callable[[int], np.ndarray], tol: float):
    """Evaluate ``fn(m)`` for m = 8, 16, ... until successive results agree to ``tol``."""
    m = M_START
    prev = np.asarray(fn(m))
    gap = np.inf
    while m < M_MAX:
        m *= 2
        cur = np.asarray(fn(m))
        gap = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        if gap < tol:
            return cur, m
        prev = cur
    raise NonConvergenceError(gap, m, tol)


def burnin_gaps(sft, psi, omega, w, m_values=(8, 16, 32, 64, 128)):
    """Cauchy gaps ``|μ^(2m) - μ^(m)|`` of one cylinder along a burn-in schedule."""
    model = _Weights(sft, psi)
    word = np.asarray(as_word(w, sft.b)) - 1
    vals = [float(_masses_at_start(_boundary(model, omega, len(word), m), word[None])[0, 0])
            for m in m_values]
    return np.abs(np.diff(vals))


def _masses_at_start(bd: _Boundary, words0: np.ndarray) -> np.ndarray:
    """Cylinder masses ``(B, Nw)`` of 0-based words starting at position 0."""
    n = words0.shape[1]
    B = bd.alpha.shape[0]
    num = bd.alpha[:, 0][:, words0[:, 0]]
    for j in range(n - 1):
        num = num * bd.W[:, j][:, words0[:, j], words0[:, j + 1]]
    num = num * bd.beta[:, n - 1][:, words0[:, -1]]
    z = bd.beta[:, n - 1]
    for j in range(n - 2, -1, -1):
        z = np.einsum("kab,kb->ka", bd.W[:, j], z)
    Z = np.einsum("ka,ka->k", bd.alpha[:, 0], z)
    return num / Z.reshape(B, 1)


def _all_masses_at_start(bd: _Boundary, n: int) -> np.ndarray:
    """Masses ``(B, b**n)`` of every word in lexicographic code order (zeros when inadmissible)."""
    B, b = bd.alpha.shape[0], bd.alpha.shape[2]
    v = bd.alpha[:, 0]
    for j in range(n - 1):
        last = np.arange(v.shape[1]) % b
        v = (v[:, :, None] * bd.W[:, j][:, last, :]).reshape(B, -1)
    last = np.arange(v.shape[1]) % b
    v = v * bd.beta[:, n - 1][:, last]
    # normalise by the vector product, not by v.sum(), so that the total
    # mass is an independent check of the word expansion
    z = bd.beta[:, n - 1]
    for j in range(n - 2, -1, -1):
        z = np.einsum("kab,kb->ka", bd.W[:, j], z)
    Z = np.einsum("ka,ka->k", bd.alpha[:, 0], z)
    return v / Z[:, None]


def birkhoff_weight(sft: RandomSFT, psi: PotentialSpec, omega: float, w: Sequence[int]) -> float:
    """``exp(Σ_{i<n} ψ(θ^i ω, w_i ... w_{i+k-1}))`` for a word of length ``n + k - 1``."""
    w = np.asarray(as_word(w, sft.b)) - 1
    n = len(w) - psi.depth + 1
    if n < 1:
        raise ValidationError(f"word too short for a depth-{psi.depth} potential")
    if not is_admissible(sft, omega, w + 1):
        raise ValidationError("birkhoff_weight needs an admissible word")
    pts = _rotate(float(omega), sft.base.r, np.arange(n))
    vals = psi.values[psi.partition.cell_index(pts)]
    if psi.depth == 1:
        terms = vals[np.arange(n), w[:n]]
    else:
        terms = vals[np.arange(n), w[:n], w[1 : n + 1]]
    return float(np.exp(np.sum(terms)))


def cylinder_measure(
    sft: RandomSFT,
    psi: PotentialSpec,
    omega: float,
    w: Sequence[int],
    tol: float = DEFAULT_TOL,
    max_depth: int = MAX_TABLE_DEPTH,
    return_m: bool = False,
):
    """Sample measure ``μ_ω(C_n(w))``; exactly 0 for inadmissible words."""
    word = np.asarray(as_word(w, sft.b)) - 1
    if len(word) > max_depth:
        raise ValidationError(f"word length {len(word)} exceeds max depth {max_depth}")
    if not is_admissible(sft, omega, word + 1):
        return (0.0, 0) if return_m else 0.0
    model = _Weights(sft, psi)
    val, m = _converge(lambda m: _masses_at_start(_boundary(model, omega, len(word), m), word[None]), tol)
    p = float(val[0, 0])
    return (p, m) if return_m else p


def cylinder_measures(sft, psi, omegas, w, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``μ_ω(C_n(w))`` for an array of base points at once."""
    word = np.asarray(as_word(w, sft.b)) - 1
    model = _Weights(sft, psi)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    val, _ = _converge(lambda m: _masses_at_start(_boundary(model, omegas, len(word), m), word[None])[:, 0], tol)
    return val


@dataclass(frozen=True)
class CylinderMeasureTable:
    """Sample measures of all admissible n-cylinders at one base point."""

    omega: float
    n: int
    m: int
    words: CylinderSet = field(repr=False)
    probs: np.ndarray = field(repr=False)
    tol: float = DEFAULT_TOL

    def __len__(self):
        return len(self.words)

    def prob(self, word) -> float:
        idx = np.flatnonzero(np.all(self.words.array == np.asarray(word), axis=1))
        return float(self.probs[idx[0]]) if idx.size else 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.words.words, (float(p) for p in self.probs)))

    def total(self) -> float:
        return float(np.sum(self.probs))

    def max_additivity_gap(self, finer: "CylinderMeasureTable") -> float:
        """Largest ``|Σ_a finer(w a) - self(w)|`` over words of this table."""
        if finer.n != self.n + 1:
            raise ValidationError("finer table must have depth n + 1")
        b = int(max(self.words.array.max(), finer.words.array.max()))
        parent = encode_words(finer.words.array[:, :-1], b)
        sums = np.zeros(b**self.n)
        np.add.at(sums, parent, finer.probs)
        full = np.zeros(b**self.n)
        full[self.words.codes(b)] = self.probs
        return float(np.max(np.abs(sums - full)))


def measure_table(sft, psi, omega: float, n: int, tol: float = DEFAULT_TOL,
                  max_depth: int = MAX_TABLE_DEPTH) -> CylinderMeasureTable:
    if not (1 <= n <= max_depth):
        raise ValidationError(f"table depth must lie in 1..{max_depth}")
    words = admissible_words(sft, omega, n)
    model = _Weights(sft, psi)
    codes = words.codes(sft.b)
    probs, m = _converge(lambda m: _all_masses_at_start(_boundary(model, omega, n, m), n)[0, codes], tol)
    probs.setflags(write=False)
    return CylinderMeasureTable(float(omega), n, m, words, probs, tol)


def all_cylinder_measures(sft, psi, omegas, n: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``(len(omegas), b**n)`` array of every n-cylinder measure, zeros where inadmissible."""
    model = _Weights(sft, psi)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if sft.b**n * len(omegas) > 5 * 10**7:
        raise ValidationError("too many cylinders requested at once")
    val, _ = _converge(lambda m: _all_masses_at_start(_boundary(model, omegas, n, m), n), tol)
    return val


def orbit_masses(sft, psi, omega: float, A: CylinderSet, start: int, count: int,
                 tol: float = DEFAULT_TOL) -> np.ndarray:
    """``μ_{θ^i ω}(A)`` for ``i = start .. start + count - 1`` from one shared orbit sweep."""
    model = _Weights(sft, psi)
    words0 = A.array - 1
    n = A.depth
    base_pt = float(_rotate(float(omega), sft.base.r, np.asarray(start)))

    def masses(m):
        bd = _boundary(model, base_pt, count + n - 1, m)
        W, al, be = bd.W[0], bd.alpha[0], bd.beta[0]
        i = np.arange(count)
        z = be[i + n - 1]
        for j in range(n - 2, -1, -1):
            z = np.einsum("kab,kb->ka", W[i + j], z)
        Z = np.einsum("ka,ka->k", al[i], z)
        total = np.zeros(count)
        for w in words0:
            num = al[i, w[0]] * be[i + n - 1, w[-1]]
            for j in range(n - 1):
                num = num * W[i + j, w[j], w[j + 1]]
            total += num
        return total / Z

    if len(words0) == 0:
        return np.zeros(count)
    val, _ = _converge(masses, tol)
    return val


class PathSampler:
    """Draws paths of length ``L`` from the sample measure at ``omega``.

    The finite-volume measure is a non-homogeneous Markov chain; its initial
    law and transition kernels are precomputed once, so every draw is a
    sequence of inverse-CDF lookups.
    """

    def __init__(self, sft: RandomSFT, psi: PotentialSpec, omega: float, L: int,
                 tol: float = DEFAULT_TOL):
        if L < 1:
            raise ValidationError("path length must be at least 1")
        self.b = sft.b
        self.omega = float(omega)
        self.L = L
        model = _Weights(sft, psi)

        def kernels(m):
            bd = _boundary(model, omega, L, m)
            W, al, be = bd.W[0], bd.alpha[0], bd.beta[0]
            init = al[0] * be[0]
            init = init / init.sum()
            trans = W * be[1:, None, :]
            trans = trans / trans.sum(axis=2, keepdims=True)
            return np.concatenate([init, trans.ravel()])

        flat, self.m = _converge(kernels, tol)
        b = self.b
        self.init_cdf = _cdf(flat[:b][None])[0]
        self.trans_cdf = _cdf(flat[b:].reshape(L - 1, b, b)) if L > 1 else np.zeros((0, b, b))

    def sample_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms ``u`` of shape ``(C, L)`` to ``C`` paths (symbols 1..b)."""
        u = np.atleast_2d(u)
        C = u.shape[0]
        x = np.empty((C, self.L), dtype=np.int8)
        cur = (u[:, 0, None] >= self.init_cdf[None, :-1]).sum(axis=1)
        x[:, 0] = cur
        for i in range(self.L - 1):
            cdf = self.trans_cdf[i][cur]
            cur = (u[:, i + 1, None] >= cdf[:, :-1]).sum(axis=1)
            x[:, i + 1] = cur
        x += 1
        return x

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_uniforms(rng.random((1, self.L)))[0]


def _cdf(p: np.ndarray) -> np.ndarray:
    """Row CDFs that reach exactly 1 at the last symbol with positive mass."""
    c = np.cumsum(p, axis=-1)
    c = c / c[..., -1:]
    last = p.shape[-1] - 1 - np.argmax((p > 0)[..., ::-1], axis=-1)
    cols = np.arange(p.shape[-1])
    c = np.where(cols >= last[..., None], 1.0, c)
    return c


def sample_path(sft, psi, omega: float, L: int, tol: float = DEFAULT_TOL,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    rng = np.random.default_rng() if rng is None else rng
    return PathSampler(sft, psi, omega, L, tol).sample(rng)


def marginal_cylinder_measure(sft, psi, w: Sequence[int], grid: QuadratureGrid,
                              tol: float = DEFAULT_TOL, error: bool = False):
    """``μ(C(w)) = ∫ μ_ω(C(w)) dω`` by the midpoint rule on ``grid``.

    With ``error=True`` returns ``(value, |value - value_on_doubled_grid|)``.
    """
    value = grid.integrate(cylinder_measures(sft, psi, grid.nodes, w, tol))
    if not error:
        return value
    finer = grid.doubled()
    fine_value = finer.integrate(cylinder_measures(sft, psi, finer.nodes, w, tol))
    return fine_value, abs(fine_value - value)


def epsilon_decay(sft, psi, n_range: Sequence[int], grid, tol: float = DEFAULT_TOL):
    """``ε(n) = max_{ω, w} μ_ω(C_n(w))`` over grid nodes, with a log-linear fit.

    Returns ``(eps, slope, r_squared)``; ``slope`` estimates ``-a`` in ``ε(n) <= c e^{-an}``.
    """
    nodes = grid.nodes if isinstance(grid, QuadratureGrid) else np.asarray(grid, dtype=float)
    ns = np.asarray(list(n_range))
    eps = np.array([all_cylinder_measures(sft, psi, nodes, int(n), tol).max() for n in ns])
    slope, r2 = loglinear_fit(ns, eps)
    return eps, slope, r2


#: Values at or below this are round-off zeros and are left out of log fits.
FIT_FLOOR = 1e-13


def loglinear_fit(x, y):
    """Least-squares fit of ``ln y`` against ``x`` over ``y > FIT_FLOOR``; returns ``(slope, R²)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > FIT_FLOOR
    x, ly = x[keep], np.log(y[keep])
    if len(x) < 2:
        return float("nan"), float("nan")
    slope, icept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + icept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def distortion_constant(sft, psi, omega: float, n: int, m: int,
                        sample_words: Optional[Sequence[Sequence[int]]] = None,
                        tol: float = DEFAULT_TOL) -> float:
    """Empirical two-sided constant ``c`` in ``μ(C_{n+m}) ≍ μ(C_n) μ_{θ^n ω}(C_m)``.

    ``sample_words`` restricts the maximum to the given admissible (n+m)-words;
    by default every admissible word is used.
    """
    b = sft.b
    full = all_cylinder_measures(sft, psi, omega, n + m, tol)[0]
    head = all_cylinder_measures(sft, psi, omega, n, tol)[0]
    shifted = float(sft.base.shift(omega, n))
    tail = all_cylinder_measures(sft, psi, shifted, m, tol)[0]
    if sample_words is None:
        codes = np.flatnonzero(full > 0)
    else:
        arr = np.array([as_word(w, b) for w in sample_words])
        codes = encode_words(arr, b)
        codes = codes[full[codes] > 0]
    if codes.size == 0:
        raise ValidationError("no admissible words to evaluate")
    ratio = full[codes] / (head[codes // b**m] * tail[codes % b**m])
    return float(np.max(np.maximum(ratio, 1.0 / ratio)))


def pair_cylinder_measures(sft, psi, omega: float, n: int, m: int, gap: int,
                           tol: float = DEFAULT_TOL):
    """Joint measures ``μ_ω(C_n(a) ∩ σ^{-(n+gap)} C_m(c))`` for all word pairs.

    Returns ``(joint, head, tail)`` with ``joint`` of shape ``(b**n, b**m)``,
    ``head = μ_ω(C_n(a))`` and ``tail = μ_{θ^{n+gap} ω}(C_m(c))``.
    """
    model = _Weights(sft, psi)
    b = sft.b
    L = n + gap + m

    def joint(mm):
        bd = _boundary(model, omega, L, mm)
        W, al, be = bd.W[0], bd.alpha[0], bd.beta[0]
        hv = al[0]
        for j in range(n - 1):
            hv = (hv[:, None] * W[j][np.arange(hv.size) % b]).ravel()
        bridge = np.eye(b)
        for j in range(n - 1, n + gap):
            bridge = bridge @ W[j]
        tv = np.eye(b)
        for j in range(n + gap, L - 1):
            tv = (tv[:, :, None] * W[j][np.arange(tv.shape[1]) % b][None]).reshape(b, -1)
        tv = tv * be[L - 1][np.arange(tv.shape[1]) % b][None, :]
        J = (hv[:, None] * bridge[np.arange(hv.size) % b]) @ tv
        z = be[L - 1]
        for j in range(L - 2, -1, -1):
            z = W[j] @ z
        return J / float(al[0] @ z)

    J, _ = _converge(joint, tol)
    head = all_cylinder_measures(sft, psi, omega, n, tol)[0]
    tail = all_cylinder_measures(sft, psi, float(sft.base.shift(omega, n + gap)), m, tol)[0]
    return J, head, tail


def window_event_measures(sft, psi, omega: float, A: CylinderSet, constraints: np.ndarray,
                          tol: float = DEFAULT_TOL) -> np.ndarray:
    """Exact measures of events built from visits of the shift to ``A``.

    ``constraints`` has shape ``(S, J)``; entry ``[s, j]`` is ``+1`` when
    event ``s`` requires ``σ^j x ∈ A``, ``-1`` when it requires ``σ^j x ∉ A``
    and ``0`` when window ``j`` is unconstrained.  Returns ``μ_ω`` of each event.
    """
    cons = np.atleast_2d(np.asarray(constraints, dtype=np.int8))
    model = _Weights(sft, psi)
    n = A.depth
    L = cons.shape[1] + n - 1
    inA = A.indicator(sft.b)

    def run(m):
        bd = _boundary(model, omega, L, m, keep_all=False)
        return _window_dp(bd.W[0], bd.alpha[0, 0], bd.beta[0, 0], n, inA, cons)

    val, _ = _converge(run, tol)
    return val


def hitting_survival(sft, psi, omega: float, A: CylinderSet, k_max: int,
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """``μ_ω(τ_A > k)`` for ``k = 0 .. k_max`` (first visit at a time ``>= 1``)."""
    model = _Weights(sft, psi)
    n = A.depth
    L = k_max + n
    inA = A.indicator(sft.b)
    cons = -np.ones((1, k_max + 1), dtype=np.int8)
    cons[0, 0] = 0

    def run(m):
        bd = _boundary(model, omega, L, m)
        return _window_dp(bd.W[0], bd.alpha[0, 0], bd.beta[0], n, inA, cons, survival=True)

    val, _ = _converge(run, tol)
    return val


def _window_dp(W, alpha0, beta, n, inA, cons, survival=False):
    """Forward pass over window states (last ``max(n-1, 1)`` symbols).

    ``beta`` is the future vector at the last position, or the full
    ``(L, b)`` array when ``survival`` is requested; in that case the
    probability that windows ``1..k`` all avoid ``A`` is returned for every k.
    """
    b = alpha0.size
    S, J = cons.shape
    L = J + n - 1
    s_len = max(n - 1, 1)
    mod_win = b**n
    v = np.broadcast_to(alpha0, (S, b)).copy()
    z = alpha0.copy()
    out = np.empty(J) if survival else None

    def apply(v, j, codes):
        c = cons[:, j]
        if not c.any():
            return v
        hit = inA[codes % mod_win]
        keep = np.where(c[:, None] > 0, hit[None, :], np.where(c[:, None] < 0, ~hit[None, :], True))
        return v * keep

    def record(v, t):
        bt = beta[t] if survival else None
        last = np.arange(v.shape[1]) % b
        return float(v[0] @ bt[last]) / float(z @ bt)

    if n == 1:
        v = apply(v, 0, np.arange(b))
        if survival:
            out[0] = record(v, 0)
    for t in range(1, L):
        width = v.shape[1]
        last = np.arange(width) % b
        ext = (v[:, :, None] * W[t - 1][last][None, :, :]).reshape(S, width * b)
        if t >= n - 1:
            j = t - n + 1
            ext = apply(ext, j, np.arange(width * b))
        if width < b**s_len:
            v = ext
        else:
            v = ext.reshape(S, b, width).sum(axis=1)
        z = z @ W[t - 1]
        scale = z.max()
        z = z / scale
        v = v / scale
        if survival and t >= n - 1:
            out[t - n + 1] = record(v, t)
    if survival:
        return out
    last = np.arange(v.shape[1]) % b
    return (v @ beta[last]) / float(z @ beta)
