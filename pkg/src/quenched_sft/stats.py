"""Checks of the hitting-time limit laws and of the hypotheses behind them.

Exact quantities (Δ, the G/H/K terms, void probabilities, survival
functions, φ and β estimates) come from the window dynamic programme in
:mod:`quenched_sft.gibbs`; Monte-Carlo estimates come from the harness below,
which gives every path its own counter-based RNG stream so results do not
depend on chunking or on the number of worker processes.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import ValidationError
from .gibbs import (
    DEFAULT_TOL,
    PathSampler,
    all_cylinder_measures,
    hitting_survival,
    loglinear_fit,
    pair_cylinder_measures,
    window_event_measures,
)
from .process import (
    IntervalUnion,
    PointProcessRealization,
    TimeChange,
    WindowConstants,
    counts_in,
    hit_windows,
    time_change_covering,
    window_constants,
)
from .sft import CylinderSet, min_return_q

BRUTE_DELTA_MAX_K = 12
SKIP_DENOMINATOR = 1e-14


# --- reports -----------------------------------------------------------------


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


@dataclass
class CheckEntry:
    """One verified statement: the computed value, its target and the verdict.

    ``provenance`` says where the target comes from: ``bound`` (an exact
    inequality), ``limit`` (an asymptotic law tested at finite size),
    ``oracle`` (an independent exact computation) or ``regression``.
    """

    name: str
    value: Any
    target: Any
    tolerance: Any
    passed: bool
    provenance: str
    note: str = ""
    applicable: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(
            {
                "name": self.name,
                "value": self.value,
                "target": self.target,
                "tolerance": self.tolerance,
                "passed": bool(self.passed),
                "provenance": self.provenance,
                "note": self.note,
                "applicable": self.applicable,
                "details": self.details,
            }
        )


@dataclass
class VerificationReport:
    entries: list = field(default_factory=list)

    def add(self, entry: CheckEntry) -> CheckEntry:
        self.entries.append(entry)
        return entry

    def extend(self, entries):
        for e in entries:
            self.add(e)

    @property
    def applicable(self):
        return [e for e in self.entries if e.applicable]

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.applicable)

    def failures(self):
        return [e for e in self.applicable if not e.passed]

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": [e.to_dict() for e in self.applicable],
            "inapplicable": [e.to_dict() for e in self.entries if not e.applicable],
        }


# --- Monte-Carlo harness -------------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    N: int = 20_000
    seed: int = 0
    workers: int = 1
    chunk: int = 1024
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("MC sample count must be at least 1")
        if self.workers < 1 or self.chunk < 1:
            raise ValidationError("workers and chunk must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index``; the same for any chunking."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


_BLOCK = 1024


def _uniform_blocks(rngs, L):
    for start in range(0, L, _BLOCK):
        stop = min(L, start + _BLOCK)
        yield start, np.stack([r.random(stop - start) for r in rngs])


def sample_paths(sampler: PathSampler, seed: int, indices: Sequence[int]) -> np.ndarray:
    """Paths for the given path indices, drawn from the same streams as the harness."""
    rngs = [path_rng(seed, s) for s in indices]
    U = np.concatenate([u for _, u in _uniform_blocks(rngs, sampler.L)], axis=1)
    return sampler.sample_uniforms(U)


def _scan_chunk(args):
    init_cdf, trans_cdf, inA, n, groups, k_first, seed, lo, hi = args
    b = init_cdf.size
    L = trans_cdf.shape[0] + 1
    C = hi - lo
    J = L - n + 1
    bn = b**n
    rngs = [path_rng(seed, s) for s in range(lo, hi)]
    hits = np.zeros((C, J), dtype=bool)
    code = np.zeros(C, dtype=np.int64)
    cur = np.zeros(C, dtype=np.int64)
    for start, U in _uniform_blocks(rngs, L):
        for i in range(start, start + U.shape[1]):
            u = U[:, i - start, None]
            cdf = init_cdf[None, :-1] if i == 0 else trans_cdf[i - 1][cur][:, :-1]
            cur = (u >= cdf).sum(axis=1)
            code = (code * b + cur) % bn
            if i >= n - 1:
                hits[:, i - n + 1] = inA[code]
    first = np.zeros(C, dtype=np.int64)
    if k_first > 0:
        h = hits[:, 1 : k_first + 1]
        any_hit = h.any(axis=1)
        first = np.where(any_hit, h.argmax(axis=1) + 1, 0)
    counts = np.zeros((C, 0), dtype=np.int64)
    if groups is not None:
        counts = hits[:, : groups.shape[0]].astype(np.int64) @ groups.astype(np.int64)
    return first, counts


def scan_paths(sampler: PathSampler, A: CylinderSet, mc: MCConfig,
               groups: Optional[np.ndarray] = None, k_first: int = 0):
    """Run ``mc.N`` paths and summarise their visits to ``A``.

    ``groups[j, g]`` marks window offset ``j`` as belonging to count ``g``;
    returns ``(first, counts)`` where ``first`` is the first visit time in
    ``1..k_first`` (0 when there is none) and ``counts`` has shape ``(N, G)``.
    """
    n = A.depth
    J = sampler.L - n + 1
    if groups is not None and groups.shape[0] > J:
        raise ValidationError("path too short for the requested windows")
    if k_first >= J:
        raise ValidationError("path too short for the requested first-hit horizon")
    inA = A.indicator(sampler.b)
    tasks = [
        (sampler.init_cdf, sampler.trans_cdf, inA, n, groups, k_first, mc.seed, lo, min(lo + mc.chunk, mc.N))
        for lo in range(0, mc.N, mc.chunk)
    ]
    if mc.workers == 1 or len(tasks) == 1:
        parts = [_scan_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            parts = list(pool.map(_scan_chunk, tasks))
    first = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    return first, counts


def wilson_interval(k: int, n: int, level: float = 0.95):
    ci = sps.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


# --- exact checks ---------------------------------------------------------------


def check_K1_exact(tc: TimeChange, wc: WindowConstants, R: IntervalUnion) -> CheckEntry:
    """Expected number of points in ``R`` against ``Leb(R)``, bound ``2 r ε(A)``."""
    T = tc.T
    expected = float(sum(T[p + q] - T[p] for p, q in zip(wc.p, wc.q)))
    bound = 2 * len(R) * tc.max_step
    dev = abs(expected - R.leb)
    return CheckEntry(
        "K1_expected_count", expected, R.leb, bound, dev <= bound, "bound",
        details={"deviation": dev, "intervals": len(R), "eps_A": tc.max_step},
    )


def void_probability(sft, psi, omega, A: CylinderSet, windows: np.ndarray,
                     tol: float = DEFAULT_TOL) -> float:
    """Exact ``μ_ω(σ^j x ∉ A for every j in windows)`` (the absorption oracle)."""
    windows = np.asarray(windows, dtype=np.int64)
    if windows.size == 0:
        return 1.0
    cons = np.zeros((1, int(windows.max()) + 1), dtype=np.int8)
    cons[0, windows] = -1
    return float(window_event_measures(sft, psi, omega, A, cons, tol)[0])


def brute_delta(sft, psi, omega: float, A: CylinderSet, k: int, g: int = 0,
                tol: float = DEFAULT_TOL) -> float:
    """``sup_I |μ(A ∩ F(I)) - μ(A) μ(F(I))|`` over all ``I ⊆ {g+1, ..., k}``."""
    if k > BRUTE_DELTA_MAX_K:
        raise ValidationError(f"brute-force Δ is capped at k <= {BRUTE_DELTA_MAX_K}")
    if g >= k or k < 1:
        return 0.0
    idx = np.arange(g + 1, k + 1)
    subsets = np.array(list(itertools.product((0, 1), repeat=len(idx))), dtype=bool)
    S = len(subsets)
    cons = np.zeros((2 * S + 1, k + 1), dtype=np.int8)
    cons[:S, 0] = 1
    cons[:S, idx] = np.where(subsets, -1, 0)
    cons[S : 2 * S, idx] = np.where(subsets, -1, 0)
    cons[2 * S, 0] = 1
    val = window_event_measures(sft, psi, omega, A, cons, tol)
    joint, free, muA = val[:S], val[S : 2 * S], val[2 * S]
    return float(np.max(np.abs(joint - muA * free)))


@dataclass(frozen=True)
class GHKTerms:
    G: float
    K: float
    H_bound: Optional[float]
    H_exact: Optional[float]
    T_k: float


def _short_hit_terms(sft, psi, point, A, g, tol):
    """``(μ(A ∩ {τ <= g}), μ(A), μ(τ <= g))`` at one fibre."""
    cons = np.zeros((3, g + 1), dtype=np.int8)
    cons[0, 0] = 1
    cons[1, 0] = 1
    cons[1, 1:] = -1
    cons[2, 1:] = -1
    muA, muA_avoid, avoid = window_event_measures(sft, psi, point, A, cons, tol)
    return muA - muA_avoid, muA, 1.0 - avoid


def ghk_terms(sft, psi, omega: float, A: CylinderSet, k: int, g: int,
              phi: Optional[np.ndarray] = None, exact_H: bool = False,
              tol: float = DEFAULT_TOL) -> GHKTerms:
    """G and K exactly; H as ``φ̂(max(g - n, 0)) T^k`` and optionally by brute force."""
    if g < 0 or k < 1:
        raise ValidationError("need k >= 1 and g >= 0")
    G = K = Tk = 0.0
    H_ex = 0.0 if exact_H else None
    for i in range(1, k + 1):
        point = float(sft.base.shift(omega, i))
        if g > 0:
            a_short, muA, short = _short_hit_terms(sft, psi, point, A, g, tol)
            G += a_short
            K += muA * short
        else:
            muA = cylinder_measure_set(sft, psi, point, A, tol)
        Tk += muA
        if exact_H:
            H_ex += brute_delta(sft, psi, point, A, k - i, g, tol)
    H_b = None
    if phi is not None:
        h = max(g - A.depth, 0)
        H_b = float(phi[h]) * Tk if h < len(phi) else None
    return GHKTerms(float(G), float(K), H_b, H_ex, float(Tk))


def cylinder_measure_set(sft, psi, omega, A: CylinderSet, tol=DEFAULT_TOL) -> float:
    return float(window_event_measures(sft, psi, omega, A, np.ones((1, 1), dtype=np.int8), tol)[0])


def delta_decomposition_check(sft, psi, omega, A, k, g, tol=DEFAULT_TOL) -> CheckEntry:
    """``Σ_{i<=k} Δ_{θ^i ω}(A, k - i) <= G + H + K`` with every term exact."""
    lhs = sum(brute_delta(sft, psi, float(sft.base.shift(omega, i)), A, k - i, 0, tol)
              for i in range(1, k + 1))
    t = ghk_terms(sft, psi, omega, A, k, g, exact_H=True, tol=tol)
    rhs = t.G + t.H_exact + t.K
    slack = 10 * tol
    return CheckEntry(
        f"delta_decomposition_k{k}_g{g}", lhs, rhs, slack, lhs <= rhs + slack, "bound",
        details={"G": t.G, "H": t.H_exact, "K": t.K},
    )


def short_hit_check(sft, psi, tc: TimeChange, R: IntervalUnion, g: int,
                    tol=DEFAULT_TOL) -> CheckEntry:
    """``K_{A,k*,g} <= g ε(A) sup R``."""
    wc = window_constants(tc, R)
    t = ghk_terms(sft, psi, tc.omega, tc.A, wc.k_star, g, tol=tol)
    bound = g * tc.max_step * R.sup
    return CheckEntry(
        f"short_hit_K_g{g}", t.K, bound, 0.0, t.K <= bound * (1 + 1e-12) + 1e-15, "bound",
        details={"k_star": wc.k_star, "eps_A": tc.max_step},
    )


def void_product_check(sft, psi, tc: TimeChange, R: IntervalUnion,
                       tol=DEFAULT_TOL) -> CheckEntry:
    """``|P(N(R) = 0) - Π(1 - μ_{θ^j ω}(A))| <= Σ_j Δ_{θ^j ω}(A, k* - j)``, all exact."""
    wc = window_constants(tc, R)
    if wc.k_star > BRUTE_DELTA_MAX_K:
        raise ValidationError(f"k* = {wc.k_star} too large for the exact check")
    js = wc.all_windows()
    void = void_probability(sft, psi, tc.omega, tc.A, js, tol)
    prod = float(np.prod(1.0 - tc.masses[js - 1]))
    rhs = sum(brute_delta(sft, psi, float(sft.base.shift(tc.omega, int(j))), tc.A, wc.k_star - int(j), 0, tol)
              for j in js)
    lhs = abs(void - prod)
    slack = 10 * tol
    return CheckEntry(
        "void_product_telescoping", lhs, rhs, slack, lhs <= rhs + slack, "bound",
        details={"void": void, "product": prod, "k_star": wc.k_star},
    )


def product_inequality_check(xs, eps: float) -> bool:
    """``exp(-(1+2ε)Σx) <= Π(1 - x_i) <= exp(-(1-2ε)Σx)`` for ``x_i ∈ [0, ε]``, ``ε <= 1/2``."""
    xs = np.asarray(xs, dtype=float)
    if not (0 <= eps <= 0.5) or np.any(xs < 0) or np.any(xs > eps):
        raise ValidationError("need 0 <= x_i <= eps <= 1/2")
    s = math.fsum(xs)
    log_prod = math.fsum(np.log1p(-xs))
    slack = 1e-12 * (1 + s)
    return (-(1 + 2 * eps) * s <= log_prod + slack) and (log_prod <= -(1 - 2 * eps) * s + slack)


# --- Monte-Carlo limit laws ----------------------------------------------------


@dataclass
class CountSimulation:
    tc: TimeChange
    R: IntervalUnion
    windows: np.ndarray  # (2, W): window offsets and interval index
    counts: np.ndarray  # (N, len(R))


def simulate_counts(sft, psi, omega, A: CylinderSet, R: IntervalUnion, mc: MCConfig,
                    tol: float = DEFAULT_TOL) -> CountSimulation:
    tc = time_change_covering(sft, psi, omega, A, R.sup, tol)
    hw = hit_windows(tc, R)
    J = int(hw[0].max()) + 1 if hw.shape[1] else 1
    groups = np.zeros((J, len(R)), dtype=bool)
    groups[hw[0], hw[1]] = True
    sampler = PathSampler(sft, psi, omega, J + A.depth - 1, tol)
    _, counts = scan_paths(sampler, A, mc, groups=groups)
    return CountSimulation(tc, R, hw, counts)


def mc_zero_probability(sft, psi, omega, A: CylinderSet, R: IntervalUnion, mc: MCConfig,
                        tol: float = DEFAULT_TOL, sim: Optional[CountSimulation] = None) -> CheckEntry:
    """``P̂(N(R) = 0)`` with a Wilson interval, against ``e^{-Leb R}`` and the exact oracle."""
    sim = simulate_counts(sft, psi, omega, A, R, mc, tol) if sim is None else sim
    zero = int(np.sum(sim.counts.sum(axis=1) == 0))
    est = zero / mc.N
    lo, hi = wilson_interval(zero, mc.N)
    oracle = void_probability(sft, psi, omega, A, sim.windows[0], tol)
    target = math.exp(-R.leb)
    abs_tol = mc.tol("void_abs", 0.02)
    ok = abs(est - target) <= abs_tol and lo <= oracle <= hi
    return CheckEntry(
        "K2_void_probability", est, target, abs_tol, ok, "limit",
        note="estimate must be within tolerance of the limit and its 95% Wilson CI must contain the exact value",
        details={"wilson_ci": [lo, hi], "exact_finite_n": oracle, "N": mc.N},
    )


def exp_law_error(sft, psi, omega, y: Sequence[int], n: int, mc: MCConfig, t_max: float = 5.0,
                  tol: float = DEFAULT_TOL) -> CheckEntry:
    """``sup_k |P̂(τ > k) - exp(-T^k)|`` over ``k`` up to the first ``T^k >= t_max``."""
    word = tuple(y[:n])
    if len(word) < n:
        raise ValidationError("word shorter than n")
    A = CylinderSet.single(word)
    tc = time_change_covering(sft, psi, omega, A, t_max, tol)
    k_max = int(np.searchsorted(tc.T, t_max, side="left"))
    sampler = PathSampler(sft, psi, omega, k_max + n, tol)
    first, _ = scan_paths(sampler, A, mc, k_first=k_max)
    tau = np.where(first == 0, k_max + 1, first)
    hist = np.bincount(tau, minlength=k_max + 2)
    surv = 1.0 - np.cumsum(hist[: k_max + 1]) / mc.N
    target = np.exp(-tc.T[: k_max + 1])
    dist = float(np.max(np.abs(surv - target)))
    exact = hitting_survival(sft, psi, omega, A, k_max, tol)
    exact_dist = float(np.max(np.abs(exact - target)))
    ks_band = float(sps.kstwo.ppf(0.95, mc.N))
    return CheckEntry(
        f"exp_law_n{n}", dist, 0.0, ks_band, True, "limit",
        note="sup-distance of the empirical survival to exp(-T^k); verdict set by the caller",
        details={"exact_distance": exact_dist, "k_max": k_max, "q_n": min_return_q(word),
                 "mc_noise_band_95": ks_band, "N": mc.N},
    )


def sample_uniform_ppp(horizon: float, rng: np.random.Generator) -> PointProcessRealization:
    """Unit-rate Poisson process on ``(0, horizon]`` from cumulative ``-ln U`` gaps."""
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    times = []
    t = 0.0
    batch = max(16, int(2 * horizon) + 16)
    while True:
        gaps = -np.log1p(-rng.random(batch))  # 1 - U avoids log(0)
        cum = t + np.cumsum(gaps)
        inside = cum[cum <= horizon]
        times.append(inside)
        if inside.size < batch:
            break
        t = float(cum[-1])
    return PointProcessRealization(np.concatenate(times))


def _merge_bins(obs, exp_, min_expected=5.0):
    """Merge adjacent bins from the right until every expected count is at least 5."""
    obs, exp_ = list(obs), list(exp_)
    merged = False
    while len(exp_) > 1 and exp_[-1] < min_expected:
        o, e = obs.pop(), exp_.pop()
        obs[-1] += o
        exp_[-1] += e
        merged = True
    while len(exp_) > 1 and exp_[0] < min_expected:
        o, e = obs.pop(0), exp_.pop(0)
        obs[0] += o
        exp_[0] += e
        merged = True
    return np.array(obs, dtype=float), np.array(exp_, dtype=float), merged


def poisson_count_test(counts: np.ndarray, mean: float):
    """χ² goodness of fit of integer counts to ``Poisson(mean)``; returns ``(p, dof, merged)``."""
    counts = np.asarray(counts, dtype=np.int64)
    N = counts.size
    top = max(int(counts.max()), int(sps.poisson.ppf(1 - 1e-9, mean)))
    obs = np.bincount(counts, minlength=top + 2)[: top + 1].astype(float)
    obs[-1] += np.sum(counts > top)
    pmf = sps.poisson.pmf(np.arange(top + 1), mean)
    pmf[-1] += sps.poisson.sf(top, mean)
    o, e, merged = _merge_bins(obs, N * pmf)
    if len(o) < 2:
        return 1.0, 0, merged
    stat = float(np.sum((o - e) ** 2 / e))
    dof = len(o) - 1
    return float(sps.chi2.sf(stat, dof)), dof, merged


def _cap_categories(x, min_count):
    """Largest cap ``c`` such that every category of ``min(x, c)`` has ``min_count`` samples."""
    for cap in range(int(x.max()), 0, -1):
        if np.bincount(np.minimum(x, cap), minlength=cap + 1).min() >= min_count:
            return cap
    return 0


def independence_test(a: np.ndarray, b: np.ndarray):
    """Contingency χ² between two count vectors.

    Each variable is capped so that all its categories hold at least
    ``sqrt(5 N)`` samples, which makes every expected cell at least 5.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    min_count = math.sqrt(5 * a.size)
    cap_a, cap_b = _cap_categories(a, min_count), _cap_categories(b, min_count)
    if cap_a == 0 or cap_b == 0:
        return 1.0, 0
    table = np.zeros((cap_a + 1, cap_b + 1))
    np.add.at(table, (np.minimum(a, cap_a), np.minimum(b, cap_b)), 1)
    res = sps.chi2_contingency(table, correction=False)
    return float(res.pvalue), int(res.dof)


def dispersion_ratio(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    m = counts.mean()
    return float(counts.var(ddof=1) / m) if m > 0 else float("nan")


def poisson_gof(realizations, R: IntervalUnion, alpha: float = 0.01,
                dispersion_band: float = 0.1, min_samples: int = 1000) -> list:
    """Per-interval Poisson fits, pairwise independence and dispersion of counts in ``R``.

    ``realizations`` is a list of :class:`PointProcessRealization` or an
    ``(N, len(R))`` count array.
    """
    if isinstance(realizations, np.ndarray):
        counts = np.asarray(realizations)
    else:
        counts = np.array([counts_in(r, R) for r in realizations])
    if counts.ndim != 2 or counts.shape[1] != len(R):
        raise ValidationError("counts must have one column per interval")
    if counts.shape[0] < min_samples:
        raise ValidationError(f"need at least {min_samples} realizations, got {counts.shape[0]}")
    out = []
    for i, (lo, hi) in enumerate(R):
        p, dof, merged = poisson_count_test(counts[:, i], hi - lo)
        out.append(CheckEntry(
            f"poisson_fit_({lo:g},{hi:g})", p, alpha, alpha, p > alpha, "limit",
            note="bins merged to reach expected count 5" if merged else "",
            details={"dof": dof, "mean": float(counts[:, i].mean())},
        ))
        d = dispersion_ratio(counts[:, i])
        out.append(CheckEntry(
            f"dispersion_({lo:g},{hi:g})", d, 1.0, dispersion_band,
            bool(abs(d - 1.0) <= dispersion_band), "limit",
        ))
    for i, j in itertools.combinations(range(len(R)), 2):
        p, dof = independence_test(counts[:, i], counts[:, j])
        out.append(CheckEntry(
            f"independence_{i}_{j}", p, alpha, alpha, p > alpha, "limit", details={"dof": dof},
        ))
    return out


# --- hypothesis estimators --------------------------------------------------------


@dataclass(frozen=True)
class PhiEstimate:
    gaps: np.ndarray
    phi: np.ndarray
    slope: float
    r_squared: float

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.phi) <= 1e-13))


def estimate_phi(sft, psi, omega, n: int, m: int, gaps: Sequence[int],
                 tol: float = DEFAULT_TOL) -> PhiEstimate:
    """``φ̂(g) = max |μ(A ∩ σ^{-g-n} B) - μ(A) μ_{θ^{n+g}ω}(B)| / μ(A)`` over single-word A, B.

    ``omega`` may be an array of base points; the maximum is then taken over them too.
    """
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    gaps = np.asarray(list(gaps), dtype=int)
    phi = np.zeros(len(gaps))
    for w in omegas:
        for t, g in enumerate(gaps):
            J, head, tail = pair_cylinder_measures(sft, psi, float(w), n, m, int(g), tol)
            keep = head > SKIP_DENOMINATOR
            if keep.any():
                dev = np.abs(J[keep] - head[keep, None] * tail[None, :]) / head[keep, None]
                phi[t] = max(phi[t], float(dev.max()))
    slope, r2 = loglinear_fit(gaps, phi)
    return PhiEstimate(gaps, phi, slope, r2)


@dataclass(frozen=True)
class BetaEstimate:
    j: np.ndarray
    beta0: np.ndarray
    n: np.ndarray
    beta1: np.ndarray
    rate0: float
    rate1: float
    skipped: int
    unsupported: tuple = ()


def _return_ratios(sft, psi, omega, y, n, tol):
    """``μ_ω(C_n(y) ∩ σ^{-j} C_n(y)) / μ_ω(C_n(y))`` for ``j = 1..2n`` (None if denominator vanishes)."""
    A = CylinderSet.single(tuple(y[:n]))
    cons = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.int8)
    cons[:, 0] = 1
    for j in range(1, 2 * n + 1):
        cons[j, j] = 1
    val = window_event_measures(sft, psi, omega, A, cons, tol)
    if val[0] < SKIP_DENOMINATOR:
        return None
    return val[1:] / val[0]


def estimate_beta(sft, psi, grid, y: Sequence[int], n_range: Sequence[int],
                  tol: float = DEFAULT_TOL) -> BetaEstimate:
    """Cylinder-return estimates: β̂₀(j) over ``j <= n`` and β̂₁(n) over ``n < j <= 2n``."""
    nodes = getattr(grid, "nodes", grid)
    n_range = sorted(int(n) for n in n_range)
    nmax = n_range[-1]
    beta0 = np.zeros(nmax + 1)
    beta1 = np.zeros(len(n_range))
    skipped = 0
    supported = np.zeros(len(n_range), dtype=bool)
    for t, n in enumerate(n_range):
        for w in nodes:
            r = _return_ratios(sft, psi, float(w), y, n, tol)
            if r is None:
                skipped += 1
                continue
            supported[t] = True
            beta0[1 : n + 1] = np.maximum(beta0[1 : n + 1], r[:n])
            beta1[t] = max(beta1[t], float(r[n:].max()))
    js = np.arange(1, nmax + 1)
    rate0, _ = loglinear_fit(js, beta0[1:])
    ns = np.asarray(n_range)
    rate1, _ = loglinear_fit(ns[supported], beta1[supported])
    unsupported = tuple(int(n) for n, s in zip(n_range, supported) if not s)
    return BetaEstimate(js, beta0[1:], ns, beta1, rate0, rate1, skipped, unsupported)


# --- engine and oracle checks --------------------------------------------------


def engine_checks(sft, psi, omega: float, n_max: int = 8, tol: float = DEFAULT_TOL,
                  scale: float = 1.0, label: str = "") -> list:
    """Normalisation, additivity and equivariance of the cylinder measures for ``n <= n_max``.

    ``scale`` multiplies the tables at ``omega`` before checking; it exists
    only as a fault-injection hook for negative controls.
    """
    b = sft.b
    shifted = float(sft.base.shift(omega, 1))
    tables = [None] + [scale * all_cylinder_measures(sft, psi, omega, n, tol)[0] for n in range(1, n_max + 2)]
    norm = max(abs(float(tables[n].sum()) - 1.0) for n in range(1, n_max + 1))
    add = max(float(np.max(np.abs(tables[n + 1].reshape(-1, b).sum(axis=1) - tables[n])))
              for n in range(1, n_max + 1))
    equi = 0.0
    for n in range(1, n_max + 1):
        nxt = all_cylinder_measures(sft, psi, shifted, n, tol)[0]
        equi = max(equi, float(np.max(np.abs(tables[n + 1].reshape(b, -1).sum(axis=0) - nxt))))
    sfx = f"_{label}" if label else ""
    return [
        CheckEntry(f"normalization{sfx}", norm, 0.0, 1e-10, norm <= 1e-10, "oracle", details={"n_max": n_max}),
        CheckEntry(f"additivity{sfx}", add, 0.0, 1e-10, add <= 1e-10, "oracle", details={"n_max": n_max}),
        CheckEntry(f"equivariance{sfx}", equi, 0.0, max(1e-8, 10 * tol), equi <= max(1e-8, 10 * tol), "oracle",
                   details={"n_max": n_max}),
    ]


def oracle_exactness(sft, psi, exact, omegas, n_max: int, atol: float, name: str,
                     tol: float = DEFAULT_TOL) -> CheckEntry:
    """Largest deviation of every n-cylinder measure (n <= n_max) from a closed form."""
    b = sft.b
    dev = 0.0
    for n in range(1, n_max + 1):
        got = all_cylinder_measures(sft, psi, omegas, n, tol)
        codes = np.arange(b**n)
        digits = (codes[:, None] // b ** np.arange(n - 1, -1, -1)) % b + 1
        want = np.array([exact(w) for w in digits])
        dev = max(dev, float(np.max(np.abs(got - want[None, :]))))
    return CheckEntry(name, dev, 0.0, atol, dev <= atol, "oracle", details={"n_max": n_max})


def product_inequality_trials(draws: int, rng: np.random.Generator) -> CheckEntry:
    """Random ``(ε, xs)`` draws; counts violations of the two-sided product bound."""
    bad = 0
    for _ in range(draws):
        eps = 0.5 * rng.random()
        xs = eps * rng.random(int(rng.integers(0, 50)))
        if not product_inequality_check(xs, eps):
            bad += 1
    return CheckEntry("product_inequality", bad, 0, 0, bad == 0, "bound", details={"draws": draws})
