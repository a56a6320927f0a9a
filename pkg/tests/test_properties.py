"""Property tests for the structural invariants of each module."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from quenched_sft.base import BaseRotation, IntervalPartition, orbit, quadrature_grid, refine
from quenched_sft.gibbs import PotentialSpec, all_cylinder_measures
from quenched_sft.process import IntervalUnion, PointProcessRealization, TimeChange, counts_in, window_constants
from quenched_sft.scenario import build_example5, swap_word
from quenched_sft.sft import RandomSFT, admissible_words, aperiodicity_constant, count_admissible, min_return_q
from quenched_sft.stats import product_inequality_check, wilson_interval

R0 = math.sqrt(2) - 1
EX5 = build_example5()
omegas = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
# cell membership within an ulp of a breakpoint depends on rounding
def off_breaks(points, breaks, tol=1e-9):
    d = np.abs(np.subtract.outer(np.atleast_1d(points), np.append(breaks, 1.0)))
    return bool(np.all(d > tol))


rotations = st.sampled_from([R0, (math.sqrt(5) - 1) / 2, math.pi - 3, math.e - 2])


@st.composite
def partitions(draw, max_cuts=4):
    cuts = draw(st.lists(st.floats(0.01, 0.99), max_size=max_cuts, unique=True))
    pts = sorted({0.0, *[round(c, 6) for c in cuts]})
    return IntervalPartition(tuple(pts))


@st.composite
def random_sfts(draw, b=None):
    b = b or draw(st.integers(2, 3))
    part = draw(partitions(max_cuts=2))
    mats = []
    for _ in range(len(part)):
        m = np.array(draw(st.lists(st.integers(0, 1), min_size=b * b, max_size=b * b))).reshape(b, b)
        m[np.arange(b), np.arange(b)] = 1  # keeps rows and columns nonzero
        mats.append(m)
    return RandomSFT(BaseRotation(draw(rotations)), b, part, np.array(mats, dtype=np.int8))


@given(rotations, omegas, st.integers(1, 2000))
def test_orbit_steps(r, w, k):
    pts = orbit(BaseRotation(r), w, k)
    d = np.mod(np.diff(pts) - r, 1.0)
    assert np.all(np.minimum(d, 1 - d) < 1e-12)
    assert np.all((pts >= 0) & (pts < 1))


@given(partitions(), rotations, st.integers(0, 6))
def test_refine_idempotent_and_labels(P, r, k):
    base = BaseRotation(r)
    Q = refine(P, base, k)
    assert refine(Q, base, min(k, 1)) == Q
    for lo, hi in Q.cells():
        if hi - lo < 1e-8 or k == 0:
            continue
        a = P.cell_index(orbit(base, lo + 1e-9, k - 1))
        b = P.cell_index(orbit(base, hi - 1e-9, k - 1))
        assert np.array_equal(a, b)


@given(partitions(), st.integers(1, 6))
def test_quadrature_weights(P, ppc):
    g = quadrature_grid(P, ppc)
    assert math.fsum(g.weights) == 1.0
    assert np.all(np.diff(g.nodes) > 0)


@settings(max_examples=40, deadline=None)
@given(random_sfts(), omegas, st.integers(1, 6))
def test_count_equals_enumeration(sft, w, n):
    assert len(admissible_words(sft, w, n)) == count_admissible(sft, w, n)


@settings(max_examples=25, deadline=None)
@given(random_sfts())
def test_aperiodicity_minimal(sft):
    M = aperiodicity_constant(sft, 6)
    assume(M is not None and M > 1)
    reps = refine(sft.partition, sft.base, M - 1).midpoints()

    def positive(w, m):
        p = np.eye(sft.b, dtype=np.int64)
        for q in sft.matrices_along(w, m):
            p = np.minimum(p @ q, 1)
        return p.all()

    assert not all(positive(w, M - 1) for w in reps)
    assert all(positive(w, M) for w in refine(sft.partition, sft.base, M).midpoints())


@given(st.lists(st.integers(1, 3), min_size=1, max_size=20))
def test_q_monotone_under_extension(w):
    qs = [min_return_q(w[:n]) for n in range(1, len(w) + 1)]
    assert all(a <= b for a, b in zip(qs, qs[1:]))
    assert all(1 <= q <= n for n, q in enumerate(qs, 1))


@st.composite
def potentials(draw):
    part = draw(partitions(max_cuts=2))
    vals = draw(st.lists(st.floats(-1.5, 1.5), min_size=9 * len(part), max_size=9 * len(part)))
    return PotentialSpec(part, np.array(vals).reshape(len(part), 3, 3))


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(potentials(), omegas, st.integers(1, 4))
def test_engine_invariants(psi, w, n):
    sft = EX5.sft
    b = 3
    breaks = np.union1d(sft.partition.array, psi.partition.array)
    assume(off_breaks([w, float(sft.base.shift(w, 1))], breaks))
    t_n = all_cylinder_measures(sft, psi, w, n)[0]
    t_next = all_cylinder_measures(sft, psi, w, n + 1)[0]
    shifted = all_cylinder_measures(sft, psi, float(sft.base.shift(w, 1)), n)[0]
    assert np.all(t_n >= 0)
    assert abs(t_n.sum() - 1) < 1e-10
    assert np.max(np.abs(t_next.reshape(-1, b).sum(axis=1) - t_n)) < 1e-10
    assert np.max(np.abs(t_next.reshape(b, -1).sum(axis=0) - shifted)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(omegas, st.integers(1, 4))
def test_symmetry_identity(w, n):
    assume(off_breaks([w, (w + 0.5) % 1.0], EX5.sft.partition.array))
    here = all_cylinder_measures(EX5.sft, EX5.psi, w, n)[0]
    there = all_cylinder_measures(EX5.sft, EX5.psi, (w + 0.5) % 1.0, n)[0]
    codes = np.arange(3**n)
    digits = (codes[:, None] // 3 ** np.arange(n - 1, -1, -1)) % 3 + 1
    for c, d in zip(codes, digits):
        s = swap_word(tuple(d))
        sc = sum((v - 1) * 3 ** (n - 1 - i) for i, v in enumerate(s))
        assert abs(here[c] - there[sc]) < 1e-6


@given(st.lists(st.integers(1, 3), max_size=8))
def test_swap_involution(w):
    assert swap_word(swap_word(tuple(w))) == tuple(w)


@st.composite
def unions(draw):
    edges = sorted(draw(st.lists(st.floats(0, 10), min_size=2, max_size=8, unique=True)))
    if len(edges) % 2:
        edges = edges[:-1]
    return IntervalUnion(tuple(zip(edges[::2], edges[1::2])))


@given(unions(), st.lists(st.floats(0, 11), max_size=30))
def test_counts_in_brute_force(R, times):
    re = PointProcessRealization(sorted(times))
    want = [sum(lo < t < hi for t in times) for lo, hi in R]
    assert list(counts_in(re, R)) == want
    assert R.leb == sum(hi - lo for lo, hi in R)


@given(unions(), st.lists(st.floats(1e-3, 0.5), min_size=1, max_size=50))
def test_window_sandwich(R, steps):
    m = np.array(steps * (int(12 / sum(steps)) + 2))
    tc = TimeChange(0.0, None, m)
    wc = window_constants(tc, R)
    T = tc.T
    for i, (lo, hi) in enumerate(R):
        p, q = wc.p[i], wc.q[i]
        assert T[p] <= lo < T[p + 1] or (p == 0 and lo < T[1])
        assert T[p + q] <= hi < T[p + q + 1]
    assert wc.k_star == max(p + q for p, q in zip(wc.p, wc.q))


@given(st.floats(1e-6, 0.5), st.data())
def test_product_inequality(eps, data):
    xs = data.draw(st.lists(st.floats(0, 1), max_size=60))
    assert product_inequality_check([eps * x for x in xs], eps)


@given(st.integers(1, 5000), st.data())
def test_wilson_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1
