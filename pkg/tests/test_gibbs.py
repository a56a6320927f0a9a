import math

import numpy as np
import pytest
from scipy import stats as sps

from conftest import MARKOV_WEIGHTS, words_of
from quenched_sft.base import IntervalPartition, orbit, quadrature_grid, refine
from quenched_sft.errors import NonConvergenceError, ValidationError
from quenched_sft.gibbs import (
    PathSampler,
    PotentialSpec,
    all_cylinder_measures,
    birkhoff_weight,
    burnin_gaps,
    cylinder_measure,
    cylinder_measures,
    distortion_constant,
    epsilon_decay,
    hitting_survival,
    marginal_cylinder_measure,
    measure_table,
    orbit_masses,
    pair_cylinder_measures,
    sample_path,
    window_event_measures,
)
from quenched_sft.scenario import tilt_potential
from quenched_sft.sft import CylinderSet, is_admissible


def test_birkhoff_weight_examples(ex5, ex5_tilt):
    assert birkhoff_weight(ex5.sft, ex5.psi, 0.1, (1, 2, 3)) == 1.0
    psi = ex5_tilt.psi
    pv = psi.values[psi.partition.cell_index(np.array([0.1]))][0]
    assert birkhoff_weight(ex5.sft, psi, 0.1, (1, 2)) == pytest.approx(math.exp(pv[0, 1]))
    c = PotentialSpec.constant(np.full((3, 3), 0.7))
    assert birkhoff_weight(ex5.sft, c, 0.1, (1, 1, 2, 2)) == pytest.approx(math.exp(2.1))
    with pytest.raises(ValidationError):
        birkhoff_weight(ex5.sft, c, 0.8, (1, 2))


def test_bernoulli_closed_form(bern):
    for n in range(1, 9):
        got = all_cylinder_measures(bern.sft, bern.psi, [0.0, 0.37, 0.9], n)
        assert np.max(np.abs(got - 3.0**-n)) <= 1e-12


def _markov_by_hand(w):
    # stationary chain of weights M: P = D^-1 M D / lam with right eigenvector D
    M = np.array(MARKOV_WEIGHTS)
    lam = (2.5 + math.sqrt(2.5**2 - 4 * (1.5 - 1.0))) / 2
    h = np.array([2.0, lam - 1.0])  # M h = lam h
    P = M * h[None, :] / (lam * h[:, None])
    vals, vecs = np.linalg.eig(P.T)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    pi = pi / pi.sum()
    p = pi[w[0] - 1]
    for a, c in zip(w[:-1], w[1:]):
        p *= P[a - 1, c - 1]
    return p


def test_markov_closed_form(markov):
    for n in range(1, 9):
        got = all_cylinder_measures(markov.sft, markov.psi, [0.2, 0.7], n)
        want = np.array([_markov_by_hand(w) for w in words_of(n, 2)])
        assert np.max(np.abs(got - want[None])) <= 1e-8
        assert np.max(np.abs(got - np.array([markov.exact(w) for w in words_of(n, 2)]))) <= 1e-12


def _brute_finite_volume(sc, omega, word, m):
    """Two-sided finite volume by full enumeration of words on [-m, n + m)."""
    n = len(word)
    L = n + 2 * m
    start = float(sc.sft.base.shift(omega, -m))
    W = words_of(L, sc.b) - 1
    pts = orbit(sc.sft.base, start, L - 1)
    mats = sc.sft.matrices_along(start, L - 1)
    psi = sc.psi.values[sc.psi.partition.cell_index(pts)]
    ok = np.ones(len(W), dtype=bool)
    logw = np.zeros(len(W))
    for i in range(L - 1):
        ok &= mats[i, W[:, i], W[:, i + 1]] == 1
        logw += psi[i, W[:, i], W[:, i + 1]]
    wt = np.where(ok, np.exp(logw), 0.0)
    sel = np.all(W[:, m : m + n] == np.asarray(word) - 1, axis=1)
    return wt[sel].sum() / wt.sum()


@pytest.mark.parametrize("fixture", ["ex5", "ex5_tilt"])
def test_engine_against_brute_force_volumes(fixture, request):
    sc = request.getfixturevalue(fixture)
    for omega, word in ((0.1, (1, 2)), (0.6, (2, 3)), (0.3, (3, 3))):
        exact = cylinder_measure(sc.sft, sc.psi, omega, word)
        errs = [abs(_brute_finite_volume(sc, omega, word, m) - exact) for m in (2, 4, 5)]
        assert errs[-1] < 0.01
        assert errs[-1] <= errs[0] + 1e-12


def test_support_of_pair_word(ex5_tilt):
    sc = ex5_tilt
    grid = quadrature_grid(refine(sc.sft.partition, sc.sft.base, 2), 5).nodes
    vals = cylinder_measures(sc.sft, sc.psi, grid, (1, 2))
    inside = (grid > 1e-9) & (grid < 0.75)
    assert np.all(vals[~inside] == 0)
    assert np.all(vals[inside] > 0)


def test_measure_table(bern, ex5):
    t = measure_table(bern.sft, bern.psi, 0.3, 2)
    assert len(t) == 9
    np.testing.assert_allclose(t.probs, 1 / 9, atol=1e-14)
    for omega in (0.1, 0.3, 0.8):
        t3 = measure_table(ex5.sft, ex5.psi, omega, 3)
        t4 = measure_table(ex5.sft, ex5.psi, omega, 4)
        assert abs(t3.total() - 1) < 1e-10
        assert t3.max_additivity_gap(t4) < 1e-10
        assert all(is_admissible(ex5.sft, omega, w) for w in t3.words)


def test_inadmissible_is_exact_zero(ex5):
    assert cylinder_measure(ex5.sft, ex5.psi, 0.8, (1, 2)) == 0.0


def test_equivariance_explicit(ex5_tilt):
    sc = ex5_tilt
    omega = 0.1
    nxt = float(sc.sft.base.shift(omega, 1))
    for w in ((1, 2), (2, 3, 3), (3, 2, 1, 1)):
        lhs = cylinder_measure(sc.sft, sc.psi, nxt, w)
        rhs = sum(cylinder_measure(sc.sft, sc.psi, omega, (a,) + w) for a in (1, 2, 3))
        assert abs(lhs - rhs) < 1e-10


def test_burnin_gaps_contract(ex5_tilt):
    gaps = burnin_gaps(ex5_tilt.sft, ex5_tilt.psi, 0.1, (1, 2), m_values=(32, 64, 128, 256))
    nz = gaps[gaps > 1e-15]
    assert np.all(nz[1:] / nz[:-1] < 0.9)


def test_nonconvergence_reported(ex5_tilt, monkeypatch):
    import quenched_sft.gibbs as gibbs

    monkeypatch.setattr(gibbs, "M_MAX", 16)
    with pytest.raises(NonConvergenceError) as exc:
        cylinder_measure(ex5_tilt.sft, ex5_tilt.psi, 0.1, (1, 2), tol=1e-15)
    assert exc.value.gap > 1e-15 and exc.value.m == 16


def test_sampler_bernoulli_uniform(bern):
    sampler = PathSampler(bern.sft, bern.psi, 0.2, 2)
    rng = np.random.default_rng(1)
    x = sampler.sample_uniforms(rng.random((100_000, 2)))
    codes = (x[:, 0] - 1) * 3 + (x[:, 1] - 1)
    assert sps.chisquare(np.bincount(codes, minlength=9)).pvalue > 0.001


def test_sampler_matches_table(ex5_tilt):
    sc = ex5_tilt
    omega = 0.35
    sampler = PathSampler(sc.sft, sc.psi, omega, 3)
    x = sampler.sample_uniforms(np.random.default_rng(2).random((100_000, 3)))
    codes = ((x[:, 0] - 1) * 3 + (x[:, 1] - 1)) * 3 + (x[:, 2] - 1)
    freq = np.bincount(codes, minlength=27) / len(x)
    p = all_cylinder_measures(sc.sft, sc.psi, omega, 3)[0]
    se = np.sqrt(p * (1 - p) / len(x))
    assert np.all(np.abs(freq - p) <= 4 * se + 1e-12)
    assert np.all(freq[p == 0] == 0)


def test_sample_path_admissible(ex5):
    x = sample_path(ex5.sft, ex5.psi, 0.8, 200, rng=np.random.default_rng(3))
    assert is_admissible(ex5.sft, 0.8, x)


def test_marginal_measure(bern, ex5):
    g = quadrature_grid(refine(ex5.sft.partition, ex5.sft.base, 4), 2)
    assert marginal_cylinder_measure(bern.sft, bern.psi, (1, 2, 3), g) == pytest.approx(3.0**-3, abs=1e-13)
    total = sum(marginal_cylinder_measure(ex5.sft, ex5.psi, (a,), g) for a in (1, 2, 3))
    assert abs(total - 1) < 1e-10
    mu = marginal_cylinder_measure(ex5.sft, ex5.psi, (1, 2), g)
    top = cylinder_measures(ex5.sft, ex5.psi, g.nodes, (1, 2)).max()
    assert 0 < mu <= 0.75 * top


def test_epsilon_decay(bern, ex5):
    g = quadrature_grid(refine(ex5.sft.partition, ex5.sft.base, 4), 2)
    eps, slope, r2 = epsilon_decay(bern.sft, bern.psi, range(1, 7), g)
    np.testing.assert_allclose(eps, 3.0 ** -np.arange(1, 7), rtol=1e-12)
    assert slope == pytest.approx(-math.log(3))
    eps, slope, r2 = epsilon_decay(ex5.sft, ex5.psi, range(2, 9), g)
    assert slope < 0 and np.all(np.diff(eps) <= 1e-15)


def test_distortion(bern, markov, ex5):
    assert distortion_constant(bern.sft, bern.psi, 0.1, 2, 3) == pytest.approx(1.0, abs=1e-12)
    # stationary chain: mu(uv)/(mu(u) mu(v)) = P[u_last, v_0] / pi[v_0]
    pi = np.array([markov.exact((1,)), markov.exact((2,))])
    P = np.array([[markov.exact((a, c)) / pi[a - 1] for c in (1, 2)] for a in (1, 2)])
    ratio = P / pi[None, :]
    want = float(np.max(np.maximum(ratio, 1 / ratio)))
    assert distortion_constant(markov.sft, markov.psi, 0.1, 2, 2) == pytest.approx(want, rel=1e-9)
    cs = [distortion_constant(ex5.sft, ex5.psi, 0.1, n, n) for n in range(1, 5)]
    assert all(c >= 1 for c in cs) and max(cs) < 10


def _constraint_oracle(sc, omega, A, cons):
    """Sum cylinder measures over every word meeting the window constraints."""
    J = cons.shape[1]
    L = J - 1 + A.depth
    probs = all_cylinder_measures(sc.sft, sc.psi, omega, L)[0]
    words = words_of(L, sc.b)
    hit = np.array([[tuple(w[j : j + A.depth]) in A for j in range(J)] for w in words])
    out = []
    for row in cons:
        ok = np.ones(len(words), dtype=bool)
        ok &= np.all(hit[:, row == 1], axis=1)
        ok &= ~np.any(hit[:, row == -1], axis=1)
        out.append(probs[ok].sum())
    return np.array(out)


def test_window_events_against_enumeration(ex5_tilt):
    sc = ex5_tilt
    A = CylinderSet([(1, 2), (3, 3)])
    rng = np.random.default_rng(4)
    cons = rng.integers(-1, 2, size=(12, 6)).astype(np.int8)
    for omega in (0.1, 0.45):
        got = window_event_measures(sc.sft, sc.psi, omega, A, cons)
        np.testing.assert_allclose(got, _constraint_oracle(sc, omega, A, cons), atol=1e-12)


def test_hitting_survival_against_enumeration(ex5):
    A = CylinderSet.single((1, 2))
    k_max = 6
    surv = hitting_survival(ex5.sft, ex5.psi, 0.1, A, k_max)
    cons = np.zeros((k_max + 1, k_max + 1), dtype=np.int8)
    for k in range(k_max + 1):
        cons[k, 1 : k + 1] = -1
    np.testing.assert_allclose(surv, _constraint_oracle(ex5, 0.1, A, cons), atol=1e-12)
    assert surv[0] == pytest.approx(1.0)


def test_pair_measures_and_orbit_masses(ex5_tilt):
    sc = ex5_tilt
    J, head, tail = pair_cylinder_measures(sc.sft, sc.psi, 0.1, 2, 2, 1)
    full = all_cylinder_measures(sc.sft, sc.psi, 0.1, 5)[0].reshape(9, 3, 9)
    np.testing.assert_allclose(J, full.sum(axis=1), atol=1e-13)
    np.testing.assert_allclose(head, all_cylinder_measures(sc.sft, sc.psi, 0.1, 2)[0], atol=1e-13)
    A = CylinderSet([(1, 2), (2, 2)])
    m = orbit_masses(sc.sft, sc.psi, 0.1, A, 1, 5)
    pts = orbit(sc.sft.base, 0.1, 5)[1:]
    want = [sum(cylinder_measure(sc.sft, sc.psi, float(p), w) for w in A.words) for p in pts]
    np.testing.assert_allclose(m, want, atol=1e-12)


def test_potential_spec_validation():
    with pytest.raises(ValidationError):
        PotentialSpec(IntervalPartition(), np.zeros((1, 3, 3)), depth=3)
    with pytest.raises(ValidationError):
        PotentialSpec(IntervalPartition(), np.full((1, 3, 3), np.inf))
    with pytest.raises(ValidationError):
        PotentialSpec(IntervalPartition((0.0, 0.5)), np.zeros((1, 3, 3)))
    p = tilt_potential()
    assert p.holder_a >= 0 and 0 < p.holder_r < 1
