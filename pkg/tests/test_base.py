import math

import numpy as np
import pytest

from quenched_sft.base import BaseRotation, IntervalPartition, orbit, quadrature_grid, refine
from quenched_sft.errors import ValidationError

R = math.sqrt(2) - 1


def test_orbit_examples():
    base = BaseRotation(R)
    np.testing.assert_allclose(orbit(base, 0.0, 2), [0.0, 0.41421356237309503, 0.8284271247461901], atol=1e-15)
    assert list(orbit(base, 0.5, 0)) == [0.5]
    np.testing.assert_allclose(orbit(base, 0.9, 1), [0.9, 0.3142135623730950], atol=1e-15)


def test_orbit_long_has_no_drift():
    base = BaseRotation(R)
    pts = orbit(base, 0.3, 100_000)
    steps = np.mod(np.diff(pts) - R, 1.0)
    steps = np.minimum(steps, 1.0 - steps)
    assert steps.max() < 1e-12
    # reference by exact rational arithmetic at the far end
    from fractions import Fraction
    k = 100_000
    exact = float((Fraction(0.3) + k * Fraction(R)) % 1)
    assert abs(pts[-1] - exact) < 1e-12


def test_rotation_guards():
    with pytest.raises(ValidationError):
        BaseRotation(0.0)
    with pytest.raises(ValidationError):
        BaseRotation(1.0)
    with pytest.raises(ValidationError):
        BaseRotation(3 / 7)
    with pytest.raises(ValidationError):
        BaseRotation(0.123456)  # 1929/15625
    BaseRotation(R)


def test_partition_validation():
    with pytest.raises(ValidationError):
        IntervalPartition((0.25, 0.5))
    with pytest.raises(ValidationError):
        IntervalPartition((0.0, 0.5, 0.5))
    with pytest.raises(ValidationError):
        IntervalPartition((0.0, 1.0))
    P = IntervalPartition((0.0, 0.25, 0.5, 0.75))
    assert P.cells()[1] == (0.25, 0.5)
    assert list(P.cell_index([0.0, 0.2499, 0.25, 0.99])) == [0, 0, 1, 3]


def test_refine_examples():
    base = BaseRotation(R)
    assert refine(IntervalPartition(), base, 3).breakpoints == (0.0,)
    P = IntervalPartition((0.0, 0.75))
    assert refine(P, base, 1) == P
    got = refine(P, base, 2).breakpoints
    np.testing.assert_allclose(got, sorted([0.0, 0.75, (0 - R) % 1, (0.75 - R) % 1]), atol=1e-15)
    np.testing.assert_allclose(got, [0.0, 0.3357864376269, 0.5857864376269, 0.75], atol=1e-12)


def test_refine_labels_constant_on_cells_grid_oracle():
    base = BaseRotation(R)
    P = IntervalPartition((0.0, 0.75))
    Q = refine(P, base, 2)
    grid = (np.arange(100_000) + 0.5) / 100_000
    labels = P.cell_index(grid) * 2 + P.cell_index((grid + R) % 1.0)
    cells = Q.cell_index(grid)
    for c in range(len(Q)):
        assert len(set(labels[cells == c])) == 1


def test_refine_idempotent_and_cell_endpoints():
    base = BaseRotation(R)
    P = IntervalPartition((0.0, 0.25, 0.5, 0.75))
    for k in (1, 3, 5):
        Q = refine(P, base, k)
        assert refine(Q, base, 1) == Q
        for lo, hi in Q.cells():
            a, b = lo + 1e-9, hi - 1e-9
            la = [P.cell_index(orbit(base, a, k - 1))]
            lb = [P.cell_index(orbit(base, b, k - 1))]
            assert np.array_equal(la, lb)


def test_quadrature_examples():
    g = quadrature_grid(IntervalPartition(), 4)
    np.testing.assert_allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(g.weights, 0.25)
    g = quadrature_grid(IntervalPartition((0.0, 0.5)), 1)
    np.testing.assert_allclose(g.nodes, [0.25, 0.75])
    np.testing.assert_allclose(g.weights, [0.5, 0.5])
    g = quadrature_grid(refine(IntervalPartition((0.0, 0.25, 0.5, 0.75)), BaseRotation(R), 4), 3)
    assert g.weights.sum() == 1.0
    assert abs(g.integrate(g.nodes) - 0.5) < 1e-12
    with pytest.raises(ValidationError):
        quadrature_grid(IntervalPartition(), 0)
