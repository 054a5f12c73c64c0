import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab.analytic import AnalyticFunction
from bergman_lab.dominating import (GridSet, bad_set_kernel, bad_set_local, bad_set_mass,
                                    bad_set_sweep, concentration_tails, domination_ratio,
                                    kernel_averages, local_averages, loglog_slope, nested_anchors,
                                    square_lower_bound, theorem8_test_function)
from bergman_lab.errors import ParameterError
from bergman_lab.kernels import KernelEvaluator
from bergman_lab.quadrature import Annulus, cached_grid, make_grid
from bergman_lab.weights import lebesgue

ONE = AnalyticFunction.polynomial([1])
Z1 = AnalyticFunction.polynomial([0, 1])


@pytest.fixture(scope="module")
def grid():
    return cached_grid(5, 16)


@pytest.fixture(scope="module")
def K():
    return KernelEvaluator(lebesgue(), closed_form=True)


def test_bad_set_kernel_examples(grid, K):
    E = bad_set_kernel(Z1, 2, 1, 0.0, lebesgue(), K, grid)
    assert E.count() == 0            # no node sits exactly at the zero
    avg = kernel_averages(ONE, 1, K, grid)
    assert bad_set_kernel(ONE, 2, 1, 0.5, lebesgue(), K, grid, averages=avg).count() == 0
    assert bad_set_kernel(ONE, 2, 1, 1.5, lebesgue(), K, grid, averages=avg).count() == grid.size
    with pytest.raises(ParameterError):
        bad_set_kernel(Z1, 1, 2, 0.5, lebesgue(), K, grid)
    with pytest.raises(ParameterError):
        bad_set_kernel(Z1, 2, 1, -0.5, lebesgue(), K, grid)


def test_bad_set_kernel_zero_node(K):
    # a grid node at the origin is impossible, but a zero at a node is caught with eps = 0
    g = cached_grid(5, 16)
    a = g.z[100]
    f = AnalyticFunction.blaschke([a])
    E = bad_set_kernel(f, 2, 1, 0.0, lebesgue(), K, g)
    assert E.count() == 1 and E.mask[100]


def test_bad_set_local_examples(grid):
    c = AnalyticFunction.polynomial([2.0])
    assert bad_set_local(c, 2, lebesgue(), 0.5, 0.9, grid).count() == 0
    assert bad_set_local(c, 2, lebesgue(), 0.5, 1.1, grid).count() == grid.size
    E = bad_set_local(Z1, 2, lebesgue(), 0.5, 0.1, grid)
    near0 = np.argmin(np.abs(grid.z))
    far = np.argmin(np.abs(grid.z - 0.9))
    assert E.mask[near0] and not E.mask[far]


def test_local_average_at_origin():
    # Q(z)(0) = average of |w|^2 over the Euclidean disc of radius 0.25 = 0.25^2 / 2
    g = cached_grid(5, 16)
    q = local_averages(Z1, 2, lebesgue(), 0.5, g)
    i = np.argmin(np.abs(g.z))
    z0 = g.z[i]
    assert q[i] == pytest.approx(0.25 ** 2 / 2 + abs(z0) ** 2, rel=0.05)


def test_domination_examples():
    g = cached_grid(8, 32)
    assert domination_ratio(GridSet.whole(g), Z1, 2, lebesgue()).ratio == pytest.approx(1.0, abs=1e-9)
    assert domination_ratio(GridSet.empty(g), Z1, 2, lebesgue()).ratio == 0
    G = GridSet.from_predicate(make_grid(8, 32, breakpoints=(0.5,)), lambda z: np.abs(z) > 0.5)
    assert domination_ratio(G, Z1, 2, lebesgue()).ratio == pytest.approx(0.9375, abs=1e-3)


def test_square_lower_bound_examples():
    g = make_grid(8, 32, breakpoints=(0.9,))
    assert square_lower_bound(GridSet.whole(g), lebesgue(), 6).delta == pytest.approx(1.0)
    sb = square_lower_bound(GridSet.from_predicate(g, lambda z: np.abs(z) < 0.9), lebesgue(), 6)
    assert sb.per_level[-1] == pytest.approx(0.0, abs=1e-12)
    half = GridSet.from_predicate(g, lambda z: (np.angle(z) > 0) & (np.angle(z) < np.pi))
    sb = square_lower_bound(half, lebesgue(), 6)
    assert sb.per_level[0] == pytest.approx(0.5, abs=1e-2)
    assert 0 <= sb.delta <= 0.5 + 1e-2


def test_bad_sets_monotone_in_eps(grid, K):
    f = AnalyticFunction.polynomial([0.3, -1, 0.5])
    avg = kernel_averages(f, 1, K, grid)
    sets = [bad_set_kernel(f, 2, 1, e, lebesgue(), K, grid, averages=avg) for e in (0.01, 0.1, 0.5)]
    assert sets[0].issubset(sets[1]) and sets[1].issubset(sets[2])
    q = local_averages(f, 2, lebesgue(), 0.5, grid)
    sets = [bad_set_local(f, 2, None, 0.5, e, grid, averages=q) for e in (0.01, 0.1, 0.5)]
    assert sets[0].issubset(sets[1]) and sets[1].issubset(sets[2])


def test_sweep_shapes():
    g = cached_grid(6, 16)
    sw = bad_set_sweep("local", AnalyticFunction.polynomial([0, 0, 1]), 2, lebesgue(), g, r=0.5)
    assert sw.monotone and len(sw.eps) == 8
    assert all(b <= a for a, b in zip(sw.masses, sw.masses[1:]))
    with pytest.raises(ParameterError):
        bad_set_sweep("other", Z1, 2, lebesgue(), g)


def test_loglog_slope():
    eps = [2.0 ** -k for k in range(1, 9)]
    assert loglog_slope(eps, [e ** 2 for e in eps]) == pytest.approx(2.0)
    assert loglog_slope(eps, [0.0] * 8) != loglog_slope(eps, [0.0] * 8)   # nan


def test_concentrating_function():
    g = cached_grid(9, 32)
    tf = theorem8_test_function(0.5, 4, 2, lebesgue(), g)
    assert math.isfinite(tf.pre_norm) and tf.pre_norm > 0
    nrm = float(np.sum(tf.f.abs_power(2)(g.z) * g.weight_masses(lebesgue())))
    assert nrm == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ParameterError):
        theorem8_test_function(0, 4, 2, lebesgue(), g)


def test_concentrating_tails_decay():
    g = cached_grid(10, 64)
    tf = theorem8_test_function(0.9, 4, 2, lebesgue(), g)
    tails = concentration_tails(tf, lebesgue(), g)
    assert len(tails) == len(nested_anchors(0.9))
    assert all(b < a for a, b in zip(tails, tails[1:]))


def test_nested_anchors():
    a = nested_anchors(1 - 2.0 ** -4)
    assert [round(abs(x), 12) for x in a] == [1 - 2.0 ** -4, 0.875, 0.75, 0.5]


def test_gridset_csv_roundtrip(tmp_path, grid):
    G = GridSet.from_predicate(grid, lambda z: z.real > 0.1)
    G.to_csv(tmp_path / "g.csv")
    H = GridSet.from_csv(tmp_path / "g.csv", grid)
    assert np.array_equal(G.mask, H.mask)
    assert G.complement().complement().mask.tolist() == G.mask.tolist()


@settings(max_examples=20)
@given(st.floats(0.05, 0.95))
def test_domination_complement_additive(rad):
    g = cached_grid(6, 16)
    G = GridSet.from_predicate(g, lambda z: np.abs(z) < rad)
    f = AnalyticFunction.polynomial([0.2, 1, -0.4])
    a = domination_ratio(G, f, 2, lebesgue()).ratio
    b = domination_ratio(G.complement(), f, 2, lebesgue()).ratio
    assert a + b == pytest.approx(1.0, abs=1e-12)
    assert bad_set_mass(G, f, 2, lebesgue()) == pytest.approx(a, rel=1e-9, abs=1e-15)
