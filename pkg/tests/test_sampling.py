import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab.analytic import AnalyticFunction
from bergman_lab.dominating import GridSet
from bergman_lab.errors import ParameterError, PreconditionError
from bergman_lab.geometry import dyadic_anchors, carleson_square, square_area
from bergman_lab.quadrature import Annulus, cached_grid, make_grid
from bergman_lab.sampling import (DiscMeasure, carleson_norm, difference_estimate, k_r_field,
                                  maximal_fn, pseudo_disc_lower_bound, sampling_pipeline,
                                  weak_limit_demo)
from bergman_lab.weights import lebesgue, standard

FAMILY = [AnalyticFunction.polynomial([1]), AnalyticFunction.polynomial([0, 1]),
          AnalyticFunction.polynomial([0, 0, 1])]


@pytest.fixture(scope="module")
def grid():
    return cached_grid(6, 16)


def test_maximal_fn_of_weight_is_one(grid):
    mu = DiscMeasure.from_weight(lebesgue())
    for z in (0, 0.5, 0.8j, -0.9):
        assert maximal_fn(mu, lebesgue(), z, 5, grid) == pytest.approx(1.0, rel=1e-9)
        assert maximal_fn(mu.scaled(2), lebesgue(), z, 5, grid) == pytest.approx(2.0, rel=1e-9)


def test_maximal_fn_atom(grid):
    mu = DiscMeasure.from_atoms([0.9], [1.0])
    depth = 5
    # the deepest dyadic square containing 0.9 is the smallest one
    anchors = [a for k in range(depth + 1) for a in dyadic_anchors(k, grid.angular_base)
               if k and carleson_square(a).contains(0.9)]
    smallest = min(square_area(a) for a in anchors)
    assert maximal_fn(mu, lebesgue(), 0.9, depth, grid) == pytest.approx(1 / smallest, rel=1e-6)


def test_carleson_norm_examples(grid):
    w = standard(1)
    assert carleson_norm(DiscMeasure.from_weight(w), w, 5, grid).carleson_norm == pytest.approx(1.0)
    rest = DiscMeasure.from_weight(lebesgue(), support=Annulus(0.0, 0.5))
    assert carleson_norm(rest, lebesgue(), 5, grid).carleson_norm <= 1 + 1e-9
    assert carleson_norm(DiscMeasure.zero(), lebesgue(), 3, grid).carleson_norm == 0
    with pytest.raises(ParameterError):
        carleson_norm(DiscMeasure.zero(), lebesgue(), grid.levels + 1, grid)


def test_k_r_examples(grid):
    k, ind = k_r_field(DiscMeasure.from_weight(lebesgue()), lebesgue(), 0.3, grid)
    assert not ind.any()
    assert np.allclose(k, 1.0, atol=1e-12)
    k0, _ = k_r_field(DiscMeasure.zero(), lebesgue(), 0.3, grid)
    assert np.all(k0 == 0)
    half = DiscMeasure.from_weight(lebesgue(), support=lambda z: np.real(z) > 0)
    i = np.argmin(np.abs(grid.z + 0.5))
    kh, _ = k_r_field(half, lebesgue(), 0.3, grid)
    assert kh[i] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ParameterError):
        k_r_field(DiscMeasure.zero(), lebesgue(), 1.0, grid)


def test_pipeline_weight_measure(grid):
    for c in (1.0, 2.0):
        rep = sampling_pipeline(DiscMeasure.from_weight(lebesgue()).scaled(c), lebesgue(), 2, 0.3,
                                0.5, FAMILY, grid, depth=5)
        lo, hi = rep.sampling_bounds
        assert lo == pytest.approx(c, rel=1e-9) and hi == pytest.approx(c, rel=1e-9)
        assert rep.carleson_norm == pytest.approx(c)
        assert rep.extras["G_fraction"] == pytest.approx(1.0)


def test_pipeline_annulus_bounds():
    g = make_grid(7, 32, breakpoints=(0.99,))
    mu = DiscMeasure.from_weight(lebesgue(), support=Annulus(0.0, 0.99))
    rep = sampling_pipeline(mu, lebesgue(), 2, 0.3, 0.1, FAMILY, g, depth=6)
    lo, hi = rep.sampling_bounds
    # worst member z^2 keeps 0.99^6 of its mass; the constant keeps 0.99^2
    assert lo == pytest.approx(0.99 ** 6, rel=1e-4)
    assert hi == pytest.approx(0.99 ** 2, rel=1e-4)
    assert rep.sampling_constant == pytest.approx(1 / lo, rel=1e-6)


def test_pipeline_c_infinity_branch(grid):
    rep = sampling_pipeline(DiscMeasure.from_weight(lebesgue()), lebesgue(), 2, 0.3, 0.5, FAMILY,
                            grid, depth=5, branch="c_infinity")
    assert rep.extras["G_delta"] == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        sampling_pipeline(DiscMeasure.zero(), lebesgue(), 2, 0.3, 0.5, FAMILY, grid, branch="x")


def test_pseudo_disc_lower_bound(grid):
    assert pseudo_disc_lower_bound(GridSet.whole(grid), 0.3) == pytest.approx(1.0)
    assert pseudo_disc_lower_bound(GridSet.empty(grid), 0.3) == 0


def test_difference_estimate():
    g = cached_grid(5, 16)
    mu = DiscMeasure.from_weight(lebesgue())
    const = AnalyticFunction.polynomial([1.5])
    assert difference_estimate(mu, mu, lebesgue(), const, 2, 0.1, 0.4, g) == pytest.approx(0, abs=1e-14)
    val = difference_estimate(mu, mu, lebesgue(), AnalyticFunction.polynomial([0, 1]), 2, 0.1, 0.4, g)
    assert 0 < val < 10
    with pytest.raises(ParameterError):
        difference_estimate(mu, mu, lebesgue(), const, 2, 0.2, 0.4, g)
    with pytest.raises(ParameterError):
        difference_estimate(mu, mu, lebesgue(), const, 2, 0.1, 0.6, g)


def test_weak_limit_constant_sequence(grid):
    mu = DiscMeasure.from_weight(lebesgue())
    rep = weak_limit_demo([mu] * 4, lebesgue(), 2, FAMILY[1], grid, limit=mu)
    assert max(rep.discrepancies) == pytest.approx(0, abs=1e-15)
    assert rep.monotone


def test_weak_limit_nonuniform_norms(grid):
    seq = [DiscMeasure.from_weight(lebesgue()).scaled(10.0 ** k) for k in range(8)]
    with pytest.raises(PreconditionError):
        weak_limit_demo(seq, lebesgue(), 2, FAMILY[1], grid)
    with pytest.raises(ParameterError):
        weak_limit_demo([], lebesgue(), 2, FAMILY[1], grid)


def test_atoms_csv_roundtrip(tmp_path, grid):
    mu = DiscMeasure.from_atoms([0.1 + 0.2j, -0.5], [0.25, 1.0])
    mu.atoms_to_csv(tmp_path / "a.csv")
    nu = DiscMeasure.from_csv(atoms_path=tmp_path / "a.csv")
    assert np.array_equal(mu.atoms, nu.atoms) and np.array_equal(mu.masses, nu.masses)


def test_density_table(tmp_path, grid):
    rows = ["re,im,value"] + [f"{x},{y},3.0" for x in (-0.5, 0.5) for y in (-0.5, 0.5)]
    (tmp_path / "d.csv").write_text("\n".join(rows) + "\n")
    mu = DiscMeasure.from_csv(density_path=tmp_path / "d.csv")
    assert mu.total_mass(grid) == pytest.approx(3.0, rel=1e-9)


@settings(max_examples=25)
@given(st.floats(0.1, 10), st.floats(0.05, 0.95))
def test_scaling_and_monotonicity(c, rad):
    g = cached_grid(5, 16)
    mu = DiscMeasure.from_weight(lebesgue())
    a = carleson_norm(mu, lebesgue(), 4, g).carleson_norm
    assert carleson_norm(mu.scaled(c), lebesgue(), 4, g).carleson_norm == pytest.approx(c * a)
    sub = mu.restricted(Annulus(0.0, rad))
    assert carleson_norm(sub, lebesgue(), 4, g).carleson_norm <= a + 1e-12
    f = FAMILY[2].abs_power(2)
    assert sub.integrate(f, g) <= mu.integrate(f, g) + 1e-15
