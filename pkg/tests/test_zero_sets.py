import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergman_lab.analytic import AnalyticFunction, ZeroSequence
from bergman_lab.errors import NumericGuardError, ParameterError
from bergman_lab.geometry import mobius
from bergman_lab.quadrature import cached_grid
from bergman_lab.weights import lebesgue, standard
from bergman_lab.zero_sets import (W_Z, ZeroSetAux, corollary1_search, h_compare, k_Z,
                                   perturb_check, perturbed_point, prop2_ratio, psi_modulus_identity,
                                   psi_quotient, psi_Z)

from corpus import CORPUS

Z_HALF = ZeroSequence.from_points([0.5])


def test_k_Z_examples():
    assert k_Z(Z_HALF, 0) == 0
    assert k_Z(Z_HALF, 0.5) == pytest.approx(0.125)
    assert k_Z(ZeroSequence.from_pairs([(0.5, 2)]), 0.5) == pytest.approx(0.25)


def test_W_Z_examples():
    assert W_Z(Z_HALF, 0) == 1
    assert W_Z(Z_HALF, 0.5) == pytest.approx(math.exp(0.125))
    assert W_Z(Z_HALF, 0.5) == pytest.approx(1.13315, abs=1e-5)


def test_W_Z_overflow_guard():
    Z = ZeroSequence.from_pairs([(0.0, 3000)])
    with pytest.raises(NumericGuardError):
        W_Z(Z, 0.9)


def test_psi_examples():
    assert abs(psi_Z(Z_HALF, 0.5)) == 0
    assert psi_Z(Z_HALF, 0) == pytest.approx(0.25 * math.exp(0.75))
    assert abs(psi_Z(Z_HALF, 0)) == pytest.approx(0.52925, abs=1e-5)


def test_psi_modulus_identity():
    Z = ZeroSequence.from_pairs([(0.5, 1), (-0.3 + 0.6j, 2), (0.9j, 1)])
    aux = ZeroSetAux.of(Z)
    rng = np.random.default_rng(5)
    z = 0.98 * np.sqrt(rng.random(1000)) * np.exp(2j * np.pi * rng.random(1000))
    lhs = np.abs(psi_Z(aux, z))
    rhs = psi_modulus_identity(aux, z)
    assert np.max(np.abs(lhs - rhs) / np.maximum(rhs, 1e-300)) < 1e-10


def test_origin_zero_prefactor():
    Z = ZeroSequence.from_pairs([(0.0, 2), (0.4, 1)])
    z = np.array([0.3 + 0.1j, -0.5j])
    expect = z ** 2 * psi_Z(ZeroSequence.from_points([0.4]), z)
    assert np.allclose(psi_Z(Z, z), expect, rtol=1e-13)


def test_h_examples():
    z = np.array([0.2, 0.7j, -0.4])
    f = CORPUS["quadratic"]
    assert np.allclose(h_compare(f, ZeroSequence(), z), np.abs(f(z)))
    f = AnalyticFunction.blaschke([0.5])
    assert h_compare(f, Z_HALF, 0) == pytest.approx(math.exp(-0.375))
    assert h_compare(f, Z_HALF, 0) == pytest.approx(0.68729, abs=1e-5)
    # removable point: finite at the zero itself
    assert h_compare(f, Z_HALF, 0.5) == pytest.approx(math.exp(-0.5), rel=1e-12)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_h_dominates_f(name):
    f = CORPUS[name]
    g = cached_grid(6, 16)
    h = h_compare(f, f.zero_set(), g.z)
    assert np.all(h >= np.abs(f(g.z)) * (1 - 1e-12))


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_subsequence_monotone(name):
    f = CORPUS[name]
    Z = f.zero_set()
    if len(Z.points) == 0:
        return
    sub = ZeroSequence.from_pairs(list(zip(Z.points[:-1], Z.mults[:-1])))
    g = cached_grid(6, 16)
    assert np.all(k_Z(sub, g.z) <= k_Z(Z, g.z) + 1e-15)
    assert np.all(h_compare(f, sub, g.z) <= h_compare(f, Z, g.z) * (1 + 1e-12))


def test_norm_comparison_examples():
    g = cached_grid(8, 32)
    f = CORPUS["quadratic"]
    lo, hi = prop2_ratio(f.zero_free_part(), ZeroSequence(), 2, lebesgue(), g)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    lo, hi = prop2_ratio(AnalyticFunction.blaschke([0.5]), Z_HALF, 2, lebesgue(), g)
    assert lo <= 1 and math.isfinite(hi)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_psi_quotient_zero_free(name):
    f = CORPUS[name]
    Z = f.zero_set()
    g = cached_grid(6, 16)
    F = psi_quotient(f, Z, g.z)
    assert np.all(np.abs(F) > 0)
    if len(Z.points):
        off = np.min([np.abs(mobius(a, g.z)) for a in Z.points], axis=0) > 1e-3
        assert np.allclose((F * psi_Z(Z, g.z))[off], f(g.z)[off], rtol=1e-9, atol=1e-12)


def test_polynomial_correction_search():
    g = cached_grid(7, 32)
    empty = corollary1_search(ZeroSequence(), 2, lebesgue(), 2, g)
    assert empty.best_value <= float(g.weight_masses(lebesgue()).sum()) * (1 + 1e-12)
    r0 = corollary1_search(Z_HALF, 2, lebesgue(), 0, g)
    r2 = corollary1_search(Z_HALF, 2, lebesgue(), 2, g)
    assert math.isfinite(r0.best_value)
    assert r2.best_value <= r0.best_value * (1 + 1e-12)
    assert len(r2.coeffs) == 5 and r2.coeffs[0] == 0.0


def test_perturbation():
    a2 = perturbed_point(0.8, 0.5)
    assert a2 == pytest.approx(math.sqrt(0.82))
    rep = perturb_check(ZeroSequence.from_points([0.8]), 0.5, ZeroSequence.from_points([a2]), p=2)
    assert rep.condition1_holds and rep.target_exponent == pytest.approx(4)
    with pytest.raises(ParameterError):
        perturb_check(Z_HALF, 1.0, Z_HALF)
    with pytest.raises(ParameterError):
        perturb_check(ZeroSequence.from_pairs([(0.5, 2)]), 0.5, ZeroSequence.from_pairs([(0.6, 1)]))


def test_aux_statistics():
    aux = ZeroSetAux.of(ZeroSequence.from_points([0.5, -0.5]))
    assert aux.separation == pytest.approx(0.8)
    assert aux.blaschke2_sum == pytest.approx(0.5)
    assert aux.blaschke2sq_sum == pytest.approx(2 * 0.75 ** 2)


@given(st.lists(st.tuples(st.floats(0.05, 0.95), st.floats(0, 6.28)), min_size=1, max_size=5),
       st.floats(0, 0.99), st.floats(0, 6.28))
def test_k_Z_subset_monotone(pts, r, t):
    Z = ZeroSequence.from_points([a * np.exp(1j * b) for a, b in pts])
    sub = ZeroSequence.from_points([pts[0][0] * np.exp(1j * pts[0][1])])
    z = r * np.exp(1j * t)
    assert k_Z(sub, z) <= k_Z(Z, z) + 1e-15
    assert W_Z(sub, z) <= W_Z(Z, z) * (1 + 1e-15)


@given(st.floats(0.01, 0.99), st.floats(0, 6.28), st.floats(0.05, 0.95))
def test_perturbed_point_condition(r, t, gamma):
    a = r * np.exp(1j * t)
    b = perturbed_point(a, gamma)
    assert abs((1 - abs(b) ** 2) - gamma * (1 - abs(a) ** 2)) < 1e-12
    assert abs(np.angle(b) - np.angle(a)) < 1e-9 or abs(abs(np.angle(b) - np.angle(a)) - 2 * np.pi) < 1e-9
