import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergman_lab.errors import ParameterError, SingularWeightError
from bergman_lab.quadrature import cached_grid
from bergman_lab.weights import (class_report, dhat_ratios, dhatD_integral_check, dual_weight,
                                 exp_decay, lattice, lebesgue, lemma_a_exponents, log_power,
                                 moment, omega_hat, power, standard, trend, vanishing_annuli,
                                 weight_from_name)

CATALOG = ["lebesgue", "standard:1", "standard:-0.5", "power:0.5", "power:2", "log-power:2",
           "exp-decay", "vanishing-annuli"]


def test_omega_hat_examples():
    assert omega_hat(lebesgue(), 0.25) == pytest.approx(0.75)
    assert omega_hat(power(2), 0.5) == pytest.approx(0.5 ** 3 / 3, rel=1e-12)
    vals = [omega_hat(lebesgue(), r) for r in (0.9, 0.99, 0.999, 0.9999)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3


def test_moment_examples():
    assert moment(lebesgue(), 3) == pytest.approx(0.25)
    assert moment(power(1), 1) == pytest.approx(1 / 6, rel=1e-12)
    assert moment(lebesgue(), 0) == pytest.approx(1.0)


@pytest.mark.parametrize("name", CATALOG)
def test_tail_and_moment_monotone(name):
    w = weight_from_name(name)
    r = np.linspace(0, 0.999, 200)
    t = np.array([omega_hat(w, x) for x in r])
    assert np.all(np.diff(t) <= 1e-15)
    m = np.array([moment(w, x) for x in np.linspace(0, 60, 61)])
    assert np.all(np.diff(m) <= 1e-15 * m[:-1])


def test_tail_against_moment_zero():
    for name in CATALOG:
        w = weight_from_name(name)
        assert omega_hat(w, 0.0) == pytest.approx(moment(w, 0.0), rel=1e-9)


def test_dual_weight_examples():
    W = dual_weight(lebesgue(), 2)
    assert W(0.0) == pytest.approx(1.0)
    assert W(0.5) == pytest.approx(16.0)


@pytest.mark.parametrize("name,q", [("lebesgue", 2), ("power:0.5", 3), ("standard:1", 1.5)])
def test_dual_weight_identity(name, q):
    w = weight_from_name(name)
    W = dual_weight(w, q, squared=True)
    rng = np.random.default_rng(0)
    z = 0.99 * np.sqrt(rng.random(1000)) * np.exp(2j * np.pi * rng.random(1000))
    qp = q / (q - 1)
    ident = W(z) * (1 - np.abs(z) ** 2) ** (2 * qp) * w(z) ** (1 / (q - 1))
    assert np.max(np.abs(ident - 1)) < 1e-10


def test_dual_weight_rejects_vanishing_weight():
    with pytest.raises(SingularWeightError):
        dual_weight(vanishing_annuli(), 2)
    with pytest.raises(ParameterError):
        dual_weight(lebesgue(), 1)


def test_class_report_lebesgue():
    rep = class_report(lebesgue(), (2.0, 1.5), 8, cached_grid(8, 32))
    assert rep.doubling_constant_Dhat == pytest.approx(2.0, abs=1e-9)
    assert all(b.trend == "bounded" for b in rep.bq_constants.values())


def test_class_report_exp_decay_grows():
    rep = class_report(exp_decay(), (2.0,), 8, cached_grid(8, 32))
    assert rep.dhat_trend == "growing"


def test_class_report_validation():
    with pytest.raises(ParameterError):
        class_report(lebesgue(), (2.0,), 3, cached_grid(8, 32))
    with pytest.raises(ParameterError):
        class_report(lebesgue(), (1.0,), 6, cached_grid(8, 32))


def test_dhat_ratio_closed_form_power():
    # (1 - r)^(a+1) tail: the ratio is 2^(a+1) at every level
    r = dhat_ratios(power(0.5), 10)
    assert np.allclose(r, 2 ** 1.5, rtol=1e-9)


def test_trend():
    assert trend([1, 1.1, 1.2, 1.2, 1.2]) == "bounded"
    assert trend([1, 2, 4, 8, 16, 32]) == "growing"


@pytest.mark.parametrize("name", ["lebesgue", "power:0.5", "log-power:2", "standard:2"])
def test_exponent_pair_certified_on_lattice(name):
    w = weight_from_name(name)
    beta, c_beta, gamma, c_gamma = lemma_a_exponents(w, 10)
    assert gamma == pytest.approx(beta + 1)
    r = lattice(10)
    for i in range(r.size):
        for j in range(i, r.size):
            lhs = omega_hat(w, r[i])
            rhs = c_beta * ((1 - r[i]) / (1 - r[j])) ** beta * omega_hat(w, r[j])
            assert lhs <= rhs * (1 + 1e-12)


def test_dhatD_integral_check():
    g = cached_grid(10, 32)
    res = dhatD_integral_check(lebesgue(), 4, [0, 0.5], g)
    assert len(res.excluded) == 1 and 0 < res.ratios[0] < math.inf
    res = dhatD_integral_check(lebesgue(), 4, [1 - 2.0 ** -k for k in range(2, 9)], g)
    assert max(res.ratios) / min(res.ratios) < 3
    with pytest.raises(ParameterError):
        dhatD_integral_check(lebesgue(), 0, [0.5], g)


def test_weight_from_name_errors():
    with pytest.raises(ParameterError):
        weight_from_name("nope")
    with pytest.raises(ParameterError):
        weight_from_name("standard:abc")


def test_user_table_roundtrip(tmp_path):
    p = tmp_path / "w.csv"
    s = np.linspace(0, 0.999, 400)
    p.write_text("s,value\n" + "\n".join(f"{a:.17g},{1 - a:.17g}" for a in s) + "\n")
    w = weight_from_name(f"user-table:{p}")
    assert moment(w, 1.0) == pytest.approx(1 / 6, rel=1e-3)


@given(st.floats(0.05, 3.0), st.floats(0.0, 0.99))
def test_standard_tail_matches_power_identity(alpha, r):
    # omega_hat for (1 - s)^alpha is (1 - r)^(alpha + 1) / (alpha + 1)
    assert omega_hat(power(alpha), r) == pytest.approx((1 - r) ** (alpha + 1) / (alpha + 1),
                                                       rel=1e-8)


@given(st.floats(-0.9, 3.0))
def test_standard_moment_beta(alpha):
    # int_0^1 s (1 - s^2)^alpha ds = 1 / (2 (alpha + 1))
    assert moment(standard(alpha), 1.0) == pytest.approx(0.5 / (alpha + 1), rel=1e-8)


def test_log_power_positive():
    w = log_power(2)
    assert omega_hat(w, 0.5) > omega_hat(w, 0.9) > 0
