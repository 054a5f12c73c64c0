"""Zero-set machinery: the premultiplier psi_Z, k_Z, W_Z and the comparison function h.

Zero sequences are finite.  Zeros at the origin enter ``psi_Z`` as a plain
factor ``z^m`` (the factor ``conj(a) phi_a e^{1 - conj(a) phi_a}`` vanishes
identically for ``a = 0``) but are counted normally in ``k_Z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .analytic import AnalyticFunction, ZeroSequence
from .errors import NumericGuardError, ParameterError
from .geometry import mobius, pseudo_dist
from .quadrature import DiscGrid, cached_grid

OVERFLOW_LOG = 700.0
MAX_SWEEPS = 200


@dataclass(frozen=True)
class ZeroSetAux:
    Z: ZeroSequence
    blaschke2_sum: float
    blaschke2sq_sum: float
    separation: float
    origin_multiplicity: int

    @classmethod
    def of(cls, Z: ZeroSequence) -> "ZeroSetAux":
        pts = Z.expanded()
        mod = np.abs(pts)
        b2 = float(np.sum((1.0 - mod) ** 2))
        b2sq = float(np.sum((1.0 - mod ** 2) ** 2))
        if pts.size < 2:
            sep = math.nan
        else:
            d = pseudo_dist(pts[:, None], pts[None, :])
            sep = float(np.min(d[~np.eye(pts.size, dtype=bool)]))
        return cls(Z, b2, b2sq, sep, Z.count(0j))


def _aux(Z) -> ZeroSetAux:
    return Z if isinstance(Z, ZeroSetAux) else ZeroSetAux.of(Z)


def k_Z(aux, z):
    """``|z|^2 / 2 * sum_a (1 - |a|^2)^2 / |1 - conj(a) z|^2``."""
    aux = _aux(aux)
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape)
    for a, m in zip(aux.Z.points, aux.Z.mults):
        total = total + m * (1.0 - abs(a) ** 2) ** 2 / np.abs(1.0 - np.conj(a) * z) ** 2
    out = 0.5 * np.abs(z) ** 2 * total
    return float(out) if out.ndim == 0 else out


def W_Z(aux, z):
    k = np.asarray(k_Z(aux, z))
    if np.any(k > OVERFLOW_LOG):
        raise NumericGuardError(f"k_Z exceeds the overflow threshold {OVERFLOW_LOG:g}")
    out = np.exp(k)
    return float(out) if out.ndim == 0 else out


def psi_Z(aux, z):
    """``z^m0 * prod_{a != 0} (conj(a) phi_a(z) exp(1 - conj(a) phi_a(z)))^m``."""
    aux = _aux(aux)
    z = np.asarray(z, dtype=complex)
    out = z ** aux.origin_multiplicity if aux.origin_multiplicity else np.ones(z.shape, dtype=complex)
    expo = np.zeros(z.shape, dtype=complex)
    for a, m in zip(aux.Z.points, aux.Z.mults):
        if a == 0:
            continue
        t = np.conj(a) * mobius(a, z)
        out = out * t ** int(m)
        expo = expo + m * (1.0 - t)
    if np.any(expo.real > OVERFLOW_LOG):
        raise NumericGuardError(f"psi_Z exponent exceeds the overflow threshold {OVERFLOW_LOG:g}")
    out = out * np.exp(expo)
    return complex(out) if out.ndim == 0 else out


def psi_modulus_identity(aux, z):
    """Right-hand side ``prod |a| e^{(1-|a|^2)/2} * prod |phi_a| e^{(1-|phi_a|^2)/2} * W_Z``.

    Valid for sequences without origin zeros.
    """
    aux = _aux(aux)
    z = np.asarray(z, dtype=complex)
    log_out = np.asarray(k_Z(aux, z), dtype=float).copy()
    for a, m in zip(aux.Z.points, aux.Z.mults):
        ph = np.abs(mobius(a, z))
        with np.errstate(divide="ignore"):
            log_out = log_out + m * (math.log(abs(a)) + 0.5 * (1.0 - abs(a) ** 2)
                                     + np.log(ph) + 0.5 * (1.0 - ph ** 2))
    out = np.exp(log_out)
    return float(out) if out.ndim == 0 else out


def psi_quotient(f: AnalyticFunction, aux, z):
    """``f / psi_Z`` with the zeros of Z cancelled symbolically."""
    aux = _aux(aux)
    g = f.divide_zeros(aux.Z)
    z = np.asarray(z, dtype=complex)
    out = g(z) * (-1.0) ** aux.origin_multiplicity
    for a, m in zip(aux.Z.points, aux.Z.mults):
        if a == 0:
            continue
        t = np.conj(a) * mobius(a, z)
        out = out / (np.conj(a) * np.exp(1.0 - t)) ** int(m)
    return complex(out) if np.ndim(out) == 0 else out


def log_h(f: AnalyticFunction, Z: ZeroSequence, z):
    """``log h`` in the cancelled form ``log|f / prod phi_a| - sum (1 - |phi_a|^2) / 2``."""
    g = f.divide_zeros(Z)
    z = np.asarray(z, dtype=complex)
    out = g.log_modulus_parts(z)
    for a, m in zip(Z.points, Z.mults):
        out = out - 0.5 * m * (1.0 - np.abs(mobius(a, z)) ** 2)
    return out


def h_compare(f: AnalyticFunction, Z: ZeroSequence, z):
    """``h(z) = |f(z)| / prod_{a in Z} |phi_a(z)| e^{(1 - |phi_a(z)|^2)/2}``."""
    out = np.exp(log_h(f, Z, z))
    return float(out) if np.ndim(out) == 0 else out


def prop2_ratio(f: AnalyticFunction, Z: ZeroSequence, p, weight, grid: DiscGrid | None = None):
    """``(||f||^p / ||h||^p, ||h||^p / ||f||^p)`` on the grid."""
    if not p > 0:
        raise ParameterError("p must be positive")
    grid = grid if grid is not None else cached_grid()
    masses = grid.weight_masses(weight)
    nf = float(np.sum(np.exp(p * f.log_modulus_parts(grid.z)) * masses))
    nh = float(np.sum(np.exp(p * log_h(f, Z, grid.z)) * masses))
    if not (nf > 0 and nh > 0 and math.isfinite(nf) and math.isfinite(nh)):
        raise NumericGuardError("norms are zero or not finite on the grid")
    return nf / nh, nh / nf


@dataclass
class Corollary1Result:
    best_value: float
    coeffs: list
    sweeps: int
    log_value: float


def harmonic_basis(z, max_degree):
    """Columns ``Re z^m, Re(i z^m) = -Im z^m`` for ``m = 1..max_degree``."""
    cols = []
    zm = np.ones_like(z)
    for _ in range(max_degree):
        zm = zm * z
        cols += [zm.real, -zm.imag]
    return np.array(cols).reshape(len(cols), z.size)


def corollary1_search(Z: ZeroSequence, p, weight, max_degree, grid: DiscGrid | None = None,
                      max_sweeps=MAX_SWEEPS) -> Corollary1Result:
    """Minimize ``int exp(p k_Z - h) omega dA`` over ``h = c0 + sum Re((c_m + i d_m) z^m)``.

    ``c0`` is held at 0: a free constant would drive every finite value to 0.
    The objective is convex; each coordinate takes a Newton step followed by
    step halving until the objective decreases.  Coefficients are returned as
    ``[c0, c1, d1, c2, d2, ...]``.
    """
    if int(max_degree) != max_degree or max_degree < 0:
        raise ParameterError("max_degree must be a nonnegative integer")
    grid = grid if grid is not None else cached_grid(8, 32)
    masses = grid.weight_masses(weight)
    keep = masses > 0
    z = grid.z[keep]
    with np.errstate(divide="ignore"):
        base = p * k_Z(Z, z) + np.log(masses[keep])
    basis = harmonic_basis(z, int(max_degree))
    coef = np.zeros(basis.shape[0])
    h = np.zeros(z.size)

    def objective(hv):
        return float(logsumexp(base - hv))

    cur = objective(h)
    if cur > OVERFLOW_LOG:
        raise NumericGuardError(
            f"integrand exceeds overflow threshold exp({OVERFLOW_LOG:g}) at grid resolution")
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        start = cur
        for j in range(basis.shape[0]):
            b = basis[j]
            e = np.exp(base - h - cur)
            grad = -float(np.sum(b * e))
            hess = float(np.sum(b * b * e))
            if hess <= 0 or grad == 0:
                continue
            step = -grad / hess
            while abs(step) > 1e-14:
                trial = objective(h + step * b)
                if trial < cur:
                    coef[j] += step
                    h = h + step * b
                    cur = trial
                    break
                step *= 0.5
        if start - cur < 1e-13:
            break
    return Corollary1Result(float(math.exp(cur)), [0.0] + [float(c) for c in coef], sweeps, cur)


@dataclass
class PerturbReport:
    gamma: float
    condition1_max_error: float
    condition1_holds: bool
    max_pseudo_dist: float
    separation: float
    finite_union_separated: bool
    target_exponent: float | None


def perturbed_point(a, gamma):
    """The point on the ray of ``a`` with ``1 - |a'|^2 = gamma (1 - |a|^2)``."""
    a = complex(a)
    r = math.sqrt(1.0 - gamma * (1.0 - abs(a) ** 2))
    return r if a == 0 else r * a / abs(a)


def perturb_check(Z: ZeroSequence, gamma, Z2: ZeroSequence, p=None, tol=1e-12) -> PerturbReport:
    """Check ``1 - |s(a)|^2 = gamma (1 - |a|^2)`` pairwise and report ``max rho(a, s(a))``.

    ``Z2`` is matched to ``Z`` point by point in order; multiplicities must agree.
    """
    if not 0 < gamma < 1:
        raise ParameterError("gamma must lie in the open interval (0, 1)")
    if len(Z.points) != len(Z2.points) or tuple(Z.mults) != tuple(Z2.mults):
        raise ParameterError("Z and Z' must have the same points count and multiplicities")
    a = np.array(Z.points, dtype=complex)
    s = np.array(Z2.points, dtype=complex)
    err = np.abs((1.0 - np.abs(s) ** 2) - gamma * (1.0 - np.abs(a) ** 2))
    max_err = float(np.max(err)) if err.size else 0.0
    rho = float(np.max(pseudo_dist(a, s))) if a.size else 0.0
    aux = ZeroSetAux.of(Z)
    # a finite sequence of distinct points is separated; repeated points form
    # at most max(mult) separated subsequences
    return PerturbReport(float(gamma), max_err, max_err <= tol, rho, aux.separation, True,
                         None if p is None else float(p) / gamma)
