"""Reproducing kernels of A^2_omega for radial weights and related operators.

For a radial weight the kernel is the power series
``B_z(zeta) = sum_n (conj(z) zeta)^n / (2 omega_{2n+1})``.  Every series
evaluation picks its truncation order from an explicit tail bound and records
it; points too close to the diagonal boundary are refused instead of being
silently truncated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericGuardError, ParameterError, PreconditionError, ResourceError
from .geometry import check_in_disc, mobius, mobius_derivative_abs2
from .quadrature import DiscGrid, cached_grid, make_grid, node_values
from .weights import _require_radial, standard

DEFAULT_TAIL_TOL = 1e-10
DEFAULT_DELTA_GUARD = 1e-3
DEFAULT_N_MAX = 4096
DEFAULT_COST_CAP = 2e8
NOISE_FLOOR = 1e-300


class TruncationInfeasibleError(NumericGuardError):
    """No truncation order up to ``n_max`` meets the requested tail bound."""

    def __init__(self, msg, required_terms):
        super().__init__(msg)
        self.required_terms = required_terms


@dataclass(frozen=True)
class SeriesEvaluation:
    values: np.ndarray
    terms: int
    tail_bound: float


@dataclass(frozen=True)
class KernelNorm:
    value: float
    comparison_ratio: float


class KernelEvaluator:
    """Moment table and truncated-series evaluation of ``B^omega_z``.

    ``closed_form=True`` uses the weight's closed-form kernel when it has one
    (lebesgue and standard weights); otherwise the series is always summed.
    """

    def __init__(self, weight, tail_tol=DEFAULT_TAIL_TOL, delta_guard=DEFAULT_DELTA_GUARD,
                 n_max=DEFAULT_N_MAX, closed_form=False):
        _require_radial(weight)
        if not tail_tol > 0:
            raise ParameterError("tail_tol must be positive")
        if not 0 < delta_guard < 1:
            raise ParameterError("delta_guard must lie in (0, 1)")
        if n_max < 1:
            raise ParameterError("n_max must be at least 1")
        self.weight = weight
        self.tail_tol = float(tail_tol)
        self.delta_guard = float(delta_guard)
        self.n_max = int(n_max)
        n = np.arange(self.n_max + 1)
        moments = np.asarray(weight.moment(2.0 * n + 1.0), dtype=float)
        if not np.all(np.isfinite(moments)) or np.any(moments <= 0):
            raise PreconditionError(f"{weight.name}: moments must be finite and positive")
        # nonincreasing up to rounding in the moment rule
        if np.any(np.diff(moments) > 1e-12 * moments[:-1]):
            raise PreconditionError(f"{weight.name}: moments are not nonincreasing")
        moments.setflags(write=False)
        self.moments = moments
        self.coeffs = 1.0 / (2.0 * moments)
        ratios = self.coeffs[1:] / self.coeffs[:-1]
        # sup_{m >= n} c_{m+1} / c_m; beyond the table the last value is reused
        sup = np.maximum.accumulate(ratios[::-1])[::-1]
        self._ratio_sup = np.append(sup, sup[-1])
        self.closed = weight.kernel_closed_form if closed_form else None
        self.last_evaluation = None

    def _tail_bounds(self, rho):
        """Bound on ``sum_{n > N} c_n rho^n`` for every N in the table."""
        n = np.arange(self.n_max + 1)
        q = rho * self._ratio_sup
        with np.errstate(over="ignore", divide="ignore", under="ignore"):
            lead = self.coeffs * np.exp((n + 1) * math.log(rho)) * self._ratio_sup
            out = np.where(q < 1, lead / (1.0 - q), np.inf)
        return out

    def terms_needed(self, rho):
        """Smallest N whose tail bound is ``<= tail_tol``; None if above n_max."""
        if rho == 0:
            return 0, 0.0
        bounds = self._tail_bounds(rho)
        ok = np.flatnonzero(bounds <= self.tail_tol)
        if ok.size:
            return int(ok[0]), float(bounds[ok[0]])
        return None, float(bounds[-1])

    def _required_estimate(self, rho):
        # c_n grows at most polynomially for the catalog; use the last table ratio
        c = self.coeffs[-1]
        return int(math.ceil(math.log(self.tail_tol / max(c, 1.0) * (1.0 - rho)) / math.log(rho)))

    def series(self, x) -> SeriesEvaluation:
        """Evaluate ``sum c_n x^n`` at the complex array ``x``."""
        x = np.asarray(x, dtype=complex)
        rho = float(np.max(np.abs(x))) if x.size else 0.0
        if rho > 1.0 - self.delta_guard:
            raise TruncationInfeasibleError(
                f"|z||zeta| = {rho:.6g} exceeds 1 - delta_guard; about "
                f"{self._required_estimate(min(rho, 1 - 1e-15))} terms would be needed",
                self._required_estimate(min(rho, 1 - 1e-15)))
        n_terms, bound = self.terms_needed(rho)
        if n_terms is None:
            need = self._required_estimate(rho)
            raise TruncationInfeasibleError(
                f"tail bound {bound:.3g} > {self.tail_tol:g} at n_max={self.n_max}; "
                f"about {need} terms would be needed", need)
        out = np.full(x.shape, self.coeffs[n_terms], dtype=complex)
        for c in self.coeffs[n_terms - 1::-1] if n_terms > 0 else ():
            out = out * x + c
        ev = SeriesEvaluation(out, n_terms, bound)
        self.last_evaluation = ev
        return ev

    def _eval(self, x):
        x = np.asarray(x, dtype=complex)
        if self.closed is not None:
            rho = float(np.max(np.abs(x))) if x.size else 0.0
            if rho >= 1.0:
                raise ParameterError("kernel argument outside the disc")
            return np.asarray(self.closed(x), dtype=complex)
        return self.series(x).values

    def kernel(self, z, zeta):
        """``B_z(zeta)``, vectorized by broadcasting."""
        check_in_disc(z)
        check_in_disc(zeta, "zeta")
        out = self._eval(np.conj(np.asarray(z, dtype=complex)) * np.asarray(zeta, dtype=complex))
        return complex(out) if out.ndim == 0 else out

    def kernel_norm_sq(self, z) -> KernelNorm:
        """``||B_z||^2 = B_z(z)`` and the ratio ``B_z(z) omega_hat(z) (1 - |z|)``."""
        z = complex(z)
        check_in_disc(z)
        val = float(self._eval(np.array(abs(z) ** 2 + 0j)).real)
        r = abs(z)
        ratio = val * float(self.weight.omega_hat(r)) * (1.0 - r)
        return KernelNorm(val, ratio)

    def normalized_kernel(self, z, zeta):
        """``K_z(zeta) = |B_z(zeta)|^2 / B_z(z)``."""
        norm = self.kernel_norm_sq(z).value
        out = np.abs(self.kernel(z, zeta)) ** 2 / norm
        return float(out) if np.ndim(out) == 0 else out


def _inner_grid(inner):
    return inner if inner is not None else cached_grid(6, 32)


def _pullback_density(K: KernelEvaluator, z, inner: DiscGrid):
    """Per-node factors ``(zeta, vals, masses)`` with ``int g K_z omega = sum g(zeta) vals masses``.

    ``z`` is a 1-D array; ``zeta`` and ``vals`` have shape ``(len(z), inner.size)``.
    """
    w = inner.z[None, :]
    zc = z[:, None]
    zeta = mobius(zc, w)
    factor = getattr(K.weight, "kernel_pullback_factor", None)
    if K.closed is not None and factor is not None:
        return zeta, np.full((1, 1), factor), inner.weight_masses(K.weight)
    norm = K._eval(np.abs(z) ** 2 + 0j).real[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        dens = (np.abs(K._eval(np.conj(zc) * zeta)) ** 2 / norm
                * K.weight(zeta) * mobius_derivative_abs2(zc, w))
    base = K.weight(inner.z)
    if np.all(base > 0):
        return zeta, dens / base[None, :], inner.weight_masses(K.weight)
    return zeta, dens, inner.area


def _as_values(v):
    v = np.asarray(v)
    return v.astype(complex) if np.iscomplexobj(v) else v.astype(float)


def kernel_integrals(K: KernelEvaluator, g, zs, inner: DiscGrid | None = None, method="pullback"):
    """``int g(zeta) K_z(zeta) omega(zeta) dA(zeta)`` for every ``z`` in ``zs``.

    ``method="pullback"`` pulls the inner grid back through ``phi_z``: with
    ``zeta = phi_z(w)`` the integrand becomes
    ``g(phi_z(w)) K_z(phi_z(w)) omega(phi_z(w)) |phi_z'(w)|^2``.  For the
    standard weights the last three factors equal ``(alpha+1) omega(w)``
    exactly, so the density is integrated against the exact cell masses of
    omega.  For weights with a heavy boundary tail the outermost inner ring
    limits accuracy (about 1% for log-power weights at 6 levels).

    ``method="direct"`` sums over the nodes of ``inner`` itself (default
    10 levels, angular base 64); it costs ``len(zs) * inner.size`` kernel
    evaluations and needs ``|z|`` well inside the grid's resolved radius.

    Complex ``g`` gives complex values.  Returns ``(values, indeterminate)``;
    nodes where the kernel series cannot be truncated get NaN and are flagged.
    """
    if method not in ("pullback", "direct"):
        raise ParameterError(f"unknown method {method!r}")
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    check_in_disc(zs)
    if method == "direct":
        inner = inner if inner is not None else cached_grid(10, 64)
        masses = inner.weight_masses(K.weight)
        keep = masses > 0
        zeta, m = inner.z[keep], masses[keep]
        gm = m if g is None else _as_values(g(zeta)) * m
    else:
        inner = _inner_grid(inner)
    out = np.full(zs.size, np.nan, dtype=complex)
    order = np.argsort(np.abs(zs), kind="stable")
    chunk = max(1, int(2_000_000 // inner.size))
    seen_complex = False

    def run(idx):
        nonlocal seen_complex
        if method == "direct":
            z = zs[idx]
            norm = K._eval(np.abs(z) ** 2 + 0j).real
            dens = np.abs(K._eval(np.conj(z)[:, None] * zeta[None, :])) ** 2 / norm[:, None]
            seen_complex |= np.iscomplexobj(gm)
            return dens @ gm
        zeta_, vals, masses_ = _pullback_density(K, zs[idx], inner)
        gv = 1.0 if g is None else _as_values(g(zeta_))
        seen_complex |= np.iscomplexobj(gv)
        return np.sum(gv * vals * masses_[None, :], axis=1)

    for start in range(0, zs.size, chunk):
        idx = order[start:start + chunk]
        try:
            out[idx] = run(idx)
        except TruncationInfeasibleError:
            for i in idx:
                try:
                    out[i] = run(np.array([i]))[0]
                except TruncationInfeasibleError:
                    pass
    if not seen_complex:
        out = out.real.copy()
    indeterminate = ~np.isfinite(out)
    return out, indeterminate


def kernel_integral(K: KernelEvaluator, g, z, inner: DiscGrid | None = None, method="pullback"):
    """Scalar version of :func:`kernel_integrals`; raises when indeterminate."""
    z = complex(z)
    vals, bad = kernel_integrals(K, g, np.array([z]), inner, method)
    if bad[0]:
        raise NumericGuardError(f"kernel integral is not finite at z={z:.6g}")
    return complex(vals[0]) if np.iscomplexobj(vals) else float(vals[0])


def reproduce(K: KernelEvaluator, f, zs, grid: DiscGrid | None = None, chunk_nodes=4_000_000):
    """``int f(zeta) conj(B_z(zeta)) omega(zeta) dA(zeta)`` by direct grid quadrature.

    Unlike :func:`kernel_integrals` nothing is pulled back, so the result
    tests the kernel values and the grid together.  Equals ``f(z)`` for
    ``f`` in ``A^2_omega``.
    """
    grid = grid if grid is not None else cached_grid(8, 32)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    check_in_disc(zs)
    masses = grid.weight_masses(K.weight)
    keep = masses > 0
    zeta, m = grid.z[keep], masses[keep]
    fm = np.asarray(f(zeta), dtype=complex) * m
    out = np.empty(zs.size, dtype=complex)
    step = max(1, int(chunk_nodes // zeta.size))
    for s in range(0, zs.size, step):
        x = zs[s:s + step, None] * np.conj(zeta)[None, :]   # conj(conj(z) zeta)
        out[s:s + step] = K._eval(x) @ fm
    return out


def apply_R(f_values, z, grid: DiscGrid | None = None) -> float:
    """``R(f)(z) = int f(w) (1-|z|^2)^2 / |1 - conj(z) w|^4 dA(w)``."""
    grid = grid if grid is not None else cached_grid()
    z = complex(z)
    check_in_disc(z)
    vals = node_values(f_values, grid)
    out = np.sum(vals * mobius_derivative_abs2(z, grid.z) * grid.area)
    return complex(out) if np.iscomplexobj(out) else float(out)


_standard_cache = {}


def apply_Pplus(alpha, f_values, z, grid: DiscGrid | None = None) -> float:
    """``P+_alpha(f)(z) = int f(w) (1-|w|^2)^alpha / |1 - z conj(w)|^(2+alpha) dA(w)``."""
    if not alpha > -1:
        raise ParameterError("alpha must exceed -1")
    grid = grid if grid is not None else cached_grid()
    z = complex(z)
    check_in_disc(z)
    alpha = float(alpha)
    if alpha not in _standard_cache:
        _standard_cache[alpha] = standard(alpha)
    masses = grid.weight_masses(_standard_cache[alpha])
    vals = node_values(f_values, grid)
    out = np.sum(vals * masses / np.abs(1.0 - z * np.conj(grid.z)) ** (2.0 + alpha))
    return complex(out) if np.iscomplexobj(out) else float(out)


def step_radial_ratio(weight, f, p, q, grid: DiscGrid | None = None,
                      inner: DiscGrid | None = None, cost_cap=DEFAULT_COST_CAP) -> float:
    """``int (R(|f|^(p/q)))^q omega dA / ||f||^p_{A^p_omega}``.

    The inner operator is evaluated by pulling back an inner grid through
    ``phi_z`` (``R(g)(z) = int g(phi_z(w)) dA(w)``); the outer integral and the
    norm use ``grid`` (default: 6 levels, angular base 16).
    """
    if q < p:
        raise ParameterError("need q >= p")
    if q < 1:
        raise ParameterError("need q >= 1")
    if p <= 0:
        raise ParameterError("p must be positive")
    outer = grid if grid is not None else make_grid(6, 16)
    inner = inner if inner is not None else cached_grid(6, 32)
    cost = outer.size * inner.size
    if cost > cost_cap:
        raise ResourceError(f"double integral needs {cost:.3g} evaluations (cap {cost_cap:.3g})")
    g = f.abs_power(p / q)
    chunk = max(1, int(4_000_000 // inner.size))
    inner_vals = np.empty(outer.size)
    for start in range(0, outer.size, chunk):
        zc = outer.z[start:start + chunk]
        zeta = mobius(zc[:, None], inner.z[None, :])
        inner_vals[start:start + chunk] = g(zeta) @ inner.area
    masses = outer.weight_masses(weight)
    lhs = float(np.sum(inner_vals ** q * masses))
    norm = float(np.sum(f.abs_power(p)(outer.z) * masses))
    if not norm > 0:
        raise PreconditionError("f has zero norm on the grid")
    return lhs / norm


def pointwise_estimate_ratio(K: KernelEvaluator, f, q, z, inner: DiscGrid | None = None,
                             method="pullback") -> float:
    """``|f(z)|^q / int |f|^q K_z omega dA``."""
    if not q > 0:
        raise ParameterError("q must be positive")
    z = complex(z)
    num = float(np.abs(f(z)) ** q)
    if num == 0:
        return 0.0
    den = kernel_integral(K, f.abs_power(q), z, inner, method)
    if not den > NOISE_FLOOR or den < 1e-13 * num:
        raise NumericGuardError("denominator below the quadrature noise floor; ratio unreliable")
    return num / den
