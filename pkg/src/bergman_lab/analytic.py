"""Closed-form analytic functions on the disc with exact zero bookkeeping.

A function is stored as

    f(z) = const * poly(z) * prod_a phi_a(z)^m_a * prod_c (1 - c z)^e_c * exp(P(z))

with ``|c| <= 1`` so every ``(1 - c z)^e`` is zero-free in the disc (principal
branch).  :meth:`AnalyticFunction.canonical` moves the roots of ``poly`` into
the Blaschke-type factors and the power factors, after which
``f = u * prod phi_a^m`` with ``u`` zero-free and explicitly represented.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericGuardError, ParameterError, PreconditionError
from .geometry import check_in_disc, in_nontangential, mobius
from .quadrature import DiscGrid, lp_norm

EXP_GUARD = 700.0


@dataclass(frozen=True)
class ZeroSequence:
    """Finite list of distinct points of the disc with multiplicities."""

    points: tuple = ()
    mults: tuple = ()

    def __post_init__(self):
        if len(self.points) != len(self.mults):
            raise ParameterError("points and multiplicities differ in length")
        for p, m in zip(self.points, self.mults):
            check_in_disc(p, "zero")
            if int(m) != m or m < 1:
                raise ParameterError("multiplicities must be positive integers")

    @classmethod
    def from_points(cls, pts):
        """Merge repeated points into multiplicities (first-seen order)."""
        order, counts = [], {}
        for p in pts:
            p = complex(p)
            if p not in counts:
                order.append(p)
                counts[p] = 0
            counts[p] += 1
        return cls(tuple(order), tuple(counts[p] for p in order))

    @classmethod
    def from_pairs(cls, pairs):
        pts = []
        for p, m in pairs:
            pts += [complex(p)] * int(m)
        return cls.from_points(pts)

    @classmethod
    def from_csv(cls, path):
        """Rows ``re, im, multiplicity``; a non-numeric first row is a header."""
        pairs = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    re_, im_, m = float(row[0]), float(row[1]), float(row[2])
                except (ValueError, IndexError):
                    if pairs:
                        raise ParameterError(f"bad zero row {row!r}")
                    continue
                pairs.append((complex(re_, im_), m))
        return cls.from_pairs(pairs)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["re", "im", "multiplicity"])
            for p, m in zip(self.points, self.mults):
                w.writerow([repr(float(p.real)), repr(float(p.imag)), int(m)])

    def expanded(self) -> np.ndarray:
        """Points repeated by multiplicity."""
        return np.array([p for p, m in zip(self.points, self.mults) for _ in range(int(m))],
                        dtype=complex)

    def __len__(self):
        return int(sum(self.mults))

    def count(self, point) -> int:
        point = complex(point)
        return int(sum(m for p, m in zip(self.points, self.mults) if p == point))

    def is_subset_of(self, other: "ZeroSequence") -> bool:
        return all(other.count(p) >= m for p, m in zip(self.points, self.mults))

    def minus(self, other: "ZeroSequence") -> "ZeroSequence":
        if not other.is_subset_of(self):
            raise PreconditionError("zero sequence is not a subset")
        pairs = [(p, m - other.count(p)) for p, m in zip(self.points, self.mults)]
        return ZeroSequence.from_pairs([(p, m) for p, m in pairs if m > 0])

    def union(self, other: "ZeroSequence") -> "ZeroSequence":
        return ZeroSequence.from_points(list(self.expanded()) + list(other.expanded()))


EMPTY = ZeroSequence()


def _polyval(coeffs, z):
    """Horner evaluation of ascending coefficients."""
    out = np.zeros_like(z, dtype=complex)
    for c in reversed(coeffs):
        out = out * z + c
    return out


@dataclass(frozen=True)
class AnalyticFunction:
    """``const * poly * prod phi_a^m * prod (1 - c z)^e * exp(P)``.

    ``poly`` and ``exp_poly`` are ascending coefficient tuples; an empty
    ``poly`` stands for 1.  ``power_factors`` holds ``(c, e)`` pairs.
    """

    poly: tuple = ()
    zeros: ZeroSequence = field(default_factory=ZeroSequence)
    exp_poly: tuple = ()
    power_factors: tuple = ()
    const: complex = 1.0

    def __post_init__(self):
        for c, _ in self.power_factors:
            if abs(c) > 1.0 + 1e-15:
                raise ParameterError("power factor (1 - c z)^e needs |c| <= 1")
        if self.poly and all(c == 0 for c in self.poly):
            raise ParameterError("polynomial factor is identically zero")

    # -- construction helpers
    @classmethod
    def polynomial(cls, coeffs):
        return cls(poly=tuple(complex(c) for c in coeffs))

    @classmethod
    def blaschke(cls, points):
        return cls(zeros=ZeroSequence.from_points(points))

    @classmethod
    def exponential(cls, coeffs):
        return cls(exp_poly=tuple(complex(c) for c in coeffs))

    def with_zeros(self, zs: ZeroSequence) -> "AnalyticFunction":
        return AnalyticFunction(self.poly, self.zeros.union(zs), self.exp_poly,
                                self.power_factors, self.const)

    # -- evaluation
    def log_modulus_parts(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, math.log(abs(self.const)) if self.const != 0 else -np.inf)
        with np.errstate(divide="ignore"):
            if self.poly:
                out = out + np.log(np.abs(_polyval(self.poly, z)))
            for a, m in zip(self.zeros.points, self.zeros.mults):
                out = out + m * np.log(np.abs(mobius(a, z)))
            for c, e in self.power_factors:
                out = out + (e * np.log(1.0 - c * z)).real
        if self.exp_poly:
            out = out + _polyval(self.exp_poly, z).real
        return out

    def evaluate(self, z):
        """Value of ``f`` at ``z`` (vectorized); raises on exponential overflow."""
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) >= 1.0):
            raise ParameterError("evaluation point outside the open disc")
        out = np.full(z.shape, complex(self.const))
        if self.poly:
            out = out * _polyval(self.poly, z)
        for a, m in zip(self.zeros.points, self.zeros.mults):
            out = out * mobius(a, z) ** int(m)
        logs = np.zeros(z.shape, dtype=complex)
        for c, e in self.power_factors:
            logs = logs + e * np.log(1.0 - c * z)
        if self.exp_poly:
            logs = logs + _polyval(self.exp_poly, z)
        if np.any(logs.real > EXP_GUARD):
            bad = z.ravel()[int(np.argmax(logs.real.ravel()))]
            raise NumericGuardError(f"exponential factor overflows near z={bad:.6g}")
        out = out * np.exp(logs)
        return out[()] if out.ndim == 0 else out

    __call__ = evaluate

    def abs_power(self, p):
        """``|f|^p`` as a callable (avoids forming ``f`` where it overflows)."""
        return lambda z: np.exp(p * self.log_modulus_parts(z))

    # -- structure
    def canonical(self) -> "AnalyticFunction":
        """Equivalent representation without a polynomial factor.

        ``z - r = -phi_r(z) (1 - conj(r) z)`` for roots inside the disc and
        ``z - r = -r (1 - z / r)`` for the others.
        """
        if not self.poly:
            return self
        coeffs = np.trim_zeros(np.array(self.poly, dtype=complex), "b")
        lead = coeffs[-1]
        const = complex(self.const) * lead
        roots = np.roots(coeffs[::-1]) if coeffs.size > 1 else np.array([], dtype=complex)
        inside, powers = [], list(self.power_factors)
        for r in roots:
            if abs(r) < 1.0:
                inside.append(complex(r))
                const = -const
                if r != 0:
                    powers.append((complex(np.conj(r)), 1.0))
            else:
                const *= -r
                powers.append((complex(1.0 / r), 1.0))
        zeros = self.zeros.union(ZeroSequence.from_points(inside))
        return AnalyticFunction((), zeros, self.exp_poly, tuple(powers), const)

    def zero_set(self) -> ZeroSequence:
        return self.canonical().zeros

    def zero_free_part(self) -> "AnalyticFunction":
        """``u`` in ``f = u * prod phi_a^m``."""
        c = self.canonical()
        return AnalyticFunction((), EMPTY, c.exp_poly, c.power_factors, c.const)

    def is_zero_free(self) -> bool:
        return len(self.zero_set()) == 0

    def power(self, t) -> "AnalyticFunction":
        """``u^t`` for zero-free ``u`` with the branch fixed by the principal ``u(0)^t``."""
        c = self.canonical()
        if len(c.zeros):
            raise PreconditionError("fractional powers need a zero-free function")
        p0 = complex(c.exp_poly[0]) if c.exp_poly else 0j
        # principal logarithm of u(0) = const * exp(P(0))
        arg = math.remainder(float(np.angle(complex(c.const))) + p0.imag, 2.0 * math.pi)
        log_u0 = complex(math.log(abs(c.const)) + p0.real, arg)
        const = np.exp(t * log_u0)
        exp_poly = tuple([0.0] + [t * a for a in c.exp_poly[1:]]) if c.exp_poly else ()
        powers = tuple((cc, t * e) for cc, e in c.power_factors)
        return AnalyticFunction((), EMPTY, exp_poly, powers, complex(const))

    def divide_zeros(self, zs: ZeroSequence) -> "AnalyticFunction":
        """``f / prod_{a in zs} phi_a`` with the factors cancelled symbolically."""
        c = self.canonical()
        if not zs.is_subset_of(c.zeros):
            raise PreconditionError("Z is not contained in the zero set of f")
        return AnalyticFunction((), c.zeros.minus(zs), c.exp_poly, c.power_factors, c.const)

    def describe(self) -> dict:
        c = self.canonical()
        return {
            "const": [c.const.real, c.const.imag] if isinstance(c.const, complex) else [float(c.const), 0.0],
            "zeros": [[p.real, p.imag, int(m)] for p, m in zip(c.zeros.points, c.zeros.mults)],
            "exp_poly": [[complex(a).real, complex(a).imag] for a in c.exp_poly],
            "power_factors": [[complex(cc).real, complex(cc).imag, float(e)] for cc, e in c.power_factors],
        }


def from_config(spec: dict) -> AnalyticFunction:
    """Build a function from ``{"poly": [...], "zeros": [[re, im, m], ...], "exp": [...]}``.

    Complex coefficients may be given as numbers or ``[re, im]`` pairs.
    """
    def cplx(v):
        if isinstance(v, (list, tuple)):
            return complex(float(v[0]), float(v[1]))
        return complex(v)

    zeros = ZeroSequence.from_pairs(
        [(complex(float(z[0]), float(z[1])), int(z[2]) if len(z) > 2 else 1)
         for z in spec.get("zeros", [])])
    powers = tuple((cplx(c), float(e)) for c, e in spec.get("power_factors", []))
    return AnalyticFunction(tuple(cplx(c) for c in spec.get("poly", [])), zeros,
                            tuple(cplx(c) for c in spec.get("exp", [])), powers,
                            cplx(spec.get("const", 1.0)))


# ---------------------------------------------------------------- norms and means

def ap_norm(f: AnalyticFunction, p, weight, grid: DiscGrid) -> float:
    """``||f||_{A^p_omega}`` by grid quadrature."""
    return lp_norm(f.evaluate, p, weight, grid)


def integral_mean(f: AnalyticFunction, p, r, n_angles=2048) -> float:
    """``M_p(r, f)`` by the trapezoid rule on ``n_angles`` equispaced angles (``p = inf`` allowed)."""
    if not 0 < r < 1:
        raise ParameterError("integral mean needs 0 < r < 1")
    if not p > 0:
        raise ParameterError("p must be positive")
    z = r * np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    vals = np.abs(f.evaluate(z))
    if math.isinf(p):
        return float(np.max(vals))
    return float(np.mean(vals ** p) ** (1.0 / p))


def zero_counts(f: AnalyticFunction, r):
    """``(n(r, f), N(r, f))`` with ``N`` integrated exactly."""
    if not 0 < r < 1:
        raise ParameterError("zero counts need 0 < r < 1")
    zs = f.zero_set()
    n, big_n = 0, 0.0
    for a, m in zip(zs.points, zs.mults):
        if abs(a) < r:
            n += int(m)
            big_n += m * (math.log(r) if a == 0 else math.log(r / abs(a)))
    return n, big_n


def jensen_residual(f: AnalyticFunction, r, n_angles=2048) -> float:
    """``|log|f(0)| + sum_{|a|<r} log(r/|a|) - mean_theta log|f(r e^{i theta})||``."""
    if not 0 < r < 1:
        raise ParameterError("Jensen residual needs 0 < r < 1")
    zs = f.zero_set()
    if zs.count(0j) or abs(f.evaluate(0.0)) == 0:
        raise PreconditionError("Jensen's formula needs f(0) != 0")
    if any(abs(abs(a) - r) < 1e-12 for a in zs.points):
        raise PreconditionError("a zero lies on the circle |z| = r")
    z = r * np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    mean_log = float(np.mean(f.log_modulus_parts(z)))
    lhs = float(f.log_modulus_parts(np.array(0j)))
    lhs += sum(m * math.log(r / abs(a)) for a, m in zip(zs.points, zs.mults) if abs(a) < r)
    return abs(lhs - mean_log)


def nontangential_max(f: AnalyticFunction, vertex, grid: DiscGrid) -> float:
    """``max |f|`` over the grid nodes inside the approach region of ``vertex``."""
    vertex = complex(vertex)
    check_in_disc(vertex, "vertex")
    mask = np.asarray(in_nontangential(vertex, grid.z))
    if not mask.any():
        raise PreconditionError("no grid node falls in the approach region (grid too coarse)")
    return float(np.max(np.abs(f.evaluate(grid.z[mask]))))
