"""Dominating sets: bad sets by kernel and local-average thresholds, domination
ratios, the square condition and the concentrating test functions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticFunction
from .errors import ParameterError, PreconditionError
from .geometry import carleson_square, dyadic_anchors
from .kernels import KernelEvaluator, kernel_integrals
from .quadrature import DiscGrid, cached_grid, pseudo_disc_rule

NOISE_FLOOR = 1e-300


@dataclass
class GridSet:
    """A set of grid nodes; ``indeterminate`` nodes belong neither to it nor to its complement."""

    grid: DiscGrid
    mask: np.ndarray
    indeterminate: np.ndarray | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.grid.size,):
            raise ParameterError("mask length must equal the node count")
        if self.indeterminate is None:
            self.indeterminate = np.zeros(self.grid.size, dtype=bool)
        self.mask = self.mask & ~self.indeterminate

    @classmethod
    def whole(cls, grid):
        return cls(grid, np.ones(grid.size, dtype=bool))

    @classmethod
    def empty(cls, grid):
        return cls(grid, np.zeros(grid.size, dtype=bool))

    @classmethod
    def from_predicate(cls, grid, pred):
        return cls(grid, np.asarray(pred(grid.z), dtype=bool))

    def complement(self) -> "GridSet":
        return GridSet(self.grid, ~self.mask & ~self.indeterminate, self.indeterminate.copy())

    def measure(self, weight=None) -> float:
        return float(np.sum(self.grid.weight_masses(weight)[self.mask]))

    def count(self) -> int:
        return int(self.mask.sum())

    def n_indeterminate(self) -> int:
        return int(self.indeterminate.sum())

    def issubset(self, other: "GridSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "re", "im", "in_set"])
            for i, (zz, m) in enumerate(zip(self.grid.z, self.mask)):
                w.writerow([i, repr(float(zz.real)), repr(float(zz.imag)), int(m)])

    @classmethod
    def from_csv(cls, path, grid):
        mask = np.zeros(grid.size, dtype=bool)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = csv.reader(fh)
            next(rows, None)
            for row in rows:
                if row:
                    idx = int(row[0])
                    if not 0 <= idx < grid.size:
                        raise ParameterError(f"node index {idx} outside the grid")
                    mask[idx] = bool(int(row[3]))
        return cls(grid, mask)


@dataclass
class DominationReport:
    ratio: float
    epsilon_used: float | None = None
    bad_mass_bound: float | None = None
    indeterminate: int = 0


# ------------------------------------------------------------------ bad sets

def kernel_averages(f: AnalyticFunction, q, K: KernelEvaluator, grid: DiscGrid,
                    inner: DiscGrid | None = None):
    """``int |f|^q K_z omega dA`` at every node, with the indeterminate mask."""
    return kernel_integrals(K, f.abs_power(q), grid.z, inner)


def bad_set_kernel(f: AnalyticFunction, p, q, eps, weight, K: KernelEvaluator,
                   grid: DiscGrid | None = None, inner: DiscGrid | None = None,
                   averages=None) -> GridSet:
    """Nodes with ``|f(z)|^q <= eps * int |f|^q K_z omega dA``.

    ``averages`` may carry the output of :func:`kernel_averages` so that a
    sweep over ``eps`` reuses the inner integrals.
    """
    if not 0 < q < p:
        raise ParameterError("need 0 < q < p")
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    if K.weight is not weight and K.weight.name != getattr(weight, "name", None):
        raise ParameterError("kernel evaluator belongs to a different weight")
    grid = grid if grid is not None else cached_grid(7, 32)
    vals, indet = averages if averages is not None else kernel_averages(f, q, K, grid, inner)
    lhs = f.abs_power(q)(grid.z)
    with np.errstate(invalid="ignore"):
        mask = lhs <= eps * vals
    return GridSet(grid, mask & ~indet, indet)


def local_averages(f: AnalyticFunction, p, nu, r, grid: DiscGrid, n_radial=8, n_angular=32):
    """``Q(f)(z)``: the nu-average of ``|f|^p`` over ``Delta(z, r/2)`` at every node.

    ``nu`` is a weight, or any object with a ``pseudo_disc_integrals(g, centers, radius)``
    method returning ``(int g dnu, nu(Delta))`` per center.  Nodes with
    ``nu(Delta) = 0`` get NaN.
    """
    if not 0 < r < 1:
        raise ParameterError("r must lie in (0, 1)")
    g = f.abs_power(p)
    out = np.empty(grid.size)
    chunk = 20000
    for start in range(0, grid.size, chunk):
        zc = grid.z[start:start + chunk]
        if hasattr(nu, "pseudo_disc_integrals"):
            num, den = nu.pseudo_disc_integrals(g, zc, r / 2.0)
        else:
            nodes, wts = pseudo_disc_rule(zc, r / 2.0, n_radial, n_angular)
            dens = nu(nodes) * wts
            num = np.sum(g(nodes) * dens, axis=1)
            den = np.sum(dens, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[start:start + chunk] = np.where(den > NOISE_FLOOR, num / den, np.nan)
    return out


def bad_set_local(f: AnalyticFunction, p, nu, r, eps, grid: DiscGrid | None = None,
                  averages=None) -> GridSet:
    """Nodes with ``|f(z)|^p <= eps * Q(f)(z)``, ``E(z) = Delta(z, r/2)``."""
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    grid = grid if grid is not None else cached_grid(7, 32)
    q_vals = averages if averages is not None else local_averages(f, p, nu, r, grid)
    indet = ~np.isfinite(q_vals)
    lhs = f.abs_power(p)(grid.z)
    with np.errstate(invalid="ignore"):
        mask = lhs <= eps * q_vals
    return GridSet(grid, mask & ~indet, indet)


def domination_ratio(G: GridSet, f: AnalyticFunction, p, weight, epsilon=None,
                     bad_mass_bound=None) -> DominationReport:
    """``int_G |f|^p omega dA / ||f||^p`` on G's grid."""
    grid = G.grid
    vals = f.abs_power(p)(grid.z) * grid.weight_masses(weight)
    total = float(np.sum(vals))
    if not total > 0:
        raise PreconditionError("f has zero norm on the grid")
    return DominationReport(float(np.sum(vals[G.mask])) / total, epsilon, bad_mass_bound,
                            G.n_indeterminate())


def bad_set_mass(E: GridSet, f: AnalyticFunction, p, weight) -> float:
    """``int_E |f|^p omega dA / ||f||^p``."""
    return domination_ratio(E, f, p, weight).ratio


def loglog_slope(eps, masses):
    """Least-squares slope of ``log mass`` against ``log eps`` over positive masses."""
    eps = np.asarray(eps, dtype=float)
    masses = np.asarray(masses, dtype=float)
    keep = masses > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(eps[keep]), np.log(masses[keep]), 1)[0])


@dataclass
class SweepResult:
    kind: str
    eps: list
    masses: list
    slope: float
    best_ratio: float
    best_eps: float
    monotone: bool
    indeterminate: int

    def to_dict(self):
        return dict(self.__dict__)


def bad_set_sweep(kind, f, p, weight, grid: DiscGrid | None = None, q=None, r=None, K=None,
                  nu=None, ks=range(1, 9), inner: DiscGrid | None = None) -> SweepResult:
    """Bad-set masses for ``eps = 2^-k``; ``kind`` is ``"kernel"`` or ``"local"``."""
    grid = grid if grid is not None else cached_grid(7, 32)
    eps = [2.0 ** -k for k in ks]
    if kind == "kernel":
        K = K if K is not None else KernelEvaluator(weight, closed_form=True)
        avg = kernel_averages(f, q, K, grid, inner)
        sets = [bad_set_kernel(f, p, q, e, weight, K, grid, averages=avg) for e in eps]
    elif kind == "local":
        avg = local_averages(f, p, nu if nu is not None else weight, r, grid)
        sets = [bad_set_local(f, p, nu, r, e, grid, averages=avg) for e in eps]
    else:
        raise ParameterError(f"unknown bad-set kind {kind!r}")
    masses = [bad_set_mass(E, f, p, weight) for E in sets]
    ratios = [domination_ratio(E.complement(), f, p, weight).ratio for E in sets]
    best = int(np.argmax(ratios))
    monotone = all(sets[i + 1].issubset(sets[i]) for i in range(len(sets) - 1))
    return SweepResult(kind, eps, masses, loglog_slope(eps, masses), ratios[best], eps[best],
                       monotone, sets[0].n_indeterminate())


# ------------------------------------------------------------ square condition

@dataclass
class SquareBound:
    delta: float
    per_level: list
    excluded: int


def square_lower_bound(G: GridSet, weight, depth) -> SquareBound:
    """``min omega(G cap S) / omega(S)`` over the dyadic family of levels ``0..depth``."""
    grid = G.grid
    if depth > grid.levels:
        raise ParameterError("depth exceeds the grid levels")
    masses = grid.weight_masses(weight)
    vals = np.vstack([masses * G.mask, masses])
    per_level, excluded = [], 0
    for k in range(depth + 1):
        anchors = dyadic_anchors(k, grid.angular_base)
        sums = grid.square_sums(vals, anchors)
        num, den = sums[0], sums[1]
        ok = den > NOISE_FLOOR
        excluded += int((~ok).sum())
        per_level.append(float(np.min(num[ok] / den[ok])) if ok.any() else math.nan)
    finite = [v for v in per_level if not math.isnan(v)]
    return SquareBound(min(finite) if finite else math.nan, per_level, excluded)


# ------------------------------------------------------------ test functions

@dataclass
class ConcentratingFunction:
    f: AnalyticFunction
    pre_norm: float
    omega_square: float
    a: complex
    m: float
    p: float


def omega_of_square(weight, a, grid: DiscGrid) -> float:
    if getattr(weight, "is_radial", False):
        # S(a) covers the fraction (1-|a|)/(2 pi) of each annulus beyond |a|
        r = abs(a)
        return float(weight.annulus_mass(r, 1.0)) * (1.0 - r) / (2.0 * math.pi)
    sums = grid.square_sums(grid.weight_masses(weight), [a])
    return float(sums[0])


def theorem8_test_function(a, m, p, weight, grid: DiscGrid | None = None, beta=None) -> ConcentratingFunction:
    """``((1-|a|)/(1 - conj(a) z))^{m/p} omega(S(a))^{-1/p}``, scaled to unit norm."""
    a = complex(a)
    if a == 0:
        raise ParameterError("test functions need a != 0")
    carleson_square(a)
    if not p > 0 or not m > 0:
        raise ParameterError("m and p must be positive")
    if beta is not None and not m > beta:
        raise ParameterError("m must exceed the fitted exponent")
    grid = grid if grid is not None else cached_grid()
    w_s = omega_of_square(weight, a, grid)
    if not w_s > 0:
        raise PreconditionError("omega(S(a)) = 0")
    r = abs(a)
    const = (1.0 - r) ** (m / p) * w_s ** (-1.0 / p)
    raw = AnalyticFunction(power_factors=((complex(np.conj(a)), -m / p),), const=const)
    pre = float(np.sum(raw.abs_power(p)(grid.z) * grid.weight_masses(weight))) ** (1.0 / p)
    f = AnalyticFunction(power_factors=raw.power_factors, const=const / pre)
    return ConcentratingFunction(f, pre, w_s, a, float(m), float(p))


def nested_anchors(a, max_n=None):
    """``a_n = (1 - 2^n (1 - |a|)) e^{i arg a}`` while ``a_n`` stays in (0, 1)."""
    a = complex(a)
    r = abs(a)
    unit = a / r
    out = []
    n = 0
    while 1.0 - 2.0 ** n * (1.0 - r) > 0 and (max_n is None or n <= max_n):
        out.append((1.0 - 2.0 ** n * (1.0 - r)) * unit)
        n += 1
    return out


def concentration_tails(tf: ConcentratingFunction, weight, grid: DiscGrid | None = None, max_n=None):
    """``int_{D minus S(a_n)} |f_a|^p omega / ||f_a||^p`` for the nested anchors."""
    grid = grid if grid is not None else cached_grid()
    vals = tf.f.abs_power(tf.p)(grid.z) * grid.weight_masses(weight)
    total = float(np.sum(vals))
    anchors = nested_anchors(tf.a, max_n)
    inside = grid.square_sums(vals, anchors)
    return [float(max(0.0, 1.0 - s / total)) for s in inside]

