"""Carleson and sampling measures: the maximal function M_omega(mu), the k_r
density, the sampling pipeline, the difference estimate and the weak-limit
demonstration for sequences of measures."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .analytic import AnalyticFunction
from .dominating import GridSet, domination_ratio, omega_of_square, square_lower_bound
from .errors import ParameterError, PreconditionError, ResourceError
from .geometry import CarlesonSquare, carleson_square, dyadic_anchors, pseudo_dist
from .quadrature import DiscGrid, cached_grid, pseudo_disc_rule, region_weights
from .weights import GeneralWeight

NOISE_FLOOR = 1e-300
NORM_FLOOR = 1e-12
DEFAULT_COST_CAP = 5e8


def _support_indicator(support, z):
    if support is None:
        return np.ones(np.shape(z))
    mask = getattr(support, "mask", None)
    if mask is not None:
        z = np.asarray(z, dtype=complex)
        return np.asarray(mask, dtype=float)[support.grid.locate(z.ravel())].reshape(z.shape)
    if callable(support) and not hasattr(support, "contains"):
        return np.asarray(support(z), dtype=float)
    return np.asarray(support.contains(z), dtype=float)


@dataclass(frozen=True)
class DiscMeasure:
    """``scale * density * 1_support dA`` plus finitely many atoms.

    ``density`` is a weight (or None for no absolutely continuous part);
    ``support`` is a region understood by :func:`region_weights` (Annulus,
    CarlesonSquare, PseudoDisc, GridSet, or a predicate).
    """

    atoms: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: object = None
    scale: float = 1.0
    support: object = None

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=complex))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if atoms.shape != masses.shape:
            raise ParameterError("atoms and masses differ in length")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ParameterError("atom masses must be finite and nonnegative")
        if np.any(np.abs(atoms) >= 1):
            raise ParameterError("atoms must lie in the open disc")
        if not self.scale >= 0:
            raise ParameterError("scale must be nonnegative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_weight(cls, weight, scale=1.0, support=None):
        return cls(density=weight, scale=float(scale), support=support)

    @classmethod
    def from_atoms(cls, points, masses):
        return cls(np.asarray(points, dtype=complex), np.asarray(masses, dtype=float))

    @classmethod
    def zero(cls):
        return cls()

    def scaled(self, c) -> "DiscMeasure":
        return replace(self, masses=self.masses * c, scale=self.scale * c)

    def restricted(self, support) -> "DiscMeasure":
        keep = _support_indicator(support, self.atoms) > 0 if self.atoms.size else np.zeros(0, bool)
        return DiscMeasure(self.atoms[keep], self.masses[keep], self.density, self.scale, support)

    # -- evaluation
    def cell_masses(self, grid: DiscGrid, include_atoms=False) -> np.ndarray:
        """Absolutely continuous mass of every cell (atoms binned when asked)."""
        out = np.zeros(grid.size)
        if self.density is not None and self.scale > 0:
            out = self.scale * grid.weight_masses(self.density) * region_weights(self.support, grid)
        if include_atoms and self.atoms.size:
            out = out + np.bincount(grid.locate(self.atoms), weights=self.masses,
                                    minlength=grid.size)
        return out

    def integrate(self, g, grid: DiscGrid) -> float:
        """``int g dmu`` with ``g`` a vectorized callable."""
        total = 0.0
        if self.density is not None and self.scale > 0:
            cm = self.cell_masses(grid)
            keep = cm > 0
            total += float(np.sum(np.asarray(g(grid.z[keep])) * cm[keep]))
        if self.atoms.size:
            total += float(np.sum(np.asarray(g(self.atoms)) * self.masses))
        return total

    def total_mass(self, grid: DiscGrid) -> float:
        return float(self.cell_masses(grid).sum() + self.masses.sum())

    def square_measures(self, anchors, grid: DiscGrid) -> np.ndarray:
        """``mu(S(a))`` for every anchor (atoms exactly, density by grid coverage)."""
        anchors = np.atleast_1d(np.asarray(anchors, dtype=complex))
        out = np.zeros(anchors.size)
        if self.density is not None and self.scale > 0:
            out += grid.square_sums(self.cell_masses(grid), anchors)
        if self.atoms.size:
            for i, a in enumerate(anchors):
                out[i] += float(np.sum(self.masses[carleson_square(a).contains(self.atoms)]))
        return out

    def pseudo_disc_integrals(self, g, centers, radius, n_radial=8, n_angular=32):
        """``(int_Delta g dmu, mu(Delta))`` for ``Delta = Delta(center, radius)``."""
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        num = np.zeros(centers.size)
        den = np.zeros(centers.size)
        if self.density is not None and self.scale > 0:
            nodes, wts = pseudo_disc_rule(centers, radius, n_radial, n_angular)
            dens = self.scale * self.density(nodes) * _support_indicator(self.support, nodes) * wts
            den += dens.sum(axis=1)
            num += (np.asarray(g(nodes)) * dens).sum(axis=1) if g is not None else dens.sum(axis=1)
        if self.atoms.size:
            inside = pseudo_dist(centers[:, None], self.atoms[None, :]) < radius
            den += inside @ self.masses
            gv = np.asarray(g(self.atoms)) if g is not None else np.ones(self.atoms.size)
            num += inside @ (gv * self.masses)
        return num, den

    # -- I/O
    def atoms_to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["re", "im", "mass"])
            for a, m in zip(self.atoms, self.masses):
                w.writerow([repr(float(a.real)), repr(float(a.imag)), repr(float(m))])

    @classmethod
    def from_csv(cls, atoms_path=None, density_path=None):
        """Atoms from rows ``re, im, mass``; density from rows ``re, im, value``.

        A density table is extended to the disc by nearest-neighbour lookup.
        """
        pts, ms = _read_triples(atoms_path) if atoms_path else (np.zeros(0, complex), np.zeros(0))
        density = None
        if density_path:
            dp, dv = _read_triples(density_path)
            if dp.size == 0:
                raise ParameterError("density table is empty")
            if np.any(dv < 0):
                raise ParameterError("density values must be nonnegative")
            tree = cKDTree(np.column_stack([dp.real, dp.imag]))

            def table(z, tree=tree, dv=dv):
                z = np.asarray(z, dtype=complex)
                _, idx = tree.query(np.column_stack([z.real.ravel(), z.imag.ravel()]))
                return dv[idx].reshape(z.shape)

            density = GeneralWeight(f"table:{density_path}", table)
        return cls(pts, ms, density)


def _read_triples(path):
    pts, vals = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                x, y, v = float(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError):
                if i > 0 or pts:   # only a leading header may fail to parse
                    raise ParameterError(f"bad row {row!r} in {path}")
                continue
            pts.append(complex(x, y))
            vals.append(v)
    return np.array(pts, dtype=complex), np.array(vals, dtype=float)


# ------------------------------------------------------------ Carleson norms

@dataclass
class CarlesonReport:
    carleson_norm: float
    argmax_square: CarlesonSquare | None
    per_level: list = field(default_factory=list)
    k_r_summary: dict | None = None
    sampling_bounds: tuple | None = None
    sampling_constant: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        sq = self.argmax_square
        return {
            "carleson_norm": self.carleson_norm,
            "argmax_square": None if sq is None else {
                "anchor": [sq.anchor.real, sq.anchor.imag], "area": sq.area},
            "per_level": list(self.per_level),
            "k_r_summary": self.k_r_summary,
            "sampling_bounds": None if self.sampling_bounds is None else list(self.sampling_bounds),
            "sampling_constant": self.sampling_constant,
            **self.extras,
        }


def _omega_squares(weight, anchors, grid):
    return grid.square_sums(grid.weight_masses(weight), anchors)


def maximal_fn(mu: DiscMeasure, weight, z, depth, grid: DiscGrid | None = None) -> float:
    """Max of ``mu(S) / omega(S)`` over dyadic squares containing ``z`` (root included)."""
    grid = grid if grid is not None else cached_grid()
    z = complex(z)
    best = -math.inf
    for k in range(depth + 1):
        anchors = dyadic_anchors(k, grid.angular_base)
        if k > 0:
            anchors = np.array([a for a in anchors if carleson_square(a).contains(z)], dtype=complex)
            if anchors.size == 0:
                continue
        den = _omega_squares(weight, anchors, grid)
        num = mu.square_measures(anchors, grid)
        ok = den > NOISE_FLOOR
        if ok.any():
            best = max(best, float(np.max(num[ok] / den[ok])))
    return best


def carleson_norm(mu: DiscMeasure, weight, depth, grid: DiscGrid | None = None) -> CarlesonReport:
    """``sup mu(S) / omega(S)`` over the dyadic family of levels ``0..depth``."""
    grid = grid if grid is not None else cached_grid()
    if depth > grid.levels:
        raise ParameterError("depth exceeds the grid levels")
    best, arg, per_level = -math.inf, None, []
    for k in range(depth + 1):
        anchors = dyadic_anchors(k, grid.angular_base)
        den = _omega_squares(weight, anchors, grid)
        num = mu.square_measures(anchors, grid)
        ok = den > NOISE_FLOOR
        if not ok.any():
            per_level.append(math.nan)
            continue
        ratio = np.where(ok, num / np.where(ok, den, 1.0), -math.inf)
        i = int(np.argmax(ratio))
        per_level.append(float(ratio[i]))
        if ratio[i] > best:
            best, arg = float(ratio[i]), carleson_square(anchors[i])
    return CarlesonReport(best, arg, per_level)


def k_r_field(mu: DiscMeasure, weight, r, grid: DiscGrid | None = None, k_star=False,
              n_radial=8, n_angular=32):
    """``k_r(z) = mu(Delta(z, r)) / omega(Delta(z, r))`` at every node.

    With ``k_star`` the denominator is ``omega(S(z))``.  Returns
    ``(values, indeterminate)``; indeterminate nodes have a vanishing denominator.
    """
    if not 0 < r < 1:
        raise ParameterError("r must lie in (0, 1)")
    grid = grid if grid is not None else cached_grid(7, 32)
    omega_mu = DiscMeasure.from_weight(weight)
    out = np.empty(grid.size)
    chunk = 20000
    for s in range(0, grid.size, chunk):
        zc = grid.z[s:s + chunk]
        _, num = mu.pseudo_disc_integrals(None, zc, r, n_radial, n_angular)
        if k_star:
            den = np.array([omega_of_square(weight, a, grid) if a != 0 else
                            float(np.sum(grid.weight_masses(weight))) for a in zc])
        else:
            _, den = omega_mu.pseudo_disc_integrals(None, zc, r, n_radial, n_angular)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[s:s + chunk] = np.where(den > NOISE_FLOOR, num / den, np.nan)
    return out, ~np.isfinite(out)


def pseudo_disc_lower_bound(G: GridSet, r, centers=None, n_radial=8, n_angular=32) -> float:
    """``min_z |G cap Delta(z, r)| / |Delta(z, r)|`` over ``centers`` (default: G's nodes)."""
    grid = G.grid
    centers = grid.z if centers is None else np.asarray(centers, dtype=complex)
    best = math.inf
    for s in range(0, centers.size, 20000):
        nodes, wts = pseudo_disc_rule(centers[s:s + 20000], r, n_radial, n_angular)
        inside = G.mask[grid.locate(nodes)]
        best = min(best, float(np.min((inside * wts).sum(axis=1) / wts.sum(axis=1))))
    return best


def _norm_p(f: AnalyticFunction, p, weight, grid):
    return float(np.sum(f.abs_power(p)(grid.z) * grid.weight_masses(weight)))


def sampling_pipeline(mu: DiscMeasure, weight, p, r, eps, family, grid: DiscGrid | None = None,
                      depth=6, branch="doubling", k_star=False) -> CarlesonReport:
    """Carleson norm, the set ``G = {k_r > eps ||M_omega(mu)||}`` and sampling bounds.

    ``branch="doubling"`` checks G through Carleson squares; ``"c_infinity"``
    through pseudo-discs.
    """
    if branch not in ("doubling", "c_infinity"):
        raise ParameterError(f"unknown branch {branch!r}")
    if not p > 0:
        raise ParameterError("p must be positive")
    grid = grid if grid is not None else cached_grid(7, 32)
    rep = carleson_norm(mu, weight, depth, grid)
    if not math.isfinite(rep.carleson_norm):
        raise PreconditionError("Carleson norm is not finite")
    k, indet = k_r_field(mu, weight, r, grid, k_star=k_star)
    G = GridSet(grid, k > eps * rep.carleson_norm, indet)
    if branch == "doubling":
        delta = square_lower_bound(G, weight, depth).delta
    else:
        delta = pseudo_disc_lower_bound(G, r)
    ratios, upper, lower, excluded = [], -math.inf, math.inf, 0
    for f in family:
        nf = _norm_p(f, p, weight, grid)
        if not nf > NORM_FLOOR:
            excluded += 1
            continue
        ratios.append(domination_ratio(G, f, p, weight).ratio)
        val = mu.integrate(f.abs_power(p), grid) / nf
        lower, upper = min(lower, val), max(upper, val)
    if not ratios:
        raise PreconditionError("every family member has a negligible norm")
    kf = k[np.isfinite(k)]
    rep.k_r_summary = {"min": float(kf.min()) if kf.size else None,
                       "max": float(kf.max()) if kf.size else None,
                       "indeterminate": int(indet.sum())}
    rep.sampling_bounds = (lower, upper)
    rep.sampling_constant = max(upper, 1.0 / lower) if lower > 0 else math.inf
    rep.extras = {"G_fraction": G.measure(weight) / float(np.sum(grid.weight_masses(weight))),
                  "G_delta": delta, "branch": branch, "domination_ratios": ratios,
                  "excluded_family_members": excluded, "epsilon": eps, "r": r}
    return rep


# ------------------------------------------------------------ difference estimate

def difference_estimate(mu: DiscMeasure, nu: DiscMeasure, weight, f: AnalyticFunction, p, r, R,
                        grid: DiscGrid | None = None, n_radial=8, n_angular=32,
                        cost_cap=DEFAULT_COST_CAP, check_depth=5) -> float:
    """``LHS / (r^p ||f||^p)`` with
    ``LHS = int ( int_{Delta(zeta, r)} |f(z) - f(zeta)|^p dnu(z) ) dmu(zeta) / omega(Delta(zeta, r))``.
    """
    if not 0 < r < R / 2.0 or R / 2.0 > 0.25:
        raise ParameterError("need 0 < r < R/2 <= 1/4")
    grid = grid if grid is not None else cached_grid(7, 32)
    cost = (grid.size + mu.atoms.size) * (n_radial * n_angular + nu.atoms.size)
    if cost > cost_cap:
        raise ResourceError(f"double integral needs {cost:.3g} evaluations (cap {cost_cap:.3g})")
    check = carleson_norm(nu, weight, min(check_depth, grid.levels), grid).carleson_norm
    if not math.isfinite(check):
        raise PreconditionError("nu(S) is not controlled by omega(S)")
    omega_mu = DiscMeasure.from_weight(weight)

    def inner(zeta):
        out = np.empty(zeta.size)
        for s in range(0, zeta.size, 20000):
            zc = zeta[s:s + 20000]
            fz = f(zc)
            nodes, wts = pseudo_disc_rule(zc, r, n_radial, n_angular)
            acc = np.zeros(zc.size)
            if nu.density is not None and nu.scale > 0:
                dens = nu.scale * nu.density(nodes) * _support_indicator(nu.support, nodes) * wts
                acc += np.sum(np.abs(f(nodes) - fz[:, None]) ** p * dens, axis=1)
            if nu.atoms.size:
                inside = pseudo_dist(zc[:, None], nu.atoms[None, :]) < r
                acc += np.sum(inside * np.abs(f(nu.atoms)[None, :] - fz[:, None]) ** p
                              * nu.masses[None, :], axis=1)
            _, den = omega_mu.pseudo_disc_integrals(None, zc, r, n_radial, n_angular)
            with np.errstate(invalid="ignore", divide="ignore"):
                out[s:s + 20000] = np.where(den > NOISE_FLOOR, acc / den, 0.0)
        return out

    lhs = 0.0
    if mu.density is not None and mu.scale > 0:
        cm = mu.cell_masses(grid)
        keep = cm > 0
        lhs += float(np.sum(inner(grid.z[keep]) * cm[keep]))
    if mu.atoms.size:
        lhs += float(np.sum(inner(mu.atoms) * mu.masses))
    nf = _norm_p(f, p, weight, grid)
    if not nf > NORM_FLOOR:
        raise PreconditionError("f has negligible norm")
    return lhs / (r ** p * nf)


# ------------------------------------------------------------ weak limits

@dataclass
class WeakLimitReport:
    discrepancies: list
    monotone: bool
    eventually_monotone_from: int | None
    carleson_norms: list
    embedding_ratios: list
    liminf_embedding: float
    limit_embedding: float
    limit_kind: str

    def to_dict(self):
        return dict(self.__dict__)


def weak_limit_demo(mu_seq, weight, p, f: AnalyticFunction, grid: DiscGrid | None = None,
                    limit: DiscMeasure | None = None, depth=5, norm_ratio_cap=1e6) -> WeakLimitReport:
    """Compare ``int |f|^p dmu_n`` with ``int |f|^p dmu`` for a limit measure.

    Without an explicit ``limit`` the candidate is the cell-wise average of the
    second half of the sequence (atoms binned into cells).
    """
    if not mu_seq:
        raise ParameterError("empty measure sequence")
    grid = grid if grid is not None else cached_grid(8, 32)
    norms = [carleson_norm(m, weight, min(depth, grid.levels), grid).carleson_norm for m in mu_seq]
    finite = [c for c in norms if math.isfinite(c)]
    if len(finite) < len(norms) or max(finite) > norm_ratio_cap * max(min(finite), NOISE_FLOOR):
        raise PreconditionError("Carleson norms of the sequence are not uniformly bounded")
    g = f.abs_power(p)
    vals = [m.integrate(g, grid) for m in mu_seq]
    if limit is not None:
        lim_val = limit.integrate(g, grid)
        kind = "explicit"
    else:
        tail = mu_seq[len(mu_seq) // 2:]
        cells = np.mean([m.cell_masses(grid, include_atoms=True) for m in tail], axis=0)
        lim_val = float(np.sum(g(grid.z) * cells))
        kind = "cesaro-tail"
    disc = [abs(v - lim_val) for v in vals]
    monotone = all(disc[i + 1] <= disc[i] for i in range(len(disc) - 1))
    start = None
    for i in range(len(disc)):
        if all(disc[j + 1] <= disc[j] for j in range(i, len(disc) - 1)):
            start = i
            break
    nf = _norm_p(f, p, weight, grid)
    emb = [v / nf for v in vals]
    tail_emb = emb[len(emb) // 2:]
    return WeakLimitReport(disc, monotone, start, norms, emb, float(min(tail_emb)),
                           lim_val / nf, kind)
