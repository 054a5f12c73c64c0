"""Polar quadrature on the unit disc.

The grid is organized in dyadic rings ``[1 - 2^-k, 1 - 2^-(k+1))`` for
``k = 0..levels`` (the last ring reaches the boundary).  Ring ``k`` carries
``angular_base * 2^k`` equispaced angles and is split radially into
``radial_sub`` sub-rings (more in the first few rings), so cells stay roughly square and a dyadic
Carleson square of level ``k`` holds about ``angular_base / (2 pi)`` cells
per sub-ring.  Each node sits at the area midpoint
of its cell, ``r = sqrt((lo^2 + hi^2) / 2)``, which makes the rule exact for
integrands linear in ``|z|^2``.

Radial weights contribute exact per-cell masses (see
:meth:`DiscGrid.weight_masses`), which keeps boundary singularities such as
``(1 - |z|)^alpha`` with ``alpha`` in (-1, 0) integrable at any resolution.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericGuardError, ParameterError, ResourceError
from .geometry import mobius, mobius_derivative_abs2

DEFAULT_LEVELS = 12
DEFAULT_ANGULAR_BASE = 64
DEFAULT_NODE_CAP = 6_000_000
_MASS_CACHE_SIZE = 6
# rings k < INNER_REFINE get 2^(INNER_REFINE - k) times more sub-rings; they
# hold few angles, so this costs little and keeps the radial step small
INNER_REFINE = 4


def _ring_subdivisions(k, radial_sub):
    return radial_sub * 2 ** max(0, INNER_REFINE - k)


class DiscGrid:
    """Immutable node set with normalized cell areas.

    Attributes are flat numpy arrays ordered ring by ring, then sub-ring,
    then angle: ``z``, ``r``, ``theta``, ``area``, ``level`` (ring index) and
    ``subring`` (global sub-ring index).  Per sub-ring metadata lives in
    ``sub_lo``, ``sub_hi``, ``sub_radius``, ``sub_ring``, ``sub_start`` and
    ``sub_count``.
    """

    def __init__(self, levels, angular_base, radial_sub, breakpoints=()):
        self.levels = int(levels)
        self.angular_base = int(angular_base)
        self.radial_sub = int(radial_sub)
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))

        edges = [1.0 - 2.0 ** -k for k in range(self.levels + 1)] + [1.0]
        lo, hi, ring = [], [], []
        for k in range(self.levels + 1):
            a, b = edges[k], edges[k + 1]
            cuts = list(np.linspace(a, b, _ring_subdivisions(k, self.radial_sub) + 1))
            cuts += [t for t in self.breakpoints if a < t < b]
            cuts = sorted(set(cuts))
            lo += cuts[:-1]
            hi += cuts[1:]
            ring += [k] * (len(cuts) - 1)
        self.ring_edges = np.array(edges)
        self.sub_lo = np.array(lo)
        self.sub_hi = np.array(hi)
        self.sub_ring = np.array(ring, dtype=np.int64)
        self.sub_radius = np.sqrt(0.5 * (self.sub_lo ** 2 + self.sub_hi ** 2))
        self.sub_count = self.angular_base * 2 ** self.sub_ring
        self.sub_start = np.concatenate([[0], np.cumsum(self.sub_count)[:-1]])
        self.size = int(self.sub_count.sum())

        self.subring = np.repeat(np.arange(len(self.sub_lo)), self.sub_count)
        idx = np.arange(self.size) - self.sub_start[self.subring]
        n = self.sub_count[self.subring]
        self.theta = 2.0 * np.pi * (idx + 0.5) / n
        self.r = self.sub_radius[self.subring]
        self.z = self.r * np.exp(1j * self.theta)
        self.level = self.sub_ring[self.subring]
        self.area = ((self.sub_hi ** 2 - self.sub_lo ** 2) / self.sub_count)[self.subring]
        self._mass_cache = OrderedDict()
        for arr in (self.z, self.r, self.theta, self.area, self.level, self.subring):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"DiscGrid(levels={self.levels}, angular_base={self.angular_base}, "
                f"radial_sub={self.radial_sub}, nodes={self.size})")

    def params(self) -> dict:
        return {"levels": self.levels, "angular_base": self.angular_base,
                "radial_sub": self.radial_sub, "breakpoints": list(self.breakpoints),
                "nodes": self.size}

    def radial_masses(self, annulus_mass) -> np.ndarray:
        """Per-node masses from ``annulus_mass(lo, hi)`` (vectorized over sub-rings).

        ``annulus_mass`` must return the normalized mass of the annulus
        ``lo < |z| < hi``; each node receives its share ``1 / n`` of its sub-ring.
        """
        per_sub = np.asarray(annulus_mass(self.sub_lo, self.sub_hi), dtype=float)
        return (per_sub / self.sub_count)[self.subring]

    def weight_masses(self, weight) -> np.ndarray:
        """``int_cell omega dA`` for every cell; cached per weight object."""
        if weight is None:
            return self.area
        key = id(weight)
        hit = self._mass_cache.get(key)
        if hit is not None and hit[0] is weight:
            self._mass_cache.move_to_end(key)
            return hit[1]
        if getattr(weight, "is_radial", False):
            masses = self.radial_masses(weight.annulus_mass)
        else:
            masses = np.asarray(weight(self.z), dtype=float) * self.area
        if not np.all(np.isfinite(masses)):
            bad = int(np.flatnonzero(~np.isfinite(masses))[0])
            raise NumericGuardError(f"weight not finite near node {bad} at z={self.z[bad]:.6g}")
        masses.setflags(write=False)
        self._mass_cache[key] = (weight, masses)
        while len(self._mass_cache) > _MASS_CACHE_SIZE:
            self._mass_cache.popitem(last=False)
        return masses

    def locate(self, z) -> np.ndarray:
        """Index of the cell containing each point (vectorized)."""
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        if np.any(r >= 1.0):
            raise ParameterError("points must lie in the open disc")
        j = np.clip(np.searchsorted(self.sub_lo, r, side="right") - 1, 0, len(self.sub_lo) - 1)
        n = self.sub_count[j]
        theta = np.mod(np.angle(z), 2.0 * np.pi)
        i = np.minimum((theta / (2.0 * np.pi) * n).astype(np.int64), n - 1)
        return self.sub_start[j] + i

    def ring_mask(self, max_ring):
        """Nodes in rings ``< max_ring``."""
        return self.level < max_ring

    def radial_fraction(self, r_lo, r_hi=1.0) -> np.ndarray:
        """Fraction of each sub-ring's area lying in ``r_lo < |z| < r_hi``."""
        lo = np.maximum(self.sub_lo, r_lo)
        hi = np.minimum(self.sub_hi, r_hi)
        frac = (hi * hi - lo * lo) / (self.sub_hi ** 2 - self.sub_lo ** 2)
        return np.clip(frac, 0.0, 1.0)

    def square_fraction(self, anchor) -> np.ndarray:
        """Exact fraction of every cell covered by the Carleson square S(anchor)."""
        anchor = complex(anchor)
        if anchor == 0:
            return np.ones(self.size)
        rad = abs(anchor)
        half = (1.0 - rad) / 2.0
        rf = self.radial_fraction(rad)[self.subring]
        n = self.sub_count[self.subring]
        width = 2.0 * np.pi / n
        d = np.angle(np.exp(1j * (self.theta - math.atan2(anchor.imag, anchor.real))))
        overlap = np.minimum(d + width / 2, half) - np.maximum(d - width / 2, -half)
        return rf * np.clip(overlap / width, 0.0, 1.0)

    def square_ring_sums(self, values, anchors) -> np.ndarray:
        """Per-ring sums of cell ``values`` over Carleson squares.

        Each cell contributes its value times the exact fraction of its area
        covered by S(a) (cells and squares are both polar rectangles).
        ``values`` is ``(m, nodes)`` (or 1-D); the result has shape
        ``(m, len(anchors), levels + 1)``.  The anchor 0 is the whole disc.
        """
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        anchors = np.atleast_1d(np.asarray(anchors, dtype=complex))
        rad = np.abs(anchors)
        half = np.where(rad == 0, np.pi, (1.0 - rad) / 2.0)
        ang = np.mod(np.angle(anchors), 2.0 * np.pi)
        full = rad == 0
        out = np.zeros((vals.shape[0], anchors.size, self.levels + 1))
        for j in range(len(self.sub_lo)):
            lo, hi = self.sub_lo[j], self.sub_hi[j]
            rf = np.clip((hi * hi - np.maximum(lo, rad) ** 2) / (hi * hi - lo * lo), 0.0, 1.0)
            rf = np.where(full, 1.0, rf)
            if not np.any(rf > 0):
                continue
            s, n = self.sub_start[j], self.sub_count[j]
            tiled = np.tile(vals[:, s:s + n], 3)
            prefix = np.zeros((vals.shape[0], 3 * n + 1))
            prefix[:, 1:] = np.cumsum(tiled, axis=1)

            def cumulative(x):
                # integral of the piecewise-constant cell values up to x (cell units)
                i = np.clip(np.floor(x).astype(np.int64), 0, 3 * n - 1)
                return prefix[:, i] + (x - i) * tiled[:, i]

            x_lo = n * (ang - half) / (2.0 * np.pi) + n
            x_hi = n * (ang + half) / (2.0 * np.pi) + n
            part = cumulative(x_hi) - cumulative(x_lo)
            part = np.where(full, prefix[:, n][:, None], part)
            out[:, :, self.sub_ring[j]] += rf * part
        return out

    def square_sums(self, values, anchors, max_ring=None) -> np.ndarray:
        """Sum cell ``values`` over each S(a); rings ``>= max_ring`` are dropped."""
        values = np.asarray(values, dtype=float)
        rs = self.square_ring_sums(values, anchors)
        out = rs[:, :, :max_ring].sum(axis=2)
        return out[0] if values.ndim == 1 else out


def _default_radial_sub(angular_base):
    return max(1, int(round(angular_base / (4.0 * math.pi))))


def node_count(levels, angular_base, radial_sub=None) -> int:
    m = _default_radial_sub(angular_base) if radial_sub is None else radial_sub
    return sum(_ring_subdivisions(k, m) * angular_base * 2 ** k for k in range(levels + 1))


def make_grid(levels, angular_base, radial_sub=None, breakpoints=(),
              node_cap=DEFAULT_NODE_CAP) -> DiscGrid:
    """Build the dyadic polar grid.

    ``radial_sub`` defaults to ``round(angular_base / (4 pi))`` (at least 1),
    which keeps cells close to square.  Extra ``breakpoints`` split sub-rings
    so that discs ``|z| < t`` are resolved exactly.
    """
    if int(levels) < 1:
        raise ParameterError("levels must be >= 1")
    if int(angular_base) < 8:
        raise ParameterError("angular_base must be >= 8")
    m = _default_radial_sub(angular_base) if radial_sub is None else int(radial_sub)
    if m < 1:
        raise ParameterError("radial_sub must be >= 1")
    for b in breakpoints:
        if not 0.0 < b < 1.0:
            raise ParameterError("breakpoints must lie in (0, 1)")
    est = node_count(levels, angular_base, m) + len(breakpoints) * angular_base * 2 ** levels
    if est > node_cap:
        raise ResourceError(f"grid would have ~{est} nodes, above the cap {node_cap}")
    return DiscGrid(levels, angular_base, m, breakpoints)


@lru_cache(maxsize=4)
def cached_grid(levels=DEFAULT_LEVELS, angular_base=DEFAULT_ANGULAR_BASE, radial_sub=None,
                breakpoints=()) -> DiscGrid:
    """Memoized :func:`make_grid`; grids are immutable, so sharing is safe."""
    return make_grid(levels, angular_base, radial_sub, breakpoints)


@dataclass(frozen=True)
class Annulus:
    r_lo: float
    r_hi: float

    def contains(self, z):
        r = np.abs(np.asarray(z))
        return (r >= self.r_lo) & (r < self.r_hi)


def region_mask(region, grid: DiscGrid) -> np.ndarray:
    """Boolean node mask of ``region`` (None means the whole disc).

    Any object with a vectorized ``contains(z)`` works: CarlesonSquare,
    PseudoDisc, Annulus.  A GridSet contributes its own mask.
    """
    if region is None:
        return np.ones(grid.size, dtype=bool)
    mask = getattr(region, "mask", None)
    if mask is not None:
        if region.grid is not grid:
            raise ParameterError("GridSet belongs to a different grid")
        return np.asarray(mask, dtype=bool)
    return np.asarray(region.contains(grid.z), dtype=bool)


def _pseudo_disc_fraction(disc, grid: DiscGrid, sub=8):
    """Cell coverage of a pseudo-disc; boundary cells are sub-sampled ``sub x sub``."""
    c, rad = disc.euclidean_center, disc.euclidean_radius
    dist = np.abs(grid.z - c)
    lo = grid.sub_lo[grid.subring]
    hi = grid.sub_hi[grid.subring]
    diag = np.hypot(hi - lo, hi * 2.0 * np.pi / grid.sub_count[grid.subring])
    frac = (dist < rad).astype(float)
    edge = np.flatnonzero(np.abs(dist - rad) < diag)
    if edge.size:
        u = (np.arange(sub) + 0.5) / sub
        lo_e, hi_e = lo[edge][:, None], hi[edge][:, None]
        rr = np.sqrt(lo_e ** 2 + (hi_e ** 2 - lo_e ** 2) * u[None, :])
        width = (2.0 * np.pi / grid.sub_count[grid.subring[edge]])[:, None]
        tt = grid.theta[edge][:, None] + width * (u[None, :] - 0.5)
        pts = rr[:, :, None] * np.exp(1j * tt[:, None, :])
        frac[edge] = np.mean(np.abs(pts - c) < rad, axis=(1, 2))
    return frac


def region_weights(region, grid: DiscGrid) -> np.ndarray:
    """Fraction of every cell that lies in ``region``.

    Carleson squares and annuli are polar rectangles, so their coverage is
    exact; pseudo-discs are sub-sampled near their boundary; GridSets and any
    other object with ``contains`` use node membership.
    """
    from .geometry import CarlesonSquare, PseudoDisc

    if region is None:
        return np.ones(grid.size)
    if isinstance(region, CarlesonSquare):
        return grid.square_fraction(region.anchor)
    if isinstance(region, Annulus):
        return grid.radial_fraction(region.r_lo, region.r_hi)[grid.subring]
    if isinstance(region, PseudoDisc):
        return _pseudo_disc_fraction(region, grid)
    return region_mask(region, grid).astype(float)


def node_values(f, grid: DiscGrid, mask=None) -> np.ndarray:
    """Evaluate ``f`` (callable, array of node values or scalar) on the grid."""
    if callable(f):
        z = grid.z if mask is None else grid.z[mask]
        vals = np.asarray(f(z))
        if vals.ndim == 0:
            vals = np.full(z.shape, vals)
        return vals
    vals = np.asarray(f)
    if vals.ndim == 0:
        return np.full(grid.size if mask is None else int(mask.sum()), vals)
    if vals.shape[0] != grid.size:
        raise ParameterError("node value array does not match the grid")
    return vals if mask is None else vals[mask]


def integrate(f, weight=None, region=None, grid: DiscGrid = None) -> float:
    """``sum f(node) * (omega-mass of cell) * (cell fraction in region)``."""
    if grid is None:
        grid = cached_grid()
    frac = region_weights(region, grid)
    mask = frac > 0
    vals = node_values(f, grid, mask)
    masses = grid.weight_masses(weight)[mask] * frac[mask]
    bad = ~np.isfinite(vals)
    if bad.any():
        loc = grid.z[mask][np.flatnonzero(bad)[0]]
        raise NumericGuardError(f"integrand is not finite at z={loc:.6g}")
    total = np.sum(vals * masses)
    return complex(total) if np.iscomplexobj(total) else float(total)


def lp_norm(f, p, weight=None, grid: DiscGrid = None, region=None) -> float:
    """``(int |f|^p omega dA)^(1/p)``."""
    if p <= 0:
        raise ParameterError("p must be positive")
    if grid is None:
        grid = cached_grid()
    if callable(f):
        return integrate(lambda z: np.abs(f(z)) ** p, weight, region, grid) ** (1.0 / p)
    return integrate(np.abs(node_values(f, grid)) ** p, weight, region, grid) ** (1.0 / p)


@lru_cache(maxsize=16)
def _base_disc_rule(r, n_radial, n_angular):
    x, w = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * r * r * (x + 1.0)
    ws = 0.5 * r * r * w
    theta = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    nodes = (np.sqrt(s)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = np.repeat(ws / n_angular, n_angular)
    return nodes, weights


def disc_rule(r, n_radial=8, n_angular=32):
    """Product rule on ``D(0, r)``: Gauss-Legendre in ``|w|^2``, equispaced angles.

    Weights integrate against the normalized measure, so they sum to ``r^2``.
    """
    return _base_disc_rule(float(r), int(n_radial), int(n_angular))


def pseudo_disc_rule(centers, r, n_radial=8, n_angular=32):
    """Quadrature on Delta(z, r) for each center, by pulling back ``D(0, r)``.

    Returns ``(nodes, weights)`` of shape ``(len(centers), M)``; the weights
    integrate against ``dA`` (``phi_z`` maps D(0, r) onto Delta(z, r)).
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    w, wt = disc_rule(r, n_radial, n_angular)
    nodes = mobius(centers[:, None], w[None, :])
    weights = wt[None, :] * mobius_derivative_abs2(centers[:, None], w[None, :])
    return nodes, weights
