"""Exact geometry of the unit disc.

Points are plain Python/numpy complex numbers.  All areas are in the
normalized measure ``dA = dx dy / pi`` (so the disc has area 1); the
Euclidean area of a region is ``pi`` times its normalized area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def check_in_disc(z, name="z"):
    """Raise ParameterError unless every entry of ``z`` lies in the open disc."""
    arr = np.asarray(z)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) >= 1.0):
        raise ParameterError(f"{name} must lie in the open unit disc")
    return z


def mobius(a, z):
    """The disc automorphism ``(a - z) / (1 - conj(a) z)``; an involution."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = (a - z) / (1.0 - np.conj(a) * z)
    return out[()] if out.ndim == 0 else out


def mobius_derivative_abs2(a, z):
    """``|phi_a'(z)|**2 = (1 - |a|^2)^2 / |1 - conj(a) z|^4``."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    return (1.0 - abs(a) ** 2) ** 2 / np.abs(1.0 - np.conj(a) * z) ** 4


def pseudo_dist(z, w):
    """Pseudohyperbolic distance ``|phi_z(w)|``, vectorized over both arguments."""
    out = np.abs(mobius(z, w))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CarlesonSquare:
    """S(a) = {r e^{it}: |a| < r < 1, |arg(a e^{-it})| < (1-|a|)/2}.

    The anchor 0 is the root square, identified with the whole disc.
    """

    anchor: complex
    r_lo: float
    half_angle: float
    area: float

    @property
    def is_root(self) -> bool:
        return self.anchor == 0

    @property
    def euclidean_area(self) -> float:
        return math.pi * self.area

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        if self.is_root:
            return np.abs(z) < 1.0
        r = np.abs(z)
        dtheta = np.angle(self.anchor * np.exp(-1j * np.angle(z)))
        return (r > self.r_lo) & (r < 1.0) & (np.abs(dtheta) < self.half_angle)


def square_area(a) -> float:
    """Normalized area ``(1-|a|)(1-|a|^2)/(2 pi)`` of S(a); 1 for the root."""
    r = abs(a)
    if r == 0:
        return 1.0
    return (1.0 - r) * (1.0 - r * r) / (2.0 * math.pi)


def carleson_square(a) -> CarlesonSquare:
    a = complex(a)
    check_in_disc(a, "anchor")
    r = abs(a)
    if r == 0:
        return CarlesonSquare(0j, 0.0, math.pi, 1.0)
    return CarlesonSquare(a, r, (1.0 - r) / 2.0, square_area(a))


@dataclass(frozen=True)
class PseudoDisc:
    """Delta(z, r) = {w : |phi_z(w)| < r}, with its Euclidean description."""

    hyperbolic_center: complex
    radius: float
    euclidean_center: complex
    euclidean_radius: float

    @property
    def area(self) -> float:
        return self.euclidean_radius ** 2

    def contains(self, w):
        return pseudo_dist(self.hyperbolic_center, w) < self.radius


def pseudo_disc(z, r) -> PseudoDisc:
    z = complex(z)
    check_in_disc(z)
    if not 0.0 < r < 1.0:
        raise ParameterError("pseudo-disc radius must lie in (0, 1)")
    d = 1.0 - r * r * abs(z) ** 2
    center = (1.0 - r * r) * z / d
    radius = r * (1.0 - abs(z) ** 2) / d
    return PseudoDisc(z, float(r), complex(center), float(radius))


def in_nontangential(vertex, z):
    """Membership in Gamma(vertex) = {z : |theta - arg z| < (1 - |z|/|vertex|)/2}.

    ``arg 0`` is taken to be 0.  Angles are compared modulo 2 pi.
    """
    vertex = complex(vertex)
    if vertex == 0:
        raise ParameterError("non-tangential region needs a nonzero vertex")
    z = np.asarray(z, dtype=complex)
    r = abs(vertex)
    arg_z = np.where(z == 0, 0.0, np.angle(z))
    dtheta = np.angle(np.exp(1j * (math.atan2(vertex.imag, vertex.real) - arg_z)))
    out = np.abs(dtheta) < 0.5 * (1.0 - np.abs(z) / r)
    return bool(out) if out.ndim == 0 else out


def dyadic_anchors(level: int, angular_base: int) -> np.ndarray:
    """Anchors ``(1 - 2^-k) e^{2 pi i j / n_k}`` with ``n_k = angular_base 2^k``."""
    if level == 0:
        return np.zeros(1, dtype=complex)
    n = angular_base * 2 ** level
    return (1.0 - 2.0 ** -level) * np.exp(2j * np.pi * np.arange(n) / n)
