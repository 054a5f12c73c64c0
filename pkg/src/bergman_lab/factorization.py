"""Factorization f = f1 * f2 with f1 in A^{p1}, f2 in A^{p2} and 1/p = 1/p1 + 1/p2.

Zeros of ``f`` are distributed at random between the two factors (each copy
goes to ``f1`` with probability ``p / p1``) and the zero-free part ``u`` is
split as ``u^{p/p1} * u^{p/p2}``.  The best of several trials is returned and
the norm chain is checked on the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import AnalyticFunction, ZeroSequence
from .errors import ConsistencyError, ParameterError, PreconditionError
from .geometry import mobius
from .quadrature import DiscGrid, cached_grid
from .zero_sets import log_h

RESIDUAL_TOL = 1e-8
CHAIN_RTOL = 1e-9
ZERO_EXCLUSION = 1e-6
DEFAULT_TRIALS = 64


def _check_exponents(p, p1, p2):
    if not (p > 0 and p1 > 0 and p2 > 0):
        raise ParameterError("exponents must be positive")
    if abs(1.0 / p - (1.0 / p1 + 1.0 / p2)) > 1e-12:
        raise ParameterError("need 1/p = 1/p1 + 1/p2")


def _log_horowitz(f: AnalyticFunction, p, q, z):
    c = f.canonical()
    u = c.zero_free_part()
    t = p / q
    out = p * u.log_modulus_parts(z)
    for a, m in zip(c.zeros.points, c.zeros.mults):
        x = np.abs(mobius(a, z))
        out = out + m * np.log(1.0 - t + t * x ** q)
    return out


def horowitz_g(f: AnalyticFunction, p, q, z):
    """``|f|^p prod_k (1 - p/q + (p/q)|phi_k|^q) / |phi_k|^p``, zeros cancelled."""
    if not 0 < p < q:
        raise ParameterError("need 0 < p < q")
    out = np.exp(_log_horowitz(f, p, q, np.asarray(z, dtype=complex)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class GDominance:
    max_ratio: float
    l1_ratio: float
    excluded: int


def g_dominance_check(f: AnalyticFunction, p, q, weight, grid: DiscGrid | None = None,
                      Z: ZeroSequence | None = None) -> GDominance:
    """``max g / h^p`` over grid nodes and ``||g||_{L^1} / ||f||^p``."""
    if not 0 < p < q:
        raise ParameterError("need 0 < p < q")
    grid = grid if grid is not None else cached_grid()
    Z = f.zero_set() if Z is None else Z
    z = grid.z
    near = np.zeros(z.size, dtype=bool)
    for a in Z.points:
        near |= np.abs(mobius(a, z)) < ZERO_EXCLUSION
    lg = _log_horowitz(f, p, q, z)
    lh = log_h(f, Z, z)
    ratio = np.exp(lg - p * lh)[~near]
    masses = grid.weight_masses(weight)
    l1 = float(np.sum(np.exp(lg) * masses))
    nf = float(np.sum(np.exp(p * f.log_modulus_parts(z)) * masses))
    return GDominance(float(np.max(ratio)), l1 / nf, int(near.sum()))


@dataclass
class Chain:
    """``||f||^p <= ||f1||^p ||f2||^p <= (p/p1)||f1||^p1 + (p/p2)||f2||^p2 = C ||f||^p``."""

    f_norm_p: float
    product: float
    young_middle: float
    measured_C: float
    holder_ok: bool
    young_ok: bool


def _chain_from_norms(n_f, n1, n2, p, p1, p2, rtol=CHAIN_RTOL) -> Chain:
    # n_f = ||f||_p^p, n1 = ||f1||_{p1}^{p1}, n2 = ||f2||_{p2}^{p2}
    product = n1 ** (p / p1) * n2 ** (p / p2)
    middle = (p / p1) * n1 + (p / p2) * n2
    holder = n_f <= product * (1.0 + rtol)
    young = product <= middle * (1.0 + rtol)
    return Chain(n_f, product, middle, middle / n_f, bool(holder), bool(young))


def chain_check(f, f1, f2, p, p1, p2, weight, grid: DiscGrid | None = None) -> Chain:
    """Norm chain for a given pair; raises if ``f1 f2 != f`` or an exact inequality fails."""
    _check_exponents(p, p1, p2)
    grid = grid if grid is not None else cached_grid()
    z = grid.z
    fv = f(z)
    resid = float(np.max(np.abs(f1(z) * f2(z) - fv)))
    if resid > RESIDUAL_TOL:
        raise PreconditionError(f"f1 f2 differs from f by {resid:.3g} on the grid")
    masses = grid.weight_masses(weight)
    n_f = float(np.sum(np.abs(fv) ** p * masses))
    n1 = float(np.sum(np.exp(p1 * f1.log_modulus_parts(z)) * masses))
    n2 = float(np.sum(np.exp(p2 * f2.log_modulus_parts(z)) * masses))
    ch = _chain_from_norms(n_f, n1, n2, p, p1, p2)
    if not (ch.holder_ok and ch.young_ok):
        raise ConsistencyError(f"norm chain violated: {ch}")
    return ch


@dataclass
class FactorizationResult:
    f1: AnalyticFunction
    f2: AnalyticFunction
    norms: tuple
    chain: Chain
    measured_C: float
    trials_used: int
    residual: float
    best_trial: int
    seed: int | None
    objectives: list = field(default_factory=list)
    all_trials_chain_ok: bool = True

    def to_dict(self):
        return {
            "f1": self.f1.describe(),
            "f2": self.f2.describe(),
            "norms": list(self.norms),
            "chain": {
                "f_norm_p": self.chain.f_norm_p,
                "product": self.chain.product,
                "young_middle": self.chain.young_middle,
                "measured_C": self.chain.measured_C,
                "holder_ok": self.chain.holder_ok,
                "young_ok": self.chain.young_ok,
            },
            "measured_C": self.measured_C,
            "trials_used": self.trials_used,
            "best_trial": self.best_trial,
            "residual": self.residual,
            "seed": self.seed,
            "objectives": list(self.objectives),
            "all_trials_chain_ok": self.all_trials_chain_ok,
        }


def split_factorize(f: AnalyticFunction, p, p1, p2, weight, trials=DEFAULT_TRIALS,
                    grid: DiscGrid | None = None, seed=None) -> FactorizationResult:
    """Best-of-``trials`` random split of the zeros of ``f``."""
    _check_exponents(p, p1, p2)
    if int(trials) < 1:
        raise ParameterError("trials must be at least 1")
    grid = grid if grid is not None else cached_grid()
    c = f.canonical()
    u = c.zero_free_part()
    zeros = c.zeros.expanded()
    t1, t2 = p / p1, p / p2
    z = grid.z
    masses = grid.weight_masses(weight)
    log_u = u.log_modulus_parts(z)
    with np.errstate(divide="ignore"):
        log_phi = np.array([np.log(np.abs(mobius(a, z))) for a in zeros]).reshape(len(zeros), z.size)
    log_f = log_u + log_phi.sum(axis=0)
    n_f = float(np.sum(np.exp(p * log_f) * masses))

    rng = np.random.default_rng(seed)
    n_trials = 1 if zeros.size == 0 else int(trials)
    masks = rng.random((n_trials, zeros.size)) < t1
    objectives, norms = [], []
    all_ok = True
    for mask in masks:
        l1 = t1 * log_u + log_phi[mask].sum(axis=0)
        l2 = t2 * log_u + log_phi[~mask].sum(axis=0)
        n1 = float(np.sum(np.exp(p1 * l1) * masses))
        n2 = float(np.sum(np.exp(p2 * l2) * masses))
        ch = _chain_from_norms(n_f, n1, n2, p, p1, p2)
        all_ok &= ch.holder_ok and ch.young_ok
        objectives.append(ch.young_middle)
        norms.append((n1, n2))
    if not all_ok:
        raise ConsistencyError("Hoelder or Young inequality failed on a trial")
    best = int(np.argmin(objectives))   # first index on ties
    mask = masks[best]
    f1 = u.power(t1).with_zeros(ZeroSequence.from_points(zeros[mask]))
    f2 = u.power(t2).with_zeros(ZeroSequence.from_points(zeros[~mask]))
    resid = float(np.max(np.abs(f1(z) * f2(z) - f(z))))
    if resid > RESIDUAL_TOL:
        raise ConsistencyError(f"reconstruction residual {resid:.3g} exceeds {RESIDUAL_TOL:g}")
    n1, n2 = norms[best]
    ch = _chain_from_norms(n_f, n1, n2, p, p1, p2)
    return FactorizationResult(
        f1, f2, (n1 ** (1.0 / p1), n2 ** (1.0 / p2), n_f ** (1.0 / p)), ch, ch.measured_C,
        n_trials, resid, best, seed, objectives, all_ok)
