"""Discrete norms, moduli of continuity and ensemble statistics.

Everything in here is a deterministic function of its inputs: repeated
calls give bit-identical results, and ensemble reductions always run in
path-index order so that concurrent map + ordered reduce is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError
from .solvers import Field

__all__ = [
    "WeightPhi",
    "EnsembleStat",
    "RateFit",
    "weight_phi_eval",
    "bv_seminorm",
    "lp_norm",
    "weighted_l1_distance",
    "modulus_of_continuity",
    "mollified_increment",
    "besov_seminorm",
    "ensemble_mean",
    "fit_rate",
]


@dataclass(frozen=True)
class WeightPhi:
    """Exponentially decaying localization weight.

    phi(x) = 1 on |x| <= radius and exp(-decay * (|x| - radius)) outside,
    so phi is continuous, 0 < phi <= 1 and |phi'| <= decay * phi away from
    the matching circle.
    """

    radius: float
    decay: float

    def __post_init__(self):
        if self.radius <= 0 or self.decay <= 0:
            raise ContractError("WeightPhi needs radius > 0 and decay > 0")

    def __call__(self, x):
        return weight_phi_eval(self, x)

    def l1_mass(self, grid) -> float:
        """Discrete L1 mass of the weight on a grid (sum phi dx)."""
        return float(np.sum(self(grid.centers())) * grid.dx)


def weight_phi_eval(w: WeightPhi, x):
    """Evaluate the weight at x (scalar or array)."""
    ax = np.abs(np.asarray(x, dtype=float))
    return np.where(ax <= w.radius, 1.0, np.exp(-w.decay * (ax - w.radius)))


class EnsembleStat(NamedTuple):
    """Monte Carlo estimate of an expectation."""

    mean: float
    std_error: float
    n_samples: int


class RateFit(NamedTuple):
    """Least-squares line through (log h, log e)."""

    slope: float
    intercept: float
    max_residual: float


def bv_seminorm(f: Field) -> float:
    """Total variation sum_i |u_{i+1} - u_i| with periodic wrap."""
    v = f.values
    return float(np.sum(np.abs(np.roll(v, -1) - v)))


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm (sum |u_i|^p dx)^(1/p)."""
    if p < 1:
        raise ContractError(f"lp_norm needs p >= 1, got {p}")
    v = np.abs(f.values)
    return float(np.sum(v**p) * f.grid.dx) ** (1.0 / p)


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise ContractError("fields live on different grids")


def weighted_l1_distance(f: Field, g: Field, w: WeightPhi | None = None) -> float:
    """sum_i |f_i - g_i| phi(x_i) dx; phi = 1 when no weight is given."""
    _check_same_grid(f, g)
    diff = np.abs(f.values - g.values)
    if w is not None:
        diff = diff * weight_phi_eval(w, f.grid.centers())
    return float(np.sum(diff) * f.grid.dx)


def _admissible_shifts(dx: float, delta: float) -> int:
    # largest m with m*dx <= delta (tiny slack for float rounding)
    return int(math.floor(delta / dx + 1e-9))


def modulus_of_continuity(fields: Sequence[Field], delta: float, R: float) -> float:
    """sup over grid shifts |y| <= delta of the mean restricted L1 increment.

    Shifts are integer multiples of dx (both signs); the increment is
    integrated over K_R = {|x| <= R} and averaged over the ensemble.
    K_{R+delta} must fit inside the box so that periodic wrap never
    enters the restricted window.
    """
    if not fields:
        raise ContractError("modulus_of_continuity needs at least one field")
    grid = fields[0].grid
    dx = grid.dx
    if delta < dx:
        raise ContractError(f"delta={delta} below grid spacing dx={dx}: no resolvable shift")
    if -R - delta < grid.x_min or R + delta > grid.x_max:
        raise ContractError("K_{R+delta} must lie inside the box")
    m_max = _admissible_shifts(dx, delta)
    x = grid.centers()
    mask = np.abs(x) <= R
    stack = np.stack([f.values for f in fields])
    best = 0.0
    for m in range(1, m_max + 1):
        for shift in (m, -m):
            incr = np.abs(np.roll(stack, -shift, axis=1) - stack)[:, mask]
            val = float(np.mean(np.sum(incr, axis=1)) * dx)
            if val > best:
                best = val
    return best


def _bump_profile(s: np.ndarray) -> np.ndarray:
    # C^2 compactly supported bump (1-s^2)^3 on [-1, 1]
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = (1.0 - s[inside] ** 2) ** 3
    return out


def mollified_increment(f: Field, delta: float, w=None) -> float:
    """Double sum of |f(x+z) - f(x-z)| against a symmetric mollifier.

    The mollifier is the C^2 bump (1 - (z/delta)^2)^3 scaled to [-delta,
    delta] and normalized to unit discrete mass.  `w` is an optional
    spatial weight: a WeightPhi, an array of per-cell values, or None.
    """
    grid = f.grid
    dx = grid.dx
    if delta < dx:
        raise ContractError(f"delta={delta} below grid spacing dx={dx}")
    m_max = _admissible_shifts(dx, delta)
    shifts = np.arange(-m_max, m_max + 1)
    j = _bump_profile(shifts * dx / delta)
    j = j / (np.sum(j) * dx)  # unit discrete mass
    x = grid.centers()
    if w is None:
        phi = np.ones_like(x)
    elif isinstance(w, WeightPhi):
        phi = weight_phi_eval(w, x)
    else:
        phi = np.asarray(w, dtype=float)
    v = f.values
    total = 0.0
    for m, jm in zip(shifts, j):
        if jm == 0.0:
            continue
        incr = np.abs(np.roll(v, -m) - np.roll(v, m))
        total += jm * float(np.sum(incr * phi)) * dx * dx
    return total


def mollifier_mass(grid, delta: float) -> float:
    """Discrete mass of the mollifier used by mollified_increment."""
    m_max = _admissible_shifts(grid.dx, delta)
    shifts = np.arange(-m_max, m_max + 1)
    j = _bump_profile(shifts * grid.dx / delta)
    j = j / (np.sum(j) * grid.dx)
    return float(np.sum(j) * grid.dx)


def dyadic_deltas(dx: float, delta_max: float) -> list[float]:
    """Dyadic ladder dx, 2dx, 4dx, ... not exceeding delta_max."""
    if delta_max < dx:
        raise ContractError("delta_max below grid spacing")
    out = []
    d = dx
    while d <= delta_max * (1 + 1e-12):
        out.append(d)
        d *= 2.0
    return out


def besov_seminorm(f: Field, mu: float, delta_max: float) -> float:
    """Two-level supremum sup_delta delta^(-mu) sup_{|y|<=delta} int |f(.+y)-f|.

    The outer sup runs over the dyadic ladder from dx to delta_max, the
    inner one over integer grid shifts; the increment is integrated over
    the whole periodic box.
    """
    if not 0.0 < mu < 1.0:
        raise ContractError(f"besov exponent mu must lie in (0,1), got {mu}")
    grid = f.grid
    dx = grid.dx
    v = f.values
    best = 0.0
    inner = 0.0
    m_done = 0
    for d in dyadic_deltas(dx, delta_max):
        m_max = _admissible_shifts(dx, d)
        for m in range(m_done + 1, m_max + 1):
            up = float(np.sum(np.abs(np.roll(v, -m) - v)) * dx)
            dn = float(np.sum(np.abs(np.roll(v, m) - v)) * dx)
            inner = max(inner, up, dn)
        m_done = m_max
        best = max(best, d ** (-mu) * inner)
    return best


def ensemble_mean(samples: Iterable[float]) -> EnsembleStat:
    """Mean and standard error of a sample list, summed in index order."""
    arr = np.asarray(list(samples), dtype=float)
    n = arr.size
    if n == 0:
        raise ContractError("ensemble_mean needs at least one sample")
    mean = float(np.sum(arr) / n)
    if n == 1:
        return EnsembleStat(mean, float("nan"), 1)
    var = float(np.sum((arr - mean) ** 2) / (n - 1))
    return EnsembleStat(mean, math.sqrt(var / n), n)


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Fit e ~ C h^slope through (h, e) pairs in log-log coordinates."""
    if len(points) < 2:
        raise ContractError("fit_rate needs at least two points")
    h = np.array([p[0] for p in points], dtype=float)
    e = np.array([p[1] for p in points], dtype=float)
    if np.any(h <= 0) or np.any(e <= 0):
        raise ContractError("fit_rate needs h > 0 and e > 0")
    if np.unique(h).size < 2:
        raise ContractError("fit_rate needs at least two distinct h values")
    lh, le = np.log(h), np.log(e)
    slope, intercept = np.polyfit(lh, le, 1)
    resid = np.max(np.abs(le - (slope * lh + intercept)))
    return RateFit(float(slope), float(intercept), float(resid))
