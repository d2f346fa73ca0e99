"""Levy jump measures, jump coefficients and coupled path sampling.

Only jumps with magnitude >= a truncation cut kappa are simulated; they
are paired with the matching compensator drift so the truncated dynamics
stays a martingale.  The mass discarded below the cut is reported as the
neglected-variance proxy int_{|z|<kappa} (|z| ^ 1)^2 nu(dz).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy.integrate import quad

from .errors import ContractError, NumericalError, ValidationError

__all__ = [
    "AtomicMeasure",
    "PowerLawMeasure",
    "LevyMeasure",
    "JumpCoefficient",
    "JumpPath",
    "SeedDerivation",
    "SmallJumpCheck",
    "small_jump_check",
    "truncated_intensity",
    "sample_path",
    "compensator_integral",
    "compensator_on_grid",
    "validate_coefficient",
]

# Nodes per side for the fixed Gauss-Legendre rule on the truncated
# support of a density measure.  The restricted density is smooth, so
# this is far beyond what the desk-scale tolerances require; the scalar
# compensator_integral additionally verifies convergence by doubling.
DENSITY_QUAD_NODES = 128

# Auto-selected cuts keep the neglected-variance proxy below this
# fraction of the retained small-jump integral.
NEGLECTED_FRACTION = 1e-4


class SmallJumpCheck(NamedTuple):
    """Result of the A4'-style integrability check."""

    integral: float  # int (1 ^ z^2) nu(dz) over the full support
    neglected: float  # int_{|z|<cut} (|z| ^ 1)^2 nu(dz)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of point masses w_i at marks z_i (all |z_i| > 0, w_i > 0)."""

    atoms: tuple[tuple[float, float], ...]
    cut: float | None = None  # truncation cut; None selects one automatically

    def __post_init__(self):
        object.__setattr__(
            self, "atoms", tuple((float(z), float(w)) for z, w in self.atoms)
        )
        if not self.atoms:
            raise ValidationError("atomic measure needs at least one atom")
        for z, w in self.atoms:
            if w <= 0:
                raise ValidationError(f"atom weight must be positive, got w={w}")
            if z == 0 or not math.isfinite(z):
                raise ValidationError(f"atom mark must be finite and nonzero, got z={z}")
        if self.cut is not None and self.cut <= 0:
            raise ValidationError("truncation cut must be positive")

    @property
    def truncation_cut(self) -> float:
        if self.cut is not None:
            return self.cut
        # half the smallest mark keeps every atom and neglects nothing
        return 0.5 * min(abs(z) for z, _ in self.atoms)

    def small_jump_integral(self) -> float:
        return sum(w * min(1.0, z * z) for z, w in self.atoms)

    def neglected_below(self, kappa: float) -> float:
        return sum(
            w * min(1.0, abs(z)) ** 2 for z, w in self.atoms if abs(z) < kappa
        )

    def intensity_above(self, kappa: float) -> float:
        return sum(w for z, w in self.atoms if abs(z) >= kappa)

    def quad_atoms(self, kappa: float):
        """Marks and weights representing nu restricted to |z| >= kappa."""
        pairs = [(z, w) for z, w in self.atoms if abs(z) >= kappa]
        z = np.array([p[0] for p in pairs])
        w = np.array([p[1] for p in pairs])
        return z, w

    def sample_marks(self, rng: np.random.Generator, size: int, kappa: float):
        z, w = self.quad_atoms(kappa)
        if z.size == 0:
            raise ContractError(f"no atoms at or above the cut kappa={kappa}")
        idx = rng.choice(z.size, size=size, p=w / w.sum())
        return z[idx]

    def integrate(self, fn, z_min: float = 0.0) -> float:
        """Exact sum of fn against nu restricted to |z| >= z_min."""
        return float(
            sum(w * float(fn(z)) for z, w in self.atoms if abs(z) >= z_min)
        )


@dataclass(frozen=True)
class PowerLawMeasure:
    """Density c |z|^(-1-alpha) on [z_min, z_max] (one side or both).

    alpha in (0, 2) so that int (1 ^ z^2) nu(dz) is finite even when the
    support touches z = 0 (A4'-type singularity).  With symmetric=True
    the same density sits on both signs.
    """

    alpha: float
    scale: float = 1.0
    z_min: float = 0.0
    z_max: float = 1.0
    symmetric: bool = False
    cut: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValidationError(
                f"alpha={self.alpha}: small-jump integral diverges outside (0, 2)"
            )
        if self.scale <= 0:
            raise ValidationError(f"scale must be positive, got {self.scale}")
        if self.z_min < 0 or self.z_max <= self.z_min:
            raise ValidationError("support needs 0 <= z_min < z_max")
        if self.cut is not None and self.cut <= 0:
            raise ValidationError("truncation cut must be positive")

    @property
    def sides(self) -> int:
        return 2 if self.symmetric else 1

    def _tail_mass(self, a: float, b: float) -> float:
        # per-side nu([a, b]) for 0 < a <= b
        if a >= b:
            return 0.0
        return (self.scale / self.alpha) * (a**-self.alpha - b**-self.alpha)

    def _moment2(self, a: float, b: float) -> float:
        # per-side int_a^b z^2 nu(dz); finite down to a = 0 since alpha < 2
        if a >= b:
            return 0.0
        p = 2.0 - self.alpha
        return self.scale * (b**p - a**p) / p

    @property
    def truncation_cut(self) -> float:
        if self.cut is not None:
            return self.cut
        if self.z_min > 0:
            return self.z_min  # nothing below the support: nothing neglected
        total = self.small_jump_integral()
        target = total * NEGLECTED_FRACTION / (1.0 + NEGLECTED_FRACTION)
        lo, hi = 0.0, min(1.0, self.z_max)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.neglected_below(mid) > target:
                hi = mid
            else:
                lo = mid
        return lo

    def small_jump_integral(self) -> float:
        b1 = min(1.0, self.z_max)
        val = self._moment2(self.z_min, b1) + self._tail_mass(max(self.z_min, 1.0), self.z_max)
        return self.sides * val

    def neglected_below(self, kappa: float) -> float:
        top = min(kappa, self.z_max)
        val = self._moment2(self.z_min, min(top, 1.0)) + self._tail_mass(
            max(self.z_min, 1.0), top
        )
        return self.sides * val

    def intensity_above(self, kappa: float) -> float:
        a = max(self.z_min, kappa)
        if a <= 0:
            raise ValidationError("intensity diverges: cut must be positive")
        return self.sides * self._tail_mass(a, self.z_max)

    def quad_atoms(self, kappa: float, n_nodes: int = DENSITY_QUAD_NODES):
        """Gauss-Legendre discretization of nu restricted to |z| >= kappa.

        The panel is split at |z| = 1 so that integrands with the usual
        (|z| ^ 1) kink stay smooth per panel.
        """
        a = max(self.z_min, kappa)
        if a >= self.z_max:
            return np.array([]), np.array([])
        edges = [a] + [p for p in (1.0,) if a < p < self.z_max] + [self.z_max]
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        zs, ws = [], []
        for lo, hi in zip(edges, edges[1:]):
            z = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            zs.append(z)
            ws.append(0.5 * (hi - lo) * weights * self.scale * z ** (-1.0 - self.alpha))
        z = np.concatenate(zs)
        w = np.concatenate(ws)
        if self.symmetric:
            z = np.concatenate([-z[::-1], z])
            w = np.concatenate([w[::-1], w])
        return z, w

    def sample_marks(self, rng: np.random.Generator, size: int, kappa: float):
        a = max(self.z_min, kappa)
        if a >= self.z_max:
            raise ContractError(f"no support at or above the cut kappa={kappa}")
        u = rng.random(size)
        al = self.alpha
        mags = (a**-al - u * (a**-al - self.z_max**-al)) ** (-1.0 / al)
        if self.symmetric:
            signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            return signs * mags
        return mags

    def integrate(self, fn, z_min: float = 0.0) -> float:
        """Adaptive quadrature of fn against nu restricted to |z| >= z_min.

        Handles the z -> 0 singularity when the support touches zero
        (the integrand must decay like z^2 there, as the A3 envelope
        guarantees for the uses in this package).
        """
        a = max(self.z_min, z_min)
        if a >= self.z_max:
            return 0.0

        def one_side(sign: float) -> float:
            def integrand(z):
                return float(fn(sign * z)) * self.scale * z ** (-1.0 - self.alpha)

            pts = [p for p in (min(1.0, self.z_max),) if a < p < self.z_max]
            val, err = quad(
                integrand, a, self.z_max, points=pts or None, limit=200,
                epsabs=1e-12, epsrel=1e-9,
            )
            if err > 1e-7 * max(1.0, abs(val)):
                raise NumericalError(
                    f"measure quadrature did not converge (err={err:.2e})"
                )
            return val

        total = one_side(1.0)
        if self.symmetric:
            total += one_side(-1.0)
        return total


LevyMeasure = Union[AtomicMeasure, PowerLawMeasure]


def small_jump_check(measure: LevyMeasure, kappa: float | None = None) -> SmallJumpCheck:
    """Validate int (1 ^ z^2) nu < infinity and report the truncation proxy.

    Returns the full integral together with the neglected mass below the
    cut (kappa, default: the measure's own truncation cut).
    """
    k = measure.truncation_cut if kappa is None else kappa
    if k <= 0:
        raise ContractError("cut must be positive")
    total = measure.small_jump_integral()
    if not math.isfinite(total):
        raise ValidationError("small-jump integral is not finite")
    return SmallJumpCheck(float(total), float(measure.neglected_below(k)))


def truncated_intensity(measure: LevyMeasure, kappa: float) -> float:
    """lambda_kappa = nu({|z| >= kappa}), the simulated event rate."""
    if kappa <= 0:
        raise ContractError(f"kappa must be positive, got {kappa}")
    return float(measure.intensity_above(kappa))


@dataclass(frozen=True, eq=False)
class JumpPath:
    """One realization of the jump component on [0, horizon].

    Immutable value object: times strictly increasing in (0, horizon],
    all marks at or above the cut.  Two equations driven by the same
    JumpPath see the identical event sequence (common-noise coupling).
    """

    horizon: float
    cut: float
    times: np.ndarray
    marks: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float, copy=True)
        marks = np.array(self.marks, dtype=float, copy=True)
        if self.horizon <= 0:
            raise ContractError("horizon must be positive")
        if self.cut <= 0:
            raise ContractError("cut must be positive")
        if times.shape != marks.shape or times.ndim != 1:
            raise ContractError("times and marks must be matching 1-D arrays")
        if times.size:
            if not np.all(np.diff(times) > 0):
                raise ContractError("event times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.horizon * (1 + 1e-12):
                raise ContractError("event times must lie in (0, horizon]")
            if np.min(np.abs(marks)) < self.cut:
                raise ContractError("all marks must satisfy |z| >= cut")
        times.flags.writeable = False
        marks.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, JumpPath)
            and self.horizon == other.horizon
            and self.cut == other.cut
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
        )

    @property
    def events(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.times.tolist(), self.marks.tolist()))


def sample_path(
    measure: LevyMeasure, kappa: float, horizon: float, rng: np.random.Generator
) -> JumpPath:
    """Draw one path of jumps with |z| >= kappa on (0, horizon].

    Event count ~ Poisson(lambda_kappa * horizon); times are sorted
    uniforms; marks are i.i.d. from nu restricted above the cut.
    """
    if horizon <= 0:
        raise ContractError("horizon must be positive")
    lam = truncated_intensity(measure, kappa)
    if not math.isfinite(lam):
        raise ValidationError("truncated intensity must be finite")
    if lam == 0.0:
        return JumpPath(horizon, kappa, np.empty(0), np.empty(0))
    count = int(rng.poisson(lam * horizon))
    times = np.sort(horizon * (1.0 - rng.random(count)))  # values in (0, horizon]
    for i in range(1, count):  # break float ties deterministically
        if times[i] <= times[i - 1]:
            times[i] = np.nextafter(times[i - 1], np.inf)
    marks = measure.sample_marks(rng, count, kappa)
    return JumpPath(horizon, kappa, times, marks)


@dataclass(frozen=True)
class JumpCoefficient:
    """Jump amplitude eta(x, u; z) with its declared structural constants.

    `amplitude` must broadcast over numpy arrays in x and u.  The
    declared constants are not enforced at construction; they are what
    the spot checkers (validate_coefficient) test the callable against:

      |eta(x,u;z) - eta(y,v;z)| <= (lipschitz_u |u-v| + lipschitz_x |x-y|) (|z| ^ 1)
      |eta(x,u;z)| <= growth(x) (1 + |u|) (|z| ^ 1)
    """

    name: str
    amplitude: Callable
    lipschitz_u: float
    lipschitz_x: float = 0.0
    growth: float | Callable = 1.0

    def __post_init__(self):
        if not 0.0 < self.lipschitz_u <= 1.0:
            raise ValidationError("lipschitz_u must lie in (0, 1]")
        if self.lipschitz_x < 0:
            raise ValidationError("lipschitz_x must be >= 0")

    @property
    def x_dependent(self) -> bool:
        return self.lipschitz_x > 0

    def eval(self, x, u, z):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(x, u, z).shape
        out = np.asarray(self.amplitude(x, u, z), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    def growth_at(self, x):
        if callable(self.growth):
            return np.asarray(self.growth(np.asarray(x, dtype=float)), dtype=float)
        return np.full_like(np.asarray(x, dtype=float), float(self.growth))


def zero_coefficient() -> JumpCoefficient:
    """eta identically zero (noise-free runs)."""
    return JumpCoefficient(
        name="none",
        amplitude=lambda x, u, z: np.zeros(np.broadcast(x, u).shape),
        lipschitz_u=0.5,
        lipschitz_x=0.0,
        growth=0.0,
    )


def validate_coefficient(
    coeff: JumpCoefficient,
    rng: np.random.Generator,
    n_triples: int = 4000,
    x_box: tuple[float, float] = (-8.0, 8.0),
    u_box: tuple[float, float] = (-3.0, 3.0),
    z_box: tuple[float, float] = (-2.0, 2.0),
    tol: float = 1e-9,
) -> float:
    """Spot-check the Lipschitz/growth envelopes on random triples.

    Returns the worst signed slack (negative = satisfied with margin);
    raises ValidationError if either inequality fails beyond tol.  The
    boxes bound the sampling region: for x-dependent coefficients the
    declared lipschitz_x is only claimed on the state box.
    """
    xs = rng.uniform(*x_box, size=n_triples)
    ys = rng.uniform(*x_box, size=n_triples)
    us = rng.uniform(*u_box, size=n_triples)
    vs = rng.uniform(*u_box, size=n_triples)
    zs = rng.uniform(*z_box, size=n_triples)
    zcap = np.minimum(np.abs(zs), 1.0)
    lhs = np.abs(coeff.eval(xs, us, zs) - coeff.eval(ys, vs, zs))
    rhs = (coeff.lipschitz_u * np.abs(us - vs) + coeff.lipschitz_x * np.abs(xs - ys)) * zcap
    slack_lip = float(np.max(lhs - rhs))
    if slack_lip > tol:
        raise ValidationError(
            f"{coeff.name}: Lipschitz envelope violated by {slack_lip:.3e}"
        )
    growth_rhs = coeff.growth_at(xs) * (1.0 + np.abs(us)) * zcap
    growth_lhs = np.abs(coeff.eval(xs, us, zs))
    slack_growth = float(np.max(growth_lhs - growth_rhs))
    if slack_growth > tol:
        raise ValidationError(
            f"{coeff.name}: growth envelope violated by {slack_growth:.3e}"
        )
    return max(slack_lip, slack_growth)


@dataclass(frozen=True)
class SeedDerivation:
    """Deterministic per-(path, purpose) random streams from one master seed."""

    master_seed: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ContractError("master_seed must fit in 64 bits")

    def derive(self, path_index: int, purpose: str) -> np.random.Generator:
        tag = int.from_bytes(
            hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest(), "little"
        )
        ss = np.random.SeedSequence(entropy=(self.master_seed, int(path_index), tag))
        return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# compensator


@lru_cache(maxsize=64)
def _cached_quad_atoms(measure: LevyMeasure, kappa: float, n_nodes: int):
    return measure.quad_atoms(kappa) if isinstance(measure, AtomicMeasure) else measure.quad_atoms(kappa, n_nodes)


def compensator_on_grid(coeff: JumpCoefficient, measure, kappa, x, u) -> np.ndarray:
    """Vectorized int_{|z|>=kappa} eta(x_i, u_i, z) nu(dz) over grid arrays.

    Exact for atomic measures; for density measures a fixed
    DENSITY_QUAD_NODES-point Gauss-Legendre rule per side is used (the
    restricted density is smooth on [kappa, z_max]).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z, w = _cached_quad_atoms(measure, float(kappa), DENSITY_QUAD_NODES)
    if z.size == 0:
        return np.zeros(np.broadcast(x, u).shape)
    amp = coeff.eval(x[None, :], u[None, :], z[:, None])
    return w @ amp


def compensator_integral(
    coeff: JumpCoefficient, measure, kappa: float, x: float, u: float
) -> float:
    """Scalar compensator integral with a convergence check for densities.

    Atomic measures are summed exactly.  Density measures are evaluated
    at DENSITY_QUAD_NODES and at twice that; disagreement beyond 1e-9
    relative raises NumericalError.
    """
    if truncated_intensity(measure, kappa) == math.inf:
        raise ContractError("truncated intensity must be finite")
    if isinstance(measure, AtomicMeasure):
        return float(measure.integrate(lambda z: float(coeff.eval(x, u, z)), z_min=kappa))
    v1 = _fixed_node_value(coeff, measure, kappa, x, u, DENSITY_QUAD_NODES)
    v2 = _fixed_node_value(coeff, measure, kappa, x, u, 2 * DENSITY_QUAD_NODES)
    if abs(v1 - v2) > 1e-9 * max(1.0, abs(v2)):
        raise NumericalError(
            f"compensator quadrature not converged: {v1!r} vs {v2!r}"
        )
    return v2


def _fixed_node_value(coeff, measure, kappa, x, u, n_nodes) -> float:
    z, w = measure.quad_atoms(kappa, n_nodes)
    if z.size == 0:
        return 0.0
    return float(w @ coeff.eval(np.full_like(z, x), np.full_like(z, u), z))
