"""Finite-volume time stepping for the viscous and inviscid jump-driven problems.

The spatial domain is a uniform periodic 1-D grid.  One step of the
scheme is a Lie splitting: explicit monotone flux update, implicit heat
update, explicit compensator drift; jump increments are applied exactly
at the event times of the driving path by sub-stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError, ContractError, NumericalError
from .levy_noise import JumpCoefficient, JumpPath, compensator_on_grid

__all__ = [
    "Grid1D",
    "Field",
    "FluxModel",
    "SolverConfig",
    "Trajectory",
    "EventRecord",
    "burgers_flux",
    "linear_flux",
    "shifted_flux",
    "hyperbolic_step",
    "diffusion_step",
    "jump_update",
    "compensator_update",
    "solve",
    "heat_kernel_solution",
    "write_snapshot_csv",
    "read_snapshot_csv",
]

NUMERICAL_FLUXES = ("engquist_osher", "godunov", "lax_friedrichs")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid of cell averages on [x_min, x_max)."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ContractError("grid needs x_max > x_min")
        if self.n_cells < 2:
            raise ContractError("grid needs at least two cells")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass
class Field:
    """Cell-averaged scalar field on a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ContractError(
                f"field has {self.values.shape} values for {self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(self.values)):
            raise ContractError("field values must be finite")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def mass(self) -> float:
        """sum u_i dx (the conserved quantity of the noise-free dynamics)."""
        return float(np.sum(self.values) * self.grid.dx)

    @staticmethod
    def from_function(grid: Grid1D, fn: Callable) -> "Field":
        return Field(grid, np.asarray(fn(grid.centers()), dtype=float))


@dataclass(frozen=True)
class FluxModel:
    """Flux function together with the bounds the schemes rely on.

    `state_range` declares the interval the solution is expected to stay
    in; `lipschitz_bound` is sup|F'| there and feeds both the CFL rule
    and the Lax-Friedrichs viscosity.  `argmin` marks the minimizer of a
    convex flux (enables the exact Engquist-Osher/Godunov formulas) and
    `fprime_affine = (p, q)` declares F'(s) = p + q s when that holds.
    """

    name: str
    F: Callable
    F_prime: Callable
    state_range: tuple[float, float] = (-4.0, 4.0)
    F_second_bound: float | None = None
    argmin: float | None = None
    fprime_affine: tuple[float, float] | None = None

    @cached_property
    def lipschitz_bound(self) -> float:
        lo, hi = self.state_range
        if self.fprime_affine is not None:
            p, q = self.fprime_affine
            return max(abs(p + q * lo), abs(p + q * hi))
        s = np.linspace(lo, hi, 513)
        return float(np.max(np.abs(self.F_prime(s))))


def validate_flux(flux: FluxModel, n_samples: int = 257, tol: float = 1e-6) -> float:
    """Spot-check the flux model's self-consistency on its state range.

    Verifies F_prime against a centered difference of F and that the
    declared bounds dominate sampled values; returns the worst relative
    derivative defect.  Raises ContractError on failure.
    """
    lo, hi = flux.state_range
    s = np.linspace(lo, hi, n_samples)
    h = 1e-6 * max(1.0, hi - lo)
    fd = (flux.F(s + h) - flux.F(s - h)) / (2 * h)
    scale = 1.0 + np.abs(flux.F_prime(s))
    defect = float(np.max(np.abs(fd - flux.F_prime(s)) / scale))
    if defect > tol:
        raise ContractError(f"{flux.name}: F_prime disagrees with dF (defect {defect:.2e})")
    if float(np.max(np.abs(flux.F_prime(s)))) > flux.lipschitz_bound * (1 + 1e-12):
        raise ContractError(f"{flux.name}: lipschitz_bound understates sampled |F'|")
    if flux.F_second_bound is not None:
        fd2 = (flux.F(s + h) - 2 * flux.F(s) + flux.F(s - h)) / (h * h)
        # centered second differences carry a eps*|F|/h^2 rounding floor
        noise = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(flux.F(s))))) / (h * h)
        if float(np.max(np.abs(fd2))) > flux.F_second_bound * (1 + 1e-4) + noise:
            raise ContractError(f"{flux.name}: F_second_bound understates sampled |F''|")
    return defect


def burgers_flux(state_range=(-4.0, 4.0)) -> FluxModel:
    return FluxModel(
        name="burgers",
        F=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
        F_prime=lambda u: np.asarray(u, dtype=float),
        state_range=state_range,
        F_second_bound=1.0,
        argmin=0.0,
        fprime_affine=(0.0, 1.0),
    )


def linear_flux(speed: float, state_range=(-4.0, 4.0)) -> FluxModel:
    return FluxModel(
        name=f"linear({speed})",
        F=lambda u, c=speed: c * np.asarray(u, dtype=float),
        F_prime=lambda u, c=speed: np.full_like(np.asarray(u, dtype=float), c),
        state_range=state_range,
        F_second_bound=0.0,
        argmin=None,
        fprime_affine=(speed, 0.0),
    )


def shifted_flux(base: FluxModel, shift: float) -> FluxModel:
    """G(u) = F(u) + shift * u, so G' = F' + shift."""
    affine = None
    if base.fprime_affine is not None:
        p, q = base.fprime_affine
        affine = (p + shift, q)
    argmin = None
    if base.argmin is not None and base.fprime_affine is not None:
        p, q = base.fprime_affine
        if q != 0:
            argmin = -(p + shift) / q  # F' + shift vanishes here
    return FluxModel(
        name=f"{base.name}+{shift}u",
        F=lambda u, b=base.F, c=shift: b(u) + c * np.asarray(u, dtype=float),
        F_prime=lambda u, b=base.F_prime, c=shift: b(u) + c,
        state_range=base.state_range,
        F_second_bound=base.F_second_bound,
        argmin=argmin,
        fprime_affine=affine,
    )


@dataclass(frozen=True)
class SolverConfig:
    """Settings for one solve.

    dt is chosen as cfl*dx/sup|F'| (sup over the declared state range);
    the implicit heat step imposes no bound, so `viscosity` never
    shrinks dt.  `max_dt` adds an absolute cap, required when the flux
    is identically zero.  `store_event_states` keeps the pre/post jump
    fields needed by the entropy-residual checker.
    """

    viscosity: float
    snapshot_times: tuple[float, ...]
    cfl: float = 0.45
    numerical_flux: str = "engquist_osher"
    max_dt: float | None = None
    store_event_states: bool = False

    def __post_init__(self):
        if self.viscosity < 0:
            raise ConfigError("viscosity must be >= 0")
        if not 0 < self.cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.numerical_flux not in NUMERICAL_FLUXES:
            raise ConfigError(f"unknown numerical flux {self.numerical_flux!r}")
        if not self.snapshot_times:
            raise ConfigError("at least one snapshot time is required")
        ts = tuple(float(t) for t in self.snapshot_times)
        if any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("snapshot times must be non-negative and increasing")
        object.__setattr__(self, "snapshot_times", ts)
        if self.max_dt is not None and self.max_dt <= 0:
            raise ConfigError("max_dt must be positive when given")


@dataclass(frozen=True)
class EventRecord:
    """One jump applied during a solve (pre/post states are optional)."""

    time: float
    mark: float
    pre: np.ndarray | None = None
    post: np.ndarray | None = None


@dataclass
class Trajectory:
    """Snapshots of one realization, plus the applied jump events."""

    grid: Grid1D
    times: np.ndarray
    states: np.ndarray  # (n_snapshots, n_cells)
    events: tuple[EventRecord, ...] = ()

    def snapshot(self, i: int) -> Field:
        return Field(self.grid, self.states[i].copy())

    @property
    def final(self) -> Field:
        return self.snapshot(len(self.times) - 1)

    def timeline(self):
        """Ordered (time, state) nodes with jump times doubled (pre, post).

        Gives the piecewise-smooth skeleton used for time quadrature:
        between consecutive nodes the path has no jump, so trapezoid
        rule per segment is second order.  Requires store_event_states.
        """
        nodes = [(float(t), self.states[i]) for i, t in enumerate(self.times)]
        for ev in self.events:
            if ev.pre is None or ev.post is None:
                raise ContractError("timeline needs store_event_states=True")
            nodes.append((float(ev.time), ev.pre))
            nodes.append((float(ev.time), ev.post))
        # stable sort keeps pre before post at equal times
        nodes.sort(key=lambda n: n[0])
        return nodes


# ---------------------------------------------------------------------------
# numerical fluxes


def _interface_flux(flux: FluxModel, scheme: str, a: np.ndarray, b: np.ndarray):
    """Monotone numerical flux H(a, b) at interfaces with left/right states a, b."""
    if scheme == "lax_friedrichs":
        s = flux.lipschitz_bound
        return 0.5 * (flux.F(a) + flux.F(b)) - 0.5 * s * (b - a)
    if scheme == "engquist_osher":
        if flux.argmin is not None:
            w = flux.argmin
            return flux.F(np.maximum(a, w)) + flux.F(np.minimum(b, w)) - flux.F(w)
        if flux.fprime_affine is not None and flux.fprime_affine[1] == 0.0:
            return flux.F(a) if flux.fprime_affine[0] >= 0 else flux.F(b)
        raise ConfigError(
            "engquist_osher needs a convex flux with declared argmin or a linear flux"
        )
    if scheme == "godunov":
        if flux.argmin is not None:
            w = flux.argmin
            return np.maximum(flux.F(np.maximum(a, w)), flux.F(np.minimum(b, w)))
        if flux.fprime_affine is not None and flux.fprime_affine[1] == 0.0:
            return flux.F(a) if flux.fprime_affine[0] >= 0 else flux.F(b)
        raise ConfigError("godunov needs a convex flux with declared argmin")
    raise ConfigError(f"unknown numerical flux {scheme!r}")


def _hyperbolic_kernel(v: np.ndarray, flux: FluxModel, scheme: str, dt: float, dx: float):
    h_right = _interface_flux(flux, scheme, v, np.roll(v, -1))
    return v - (dt / dx) * (h_right - np.roll(h_right, 1))


def _scheme_speed(flux: FluxModel, scheme: str, v: np.ndarray) -> float:
    # Lax-Friedrichs stability is set by its own viscosity parameter
    # (the declared global bound); the upwind fluxes by the field's speed.
    if scheme == "lax_friedrichs":
        return flux.lipschitz_bound
    return float(np.max(np.abs(flux.F_prime(v))))


def hyperbolic_step(f: Field, flux: FluxModel, scheme: str, dt: float) -> Field:
    """One conservative explicit update; rejects CFL violations up front."""
    v = f.values
    speed = _scheme_speed(flux, scheme, v)
    if dt * speed > f.grid.dx * (1 + 1e-12):
        raise ConfigError(
            f"CFL violation: dt={dt} * speed={speed} exceeds dx={f.grid.dx}"
        )
    return Field(f.grid, _hyperbolic_kernel(v, flux, scheme, dt, f.grid.dx))


def _diffusion_symbol(n: int, dx: float) -> np.ndarray:
    k = np.arange(n // 2 + 1)
    return (4.0 / dx**2) * np.sin(np.pi * k / n) ** 2


def _diffusion_kernel(v: np.ndarray, eps: float, dt: float, dx: float) -> np.ndarray:
    if eps == 0.0 or dt == 0.0:
        return v.copy()
    mu = _diffusion_symbol(v.size, dx)
    return np.fft.irfft(np.fft.rfft(v) / (1.0 + eps * dt * mu), n=v.size)


def diffusion_step(f: Field, eps: float, dt: float) -> Field:
    """Backward-Euler heat update (I - eps dt L) u_new = u_old.

    L is the periodic second-difference operator; the system is
    circulant, so it is solved exactly in Fourier space.  Mass is
    preserved (the k = 0 mode is untouched) and the update satisfies a
    discrete maximum principle.
    """
    if eps < 0:
        raise ContractError("viscosity must be >= 0")
    return Field(f.grid, _diffusion_kernel(f.values, eps, dt, f.grid.dx))


def jump_update(f: Field, coeff: JumpCoefficient, z: float) -> Field:
    """Apply one jump: u_i += eta(x_i, u_i, z)."""
    x = f.grid.centers()
    return Field(f.grid, f.values + coeff.eval(x, f.values, z))


def compensator_update(f: Field, coeff, measure, kappa: float, dt: float) -> Field:
    """Explicit compensator drift u_i -= dt * int_{|z|>=kappa} eta(x_i,u_i,z) nu(dz)."""
    x = f.grid.centers()
    drift = compensator_on_grid(coeff, measure, kappa, x, f.values)
    return Field(f.grid, f.values - dt * drift)


# ---------------------------------------------------------------------------
# full solve


def _segment_dt_cap(v: np.ndarray, grid: Grid1D, flux: FluxModel, cfg: SolverConfig) -> float:
    # wave speed of the current field with a margin for compensator growth
    # within the segment; jumps only occur at segment boundaries
    if cfg.numerical_flux == "lax_friedrichs":
        speed = flux.lipschitz_bound
    else:
        speed = 1.25 * float(np.max(np.abs(flux.F_prime(v))))
    cap = math.inf
    if speed > 0:
        cap = cfg.cfl * grid.dx / speed
    if cfg.max_dt is not None:
        cap = min(cap, cfg.max_dt)
    return cap


def solve(
    u0: Field,
    flux: FluxModel,
    coeff: JumpCoefficient,
    measure,
    cfg: SolverConfig,
    path: JumpPath,
) -> Trajectory:
    """Integrate one realization against a fixed jump path.

    Per sub-step: hyperbolic flux update, implicit diffusion,
    compensator drift (first-order Lie splitting).  The step sequence is
    broken exactly at every event time of `path` (where the jump is
    applied) and at every requested snapshot time.  The result is a pure
    function of the inputs, so runs may be distributed freely.
    """
    t_end = cfg.snapshot_times[-1]
    if path.horizon < t_end - 1e-12:
        raise ContractError(
            f"path horizon {path.horizon} shorter than last snapshot {t_end}"
        )
    grid = u0.grid
    if flux.lipschitz_bound == 0.0 and cfg.max_dt is None:
        raise ConfigError("flux has zero wave speed: set max_dt to bound the step")

    ev_times = [float(t) for t in path.times if t <= t_end + 1e-15]
    breaks = sorted(set([0.0, *cfg.snapshot_times, *ev_times]))
    snap_set = set(cfg.snapshot_times)
    ev_iter = {t: float(z) for t, z in zip(ev_times, path.marks[: len(ev_times)])}

    x = grid.centers()
    v = u0.values.copy()
    kappa = path.cut
    snaps: list[np.ndarray] = []
    snap_times: list[float] = []
    events: list[EventRecord] = []

    def record_snapshot(t):
        snap_times.append(t)
        snaps.append(v.copy())

    if 0.0 in snap_set:
        record_snapshot(0.0)

    t_prev = 0.0
    for t_next in breaks:
        if t_next <= t_prev:
            continue
        span = t_next - t_prev
        dt_cap = _segment_dt_cap(v, grid, flux, cfg)
        n_sub = 1 if not math.isfinite(dt_cap) else max(1, math.ceil(span / dt_cap - 1e-12))
        dt = span / n_sub
        for s in range(n_sub):
            speed_now = _scheme_speed(flux, cfg.numerical_flux, v)
            if dt * speed_now > grid.dx * (1 + 1e-9):
                raise NumericalError(
                    f"CFL stability lost at t={t_prev + s * dt:.6g}: "
                    f"wave speed grew to {speed_now:.4g} within a segment"
                )
            v = _hyperbolic_kernel(v, flux, cfg.numerical_flux, dt, grid.dx)
            v = _diffusion_kernel(v, cfg.viscosity, dt, grid.dx)
            v = v - dt * compensator_on_grid(coeff, measure, kappa, x, v)
            if not np.all(np.isfinite(v)):
                bad = int(np.argmax(~np.isfinite(v)))
                raise NumericalError(
                    f"solution blew up at t={t_prev + (s + 1) * dt:.6g}, cell {bad}"
                )
        if t_next in ev_iter:
            z = ev_iter[t_next]
            pre = v.copy() if cfg.store_event_states else None
            v = v + coeff.eval(x, v, z)
            if not np.all(np.isfinite(v)):
                bad = int(np.argmax(~np.isfinite(v)))
                raise NumericalError(f"jump at t={t_next:.6g} blew up at cell {bad}")
            post = v.copy() if cfg.store_event_states else None
            events.append(EventRecord(t_next, z, pre, post))
        if t_next in snap_set:
            record_snapshot(t_next)
        t_prev = t_next

    return Trajectory(
        grid=grid,
        times=np.asarray(snap_times),
        states=np.stack(snaps),
        events=tuple(events),
    )


def heat_kernel_solution(u0: Field, eps: float, t: float) -> Field:
    """Periodic convolution with the heat kernel of eps * Laplacian at time t.

    The Gaussian (4 pi eps t)^(-1/2) exp(-x^2 / (4 eps t)) is wrapped
    around the box, sampled at cell offsets, normalized to unit discrete
    mass and applied by circular convolution.  Serves as the closed-form
    oracle for the pure-diffusion solver.
    """
    if t <= 0:
        raise ContractError("heat_kernel_solution needs t > 0")
    if eps <= 0:
        raise ContractError("heat_kernel_solution needs eps > 0")
    grid = u0.grid
    n, dx, L = grid.n_cells, grid.dx, grid.length
    offsets = dx * np.arange(n, dtype=float)
    offsets = np.where(offsets > L / 2, offsets - L, offsets)
    sigma2 = 2.0 * eps * t
    n_images = int(math.ceil(6.0 * math.sqrt(sigma2) / L)) + 1
    kern = np.zeros(n)
    for m in range(-n_images, n_images + 1):
        kern += np.exp(-((offsets + m * L) ** 2) / (2.0 * sigma2))
    kern /= np.sum(kern) * dx
    out = np.fft.irfft(np.fft.rfft(u0.values) * np.fft.rfft(kern), n=n) * dx
    return Field(grid, out)


# ---------------------------------------------------------------------------
# snapshot dump format

_FMT = "%.17g"


def write_snapshot_csv(traj: Trajectory, path) -> None:
    """One CSV row per snapshot: time, n_cells, x_min, x_max, cell values.

    Floats use 17 significant digits, so equal-seed runs reproduce the
    file byte for byte.
    """
    g = traj.grid
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for i, t in enumerate(traj.times):
            head = [_FMT % t, str(g.n_cells), _FMT % g.x_min, _FMT % g.x_max]
            cells = [_FMT % val for val in traj.states[i]]
            fh.write(",".join(head + cells) + "\n")


def read_snapshot_csv(path) -> Trajectory:
    """Parse the dump produced by write_snapshot_csv."""
    times, states = [], []
    grid = None
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            parts = line.strip().split(",")
            t, n, x_min, x_max = float(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])
            vals = np.array([float(p) for p in parts[4:]])
            if vals.size != n:
                raise ContractError(f"snapshot row claims {n} cells, has {vals.size}")
            g = Grid1D(x_min, x_max, n)
            if grid is None:
                grid = g
            elif grid != g:
                raise ContractError("snapshot rows disagree on the grid")
            times.append(t)
            states.append(vals)
    if grid is None:
        raise ContractError("empty snapshot file")
    return Trajectory(grid=grid, times=np.asarray(times), states=np.stack(states))
