"""Experiment drivers: coupled ensembles, stats, verdicts.

Every driver follows the same pattern: derive per-path random streams
from the master seed, sample one jump path per ensemble member, drive
every solver arm of that member with the SAME path (common-noise
coupling), reduce statistics in path-index order.  Workers are pure, so
`threads` only changes wall time, never a single output bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..entropy_tools import (
    EntropyFamily,
    EntropyFluxPair,
    entropy_residual,
    noise_distance,
    plateau_test_function,
)
from ..errors import ConfigError
from ..estimators import (
    WeightPhi,
    bv_seminorm,
    besov_seminorm,
    dyadic_deltas,
    ensemble_mean,
    fit_rate,
    weighted_l1_distance,
)
from ..levy_noise import SeedDerivation, sample_path, truncated_intensity
from ..presets import build_flux, build_measure, build_noise, build_u0, scaled_noise
from ..solvers import Field, Grid1D, SolverConfig, shifted_flux, solve
from .config import ExperimentConfig, validate_config
from .report import ExperimentReport

__all__ = [
    "run_experiment",
    "run_error_rate",
    "run_continuous_dependence",
    "run_bv_monotone",
    "run_fractional_bv",
    "run_entropy_check",
]


@dataclass
class _Resolved:
    cfg: ExperimentConfig
    grid: Grid1D
    u0: Field
    flux: object
    noise: object
    measure: object
    kappa: float
    seeds: SeedDerivation
    phi: WeightPhi


def _resolve(cfg: ExperimentConfig) -> _Resolved:
    grid = Grid1D(cfg.grid_x_min, cfg.grid_x_max, cfg.grid_n_cells)
    u0 = Field.from_function(grid, build_u0(cfg.u0))
    flux = build_flux(cfg.flux)
    noise = build_noise(cfg.noise)
    measure = build_measure(cfg.measure)
    kappa = cfg.kappa if cfg.kappa is not None else measure.truncation_cut
    truncated_intensity(measure, kappa)  # must be finite
    phi = WeightPhi(_phi_radius(cfg, grid, u0, flux), cfg.phi_decay)
    return _Resolved(cfg, grid, u0, flux, noise, measure, kappa,
                     SeedDerivation(cfg.seed), phi)


def _phi_radius(cfg, grid, u0, flux) -> float:
    if cfg.phi_radius is not None:
        return cfg.phi_radius
    # cover the data support transported over the horizon
    x = grid.centers()
    nz = np.abs(u0.values) > 1e-12
    support = float(np.max(np.abs(x[nz]))) if np.any(nz) else 1.0
    r = support + flux.lipschitz_bound * cfg.horizon + 0.5
    return min(r, 0.45 * grid.length)


def _solver_cfg(cfg: ExperimentConfig, eps: float, *, with_t0: bool = False,
                store_events: bool = False) -> SolverConfig:
    snaps = cfg.snapshots
    if with_t0 and (not snaps or snaps[0] != 0.0):
        snaps = (0.0, *snaps)
    return SolverConfig(
        viscosity=eps,
        snapshot_times=snaps,
        cfl=cfg.cfl,
        numerical_flux=cfg.scheme,
        max_dt=cfg.max_dt,
        store_event_states=store_events,
    )


def _map_ordered(worker, n: int, threads: int) -> list:
    if threads <= 1:
        return [worker(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n)))


def _boundary_halo(fields) -> float:
    return max(float(max(abs(f.values[0]), abs(f.values[-1]))) for f in fields)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Dispatch on cfg.kind (configs are revalidated, so programmatically
    built ones get the same checks as parsed files)."""
    validate_config(cfg)
    drivers = {
        "error_rate": run_error_rate,
        "continuous_dependence": run_continuous_dependence,
        "bv_monotone": run_bv_monotone,
        "fractional_bv": run_fractional_bv,
        "entropy_check": run_entropy_check,
    }
    if cfg.kind not in drivers:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    return drivers[cfg.kind](cfg, threads=threads)


# ---------------------------------------------------------------------------
# error rate (vanishing viscosity)


def run_error_rate(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """E || u_eps(T) - u_ref(T) ||_L1 against a shared jump path per member.

    Reference is the eps = 0 monotone scheme on the same grid
    (rate.reference = scheme_zero) or the smallest-eps arm
    (rate.reference = self).  The fitted log-log slope must land inside
    the configured window.
    """
    res = _resolve(cfg)
    cfg_by_eps = {eps: _solver_cfg(cfg, eps) for eps in cfg.eps_list}
    self_ref = cfg.rate_reference == "self"
    if cfg.rate_reference not in ("scheme_zero", "self"):
        raise ConfigError(f"unknown rate.reference {cfg.rate_reference!r}")
    if self_ref and len(cfg.eps_list) < 3:
        raise ConfigError("rate.reference = self needs at least three eps values")
    ref_cfg = cfg_by_eps[cfg.eps_list[-1]] if self_ref else _solver_cfg(cfg, 0.0)
    fit_eps = cfg.eps_list[:-1] if self_ref else cfg.eps_list

    def worker(m: int):
        path = sample_path(res.measure, res.kappa, cfg.horizon,
                           res.seeds.derive(m, "jump_path"))
        ref = solve(res.u0, res.flux, res.noise, res.measure, ref_cfg, path)
        diffs = []
        halos = [ref.final]
        for eps in fit_eps:
            traj = solve(res.u0, res.flux, res.noise, res.measure, cfg_by_eps[eps], path)
            diffs.append(weighted_l1_distance(traj.final, ref.final))
            halos.append(traj.final)
        return diffs, _boundary_halo(halos)

    results = _map_ordered(worker, cfg.ensemble, threads)
    report = ExperimentReport(kind=cfg.kind)
    stats = []
    for j, eps in enumerate(fit_eps):
        stat = ensemble_mean([r[0][j] for r in results])
        stats.append((eps, stat))
        report.add_stat(f"l1_error[eps={eps:g}]", stat)
    fit = fit_rate([(eps, s.mean) for eps, s in stats])
    report.add_stat("fit_slope", fit.slope)
    report.add_stat("fit_intercept", fit.intercept)
    report.add_stat("fit_max_residual", fit.max_residual)
    report.add_stat("boundary_halo_max", max(r[1] for r in results))
    lo, hi = cfg.slope_window
    report.add_verdict(
        "viscosity_rate_slope",
        lo <= fit.slope <= hi,
        f"fitted slope {fit.slope:.4f} in [{lo}, {hi}]",
    )
    worst = max(s.std_error / abs(s.mean) if s.mean else math.inf for _, s in stats)
    report.add_verdict(
        "stderr_fraction",
        worst <= cfg.max_stderr_frac,
        f"max std_error/mean {worst:.4f} <= {cfg.max_stderr_frac}",
    )
    return report


# ---------------------------------------------------------------------------
# continuous dependence


def run_continuous_dependence(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Continuous dependence on the noise coefficient or the flux.

    mode=noise: second dataset uses sigma_c = (1 + c) eta; the log-log
    slope of E int |u - v| phi against the noise distance D(eta, sigma_c)
    is expected near 1/2.  mode=flux: G_c = F + c u; the slope against
    c = ||F' - G'||_inf is expected near 1.  Both arms of a member share
    one jump path and one viscosity (eps_list[0]).
    """
    res = _resolve(cfg)
    eps = cfg.eps_list[0]
    arm_cfg = _solver_cfg(cfg, eps)
    v0 = res.u0 if cfg.v0 is None else Field.from_function(res.grid, build_u0(cfg.v0))
    cs = cfg.cd_c_list
    if cfg.cd_mode == "noise":
        arms = [(res.flux, scaled_noise(res.noise, 1.0 + c)) for c in cs]
        slope_target, slope_tol = 0.5, cfg.cd_slope_tol or 0.15
    else:
        arms = [(shifted_flux(res.flux, c), res.noise) for c in cs]
        slope_target, slope_tol = 1.0, cfg.cd_slope_tol or 0.2

    def worker(m: int):
        path = sample_path(res.measure, res.kappa, cfg.horizon,
                           res.seeds.derive(m, "jump_path"))
        u_traj = solve(res.u0, res.flux, res.noise, res.measure, arm_cfg, path)
        lhs = []
        for flux_v, noise_v in arms:
            v_traj = solve(v0, flux_v, noise_v, res.measure, arm_cfg, path)
            lhs.append(weighted_l1_distance(u_traj.final, v_traj.final, res.phi))
        return lhs

    results = _map_ordered(worker, cfg.ensemble, threads)
    report = ExperimentReport(kind=cfg.kind)
    t = cfg.snapshots[-1]
    bv_v0 = bv_seminorm(v0)
    phi_l1 = res.phi.l1_mass(res.grid)
    initial_term = weighted_l1_distance(res.u0, v0, res.phi)
    lhs_stats = []
    d_values = []
    for j, c in enumerate(cs):
        stat = ensemble_mean([r[j] for r in results])
        lhs_stats.append(stat)
        report.add_stat(f"lhs[c={c:g}]", stat)
        if cfg.cd_mode == "noise":
            d = noise_distance(res.noise, scaled_noise(res.noise, 1.0 + c),
                               res.measure, cfg.u_range, cfg.n_u)
            d_values.append(d.value)
            report.add_stat(f"noise_distance[c={c:g}]", d.value)
            report.add_stat(f"noise_distance_maximizer[c={c:g}]", d.maximizer)
            report.add_stat(f"rhs_noise[c={c:g}]", (1.0 + bv_v0) * math.sqrt(t * d.value))
            report.add_stat(f"rhs_tail[c={c:g}]", math.sqrt(t * d.value) * phi_l1)
        else:
            report.add_stat(f"flux_gap[c={c:g}]", c)
            report.add_stat(f"rhs_flux[c={c:g}]", bv_v0 * c * t)
    report.add_stat("rhs_initial", initial_term)
    report.add_stat("bv_v0", bv_v0)
    report.add_stat("phi_l1_mass", phi_l1)

    xs = d_values if cfg.cd_mode == "noise" else list(cs)
    fit = fit_rate(list(zip(xs, [s.mean for s in lhs_stats])))
    report.add_stat("fit_slope", fit.slope)
    report.add_stat("fit_max_residual", fit.max_residual)
    report.add_verdict(
        f"cd_{cfg.cd_mode}_slope",
        abs(fit.slope - slope_target) <= slope_tol,
        f"fitted slope {fit.slope:.4f} within {slope_target} +- {slope_tol}",
    )
    if cfg.cd_mode == "noise":
        ratios = [d / (c * c) for d, c in zip(d_values, cs)]
        spread = (max(ratios) - min(ratios)) / max(ratios)
        report.add_verdict(
            "noise_distance_quadratic",
            spread <= 1e-10,
            f"D(eta, (1+c) eta)/c^2 relative spread {spread:.3e} <= 1e-10",
        )
    return report


# ---------------------------------------------------------------------------
# BV monotonicity


def run_bv_monotone(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """E |u_eps(t)|_BV may not exceed E |u_eps(0)|_BV (up to slack).

    With the zero-noise preset the check tightens to the pathwise TVD
    property of the monotone scheme (slack 0, machine-precision guard).
    """
    res = _resolve(cfg)
    deterministic = res.noise.name == "none"
    report = ExperimentReport(kind=cfg.kind)

    for eps in cfg.eps_list:
        arm_cfg = _solver_cfg(cfg, eps, with_t0=True)

        def worker(m: int, arm_cfg=arm_cfg):
            path = sample_path(res.measure, res.kappa, cfg.horizon,
                               res.seeds.derive(m, "jump_path"))
            traj = solve(res.u0, res.flux, res.noise, res.measure, arm_cfg, path)
            return [bv_seminorm(traj.snapshot(i)) for i in range(len(traj.times))]

        results = _map_ordered(worker, cfg.ensemble, threads)
        times = arm_cfg.snapshot_times
        stats = [ensemble_mean([r[i] for r in results]) for i in range(len(times))]
        for t, s in zip(times, stats):
            report.add_stat(f"bv[eps={eps:g},t={t:g}]", s)
        slack = 0.0 if deterministic else cfg.bv_slack
        bound = stats[0].mean * (1.0 + slack) + 1e-12
        ok = all(s.mean <= bound for s in stats)
        report.add_verdict(
            f"bv_mean_monotone[eps={eps:g}]",
            ok,
            f"max mean BV {max(s.mean for s in stats):.6g} <= initial {stats[0].mean:.6g}"
            f" * (1 + {slack})",
        )
        if deterministic:
            worst = max(max(r[1:]) - r[0] for r in results) if results else 0.0
            report.add_verdict(
                f"bv_pathwise[eps={eps:g}]",
                worst <= 1e-12 * max(1.0, stats[0].mean),
                f"pathwise BV increase {worst:.3e} <= machine precision",
            )
    return report


# ---------------------------------------------------------------------------
# fractional BV


def _modulus_with_stderr(fields, delta: float, R: float):
    """modulus_of_continuity plus the std error at the maximizing shift."""
    grid = fields[0].grid
    dx = grid.dx
    m_max = int(math.floor(delta / dx + 1e-9))
    x = grid.centers()
    mask = np.abs(x) <= R
    stack = np.stack([f.values for f in fields])
    best, best_samples = -1.0, None
    for m in range(1, m_max + 1):
        for shift in (m, -m):
            incr = np.abs(np.roll(stack, -shift, axis=1) - stack)[:, mask]
            samples = np.sum(incr, axis=1) * dx
            val = float(np.mean(samples))
            if val > best:
                best, best_samples = val, samples
    return ensemble_mean(list(best_samples))


def run_fractional_bv(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Modulus of continuity omega(delta) over a dyadic ladder + fitted exponent.

    Runs the viscous solver (eps = eps_list[0]) under the configured
    noise; the verdicts are monotonicity of omega and a positive fitted
    exponent.  An x-independent noise preset degenerates to the BV case
    and only triggers a note.
    """
    res = _resolve(cfg)
    arm_cfg = _solver_cfg(cfg, cfg.eps_list[0])
    dx = res.grid.dx
    delta_min = cfg.delta_min_cells * dx
    delta_max = cfg.delta_max_cells * dx
    ladder = [d for d in dyadic_deltas(delta_min, delta_max)]
    if cfg.frac_radius is not None:
        R = cfg.frac_radius
    else:
        R = min(0.25 * res.grid.length, res.grid.x_max - delta_max - dx)
    if R < 2 * dx or -R - delta_max <= res.grid.x_min or R + delta_max >= res.grid.x_max:
        raise ConfigError(
            f"shift window does not fit: radius {R:g} with ladder top {delta_max:g} "
            f"must stay inside the box"
        )
    report = ExperimentReport(kind=cfg.kind)
    if not res.noise.x_dependent:
        report.notes.append(
            "noise preset is x-independent: fractional BV degenerates to the BV case"
        )

    def worker(m: int):
        path = sample_path(res.measure, res.kappa, cfg.horizon,
                           res.seeds.derive(m, "jump_path"))
        traj = solve(res.u0, res.flux, res.noise, res.measure, arm_cfg, path)
        return traj.final

    finals = _map_ordered(worker, cfg.ensemble, threads)
    omegas = []
    for d in ladder:
        stat = _modulus_with_stderr(finals, d, R)
        omegas.append(stat)
        report.add_stat(f"omega[delta={d:g}]", stat)
    bes = besov_seminorm(res.u0, cfg.mu, delta_max)
    report.add_stat(f"besov_seminorm_u0[mu={cfg.mu:g}]", bes)
    report.add_stat("window_radius", R)

    nondecreasing = all(
        b.mean >= a.mean - 1e-14 for a, b in zip(omegas, omegas[1:])
    )
    report.add_verdict(
        "omega_nondecreasing", nondecreasing, "omega(delta) non-decreasing over the ladder"
    )
    points = [(d, s.mean) for d, s in zip(ladder, omegas) if s.mean > 0]
    if len(points) >= 2:
        fit = fit_rate(points)
        report.add_stat("fit_exponent", fit.slope)
        report.add_stat("fit_max_residual", fit.max_residual)
        ok = 0.1 < fit.slope <= 1.0 + 1e-9
        report.add_verdict(
            "fractional_exponent",
            ok,
            f"fitted exponent {fit.slope:.4f} in (0.1, 1.0]",
        )
    else:
        report.add_verdict("fractional_exponent", False, "omega vanished: no fit possible")
    return report


# ---------------------------------------------------------------------------
# entropy residual check


def run_entropy_check(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Discrete entropy-inequality residual over an entropy-scheme ensemble.

    Residuals for each k must stay above -tol with
    tol = entropy.tol_c * (dx + dt + 1/sqrt(M)).
    """
    res = _resolve(cfg)
    eps = cfg.eps_list[0] if cfg.eps_list else 0.0
    arm_cfg = _solver_cfg(cfg, eps, with_t0=True, store_events=True)
    grid = res.grid
    dx = grid.dx
    xi = cfg.xi if cfg.xi is not None else 4.0 * dx
    pair = EntropyFluxPair(res.flux, EntropyFamily(xi))
    halfwidth = cfg.psi_x_halfwidth if cfg.psi_x_halfwidth is not None else 0.35 * grid.length
    ramp = cfg.psi_x_ramp if cfg.psi_x_ramp is not None else 0.25 * halfwidth
    psi = plateau_test_function(
        x_center=cfg.psi_x_center,
        x_halfwidth=halfwidth,
        x_ramp=ramp,
        t_flat=cfg.psi_t_flat_frac * cfg.horizon,
        t_end=cfg.psi_t_end_frac * cfg.horizon,
    )

    def worker(m: int):
        path = sample_path(res.measure, res.kappa, cfg.horizon,
                           res.seeds.derive(m, "jump_path"))
        return solve(res.u0, res.flux, res.noise, res.measure, arm_cfg, path)

    trajs = _map_ordered(worker, cfg.ensemble, threads)
    residuals = entropy_residual(trajs, pair, psi, res.noise, res.measure,
                                 res.kappa, cfg.k_values)
    speed = res.flux.lipschitz_bound
    dt_bar = cfg.cfl * dx / speed if speed > 0 else (cfg.max_dt or dx)
    tol = cfg.entropy_tol_c * (dx + dt_bar + 1.0 / math.sqrt(cfg.ensemble))
    report = ExperimentReport(kind=cfg.kind)
    report.add_stat("tolerance", tol)
    report.add_stat("xi", xi)
    for k in cfg.k_values:
        stat = residuals[float(k)]
        report.add_stat(f"residual[k={k:g}]", stat)
        report.add_verdict(
            f"entropy_residual[k={k:g}]",
            stat.mean >= -tol,
            f"mean residual {stat.mean:.6g} >= -tol = {-tol:.6g}",
        )
    return report
