#!/usr/bin/env python3
"""Vanishing-viscosity rate demo: couple each viscous run to the
zero-viscosity entropy scheme through one shared jump path per sample
and print the error table with the fitted rate.

Usage: python scripts/viscosity_rate_demo.py [--paths M] [--cells N]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from levy_scl import (
    AtomicMeasure,
    Field,
    Grid1D,
    SolverConfig,
    burgers_flux,
    ensemble_mean,
    fit_rate,
    solve,
    weighted_l1_distance,
)
from levy_scl.levy_noise import SeedDerivation, sample_path
from levy_scl.presets import PresetRef, build_noise, build_u0


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--cells", type=int, default=512)
    ap.add_argument("--seed", type=int, default=20240901)
    args = ap.parse_args()

    grid = Grid1D(-8.0, 8.0, args.cells)
    u0 = Field.from_function(
        grid, build_u0(PresetRef.make("mollified_step", left=1.0, right=0.0, x0=-2.0, width=1.0))
    )
    flux = burgers_flux()
    noise = build_noise(PresetRef.make("linear_u", scale=0.2))
    measure = AtomicMeasure(atoms=((1.0, 2.0),))
    kappa, horizon = 0.5, 0.5
    eps_list = (0.02, 0.01, 0.005, 0.0025)
    seeds = SeedDerivation(args.seed)

    errors = {eps: [] for eps in eps_list}
    for m in range(args.paths):
        path = sample_path(measure, kappa, horizon, seeds.derive(m, "jump_path"))
        ref = solve(u0, flux, noise, measure, SolverConfig(0.0, (horizon,)), path)
        for eps in eps_list:
            traj = solve(u0, flux, noise, measure, SolverConfig(eps, (horizon,)), path)
            errors[eps].append(weighted_l1_distance(traj.final, ref.final))

    print(f"{'eps':>8}  {'E||u_eps - u_ref||_L1':>22}  {'std err':>10}")
    points = []
    for eps in eps_list:
        stat = ensemble_mean(errors[eps])
        points.append((eps, stat.mean))
        print(f"{eps:8.4f}  {stat.mean:22.6e}  {stat.std_error:10.2e}")
    fit = fit_rate(points)
    print(f"\nfitted rate: error ~ C * eps^{fit.slope:.3f}   (theory: >= 1/2, optimal 1/2)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
