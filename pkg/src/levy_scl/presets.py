"""Named presets for initial data, fluxes, jump amplitudes and measures.

Configs refer to everything by preset name plus numeric parameters; the
builders below turn those references into runtime objects.  All preset
callables broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .levy_noise import AtomicMeasure, JumpCoefficient, PowerLawMeasure, zero_coefficient
from .solvers import FluxModel, burgers_flux, linear_flux

__all__ = [
    "PresetRef",
    "build_u0",
    "build_flux",
    "build_noise",
    "build_measure",
    "preset_catalog",
]


@dataclass(frozen=True)
class PresetRef:
    """Declarative reference: preset name plus sorted (key, value) params."""

    name: str
    params: tuple[tuple[str, object], ...] = ()

    def as_dict(self) -> dict:
        return dict(self.params)

    @staticmethod
    def make(name: str, **params) -> "PresetRef":
        return PresetRef(name, tuple(sorted(params.items())))


def _params(ref: PresetRef, defaults: dict, what: str) -> dict:
    p = dict(defaults)
    for key, val in ref.params:
        if key not in defaults:
            raise ConfigError(f"{what} preset {ref.name!r}: unknown parameter {key!r}")
        p[key] = val
    return p


def _smoothstep(y):
    y = np.clip(y, 0.0, 1.0)
    return y**3 * (10.0 - 15.0 * y + 6.0 * y * y)


def _c2_bump(s):
    # even C^2 bump, max 1 at s=0, support |s| < 1
    out = np.zeros_like(np.asarray(s, dtype=float))
    inside = np.abs(s) < 1.0
    out[inside] = (1.0 - np.asarray(s, dtype=float)[inside] ** 2) ** 3
    return out


# -- initial data ------------------------------------------------------------


def build_u0(ref: PresetRef):
    """Return a callable x -> u0(x)."""
    name = ref.name
    if name == "gaussian":
        p = _params(ref, {"amp": 1.0, "center": 0.0, "width": 0.5}, "u0")
        return lambda x: p["amp"] * np.exp(-((x - p["center"]) ** 2) / (2.0 * p["width"] ** 2))
    if name == "riemann":
        p = _params(ref, {"left": 1.0, "right": 0.0, "x0": 0.0}, "u0")
        return lambda x: np.where(np.asarray(x) < p["x0"], p["left"], p["right"])
    if name == "mollified_step":
        p = _params(ref, {"left": 1.0, "right": 0.0, "x0": 0.0, "width": 0.5}, "u0")

        def fn(x, p=p):
            y = (np.asarray(x, dtype=float) - p["x0"]) / p["width"] + 0.5
            return p["left"] + (p["right"] - p["left"]) * _smoothstep(y)

        return fn
    if name == "bump":
        p = _params(ref, {"amp": 1.0, "center": 0.0, "width": 2.0}, "u0")
        return lambda x: p["amp"] * _c2_bump((np.asarray(x, dtype=float) - p["center"]) / p["width"])
    if name == "sine":
        p = _params(ref, {"amp": 1.0, "waves": 1.0, "length": 16.0}, "u0")
        return lambda x: p["amp"] * np.sin(2.0 * np.pi * p["waves"] * np.asarray(x) / p["length"])
    if name == "constant":
        p = _params(ref, {"value": 1.0}, "u0")
        return lambda x: np.full_like(np.asarray(x, dtype=float), p["value"])
    if name == "zero":
        _params(ref, {}, "u0")
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    raise ConfigError(f"unknown u0 preset {name!r}")


# -- fluxes ------------------------------------------------------------------


def build_flux(ref: PresetRef) -> FluxModel:
    name = ref.name
    if name == "burgers":
        p = _params(ref, {"state_lo": -4.0, "state_hi": 4.0}, "flux")
        return burgers_flux(state_range=(p["state_lo"], p["state_hi"]))
    if name == "linear":
        p = _params(ref, {"speed": 1.0, "state_lo": -4.0, "state_hi": 4.0}, "flux")
        return linear_flux(p["speed"], state_range=(p["state_lo"], p["state_hi"]))
    if name == "zero":
        p = _params(ref, {"state_lo": -4.0, "state_hi": 4.0}, "flux")
        return linear_flux(0.0, state_range=(p["state_lo"], p["state_hi"]))
    raise ConfigError(f"unknown flux preset {name!r}")


# -- jump amplitudes ----------------------------------------------------------

# Spot checks of the Lipschitz envelopes sample u in this box; the
# declared x-Lipschitz constant of the bump preset is only claimed there.
U_CHECK_BOX = (-3.0, 3.0)


def build_noise(ref: PresetRef) -> JumpCoefficient:
    name = ref.name
    if name == "none":
        _params(ref, {}, "noise")
        return zero_coefficient()
    if name == "linear_u":
        p = _params(ref, {"scale": 0.2, "lambda_star": None}, "noise")
        scale = float(p["scale"])
        if not 0 < abs(scale) < 1:
            raise ConfigError("linear_u needs 0 < |scale| < 1 (the u-Lipschitz constant)")
        lam = abs(scale) if p["lambda_star"] is None else float(p["lambda_star"])
        return JumpCoefficient(
            name=f"linear_u({scale})",
            amplitude=lambda x, u, z, c=scale: c * u * np.minimum(np.abs(z), 1.0),
            lipschitz_u=lam,
            lipschitz_x=0.0,
            growth=abs(scale),
        )
    if name == "bump_x":
        p = _params(
            ref,
            {"scale": 0.2, "center": 0.0, "width": 4.0, "lambda_star": None},
            "noise",
        )
        scale, c0, w = float(p["scale"]), float(p["center"]), float(p["width"])
        if not 0 < abs(scale) < 1:
            raise ConfigError("bump_x needs 0 < |scale| < 1")
        # max |d/ds (1-s^2)^3| = 6 s (1-s^2)^2 at s = 1/sqrt(5)
        s_star = 1.0 / np.sqrt(5.0)
        gp_max = 6.0 * s_star * (1.0 - s_star**2) ** 2 / w
        u_max = max(abs(U_CHECK_BOX[0]), abs(U_CHECK_BOX[1]))
        lam = abs(scale) if p["lambda_star"] is None else float(p["lambda_star"])
        return JumpCoefficient(
            name=f"bump_x({scale})",
            amplitude=lambda x, u, z, c=scale, c0=c0, w=w: c
            * _c2_bump((np.asarray(x, dtype=float) - c0) / w)
            * u
            * np.minimum(np.abs(z), 1.0),
            lipschitz_u=lam,
            lipschitz_x=abs(scale) * gp_max * u_max,
            growth=lambda x, c=scale, c0=c0, w=w: abs(c)
            * _c2_bump((np.asarray(x, dtype=float) - c0) / w),
        )
    raise ConfigError(f"unknown noise preset {name!r}")


def scaled_noise(coeff: JumpCoefficient, factor: float) -> JumpCoefficient:
    """(1 + c)-type perturbation: multiply the amplitude by `factor`."""
    lam = coeff.lipschitz_u * abs(factor)
    if lam > 1.0:
        raise ConfigError(f"scaled noise would have Lipschitz constant {lam} > 1")
    growth = coeff.growth
    if callable(growth):
        scaled_growth = lambda x, g=growth, f=abs(factor): f * np.asarray(g(x), dtype=float)
    else:
        scaled_growth = abs(factor) * growth
    return JumpCoefficient(
        name=f"{coeff.name}*{factor}",
        amplitude=lambda x, u, z, a=coeff.amplitude, f=factor: f * a(x, u, z),
        lipschitz_u=max(lam, 1e-12),
        lipschitz_x=coeff.lipschitz_x * abs(factor),
        growth=scaled_growth,
    )


# -- measures ----------------------------------------------------------------


def build_measure(ref: PresetRef):
    name = ref.name
    if name == "atomic":
        p = _params(ref, {"atoms": ((1.0, 2.0),), "kappa": None}, "measure")
        return AtomicMeasure(atoms=tuple(p["atoms"]), cut=p["kappa"])
    if name == "power_law":
        p = _params(
            ref,
            {
                "alpha": 0.5,
                "scale": 1.0,
                "z_min": 0.0,
                "z_max": 1.0,
                "symmetric": False,
                "kappa": None,
            },
            "measure",
        )
        return PowerLawMeasure(
            alpha=float(p["alpha"]),
            scale=float(p["scale"]),
            z_min=float(p["z_min"]),
            z_max=float(p["z_max"]),
            symmetric=bool(p["symmetric"]),
            cut=p["kappa"],
        )
    raise ConfigError(f"unknown measure preset {name!r}")


def preset_catalog() -> dict[str, tuple[str, ...]]:
    """Names accepted in config files, by section."""
    return {
        "u0": ("gaussian", "riemann", "mollified_step", "bump", "sine", "constant", "zero"),
        "flux": ("burgers", "linear", "zero"),
        "noise": ("none", "linear_u", "bump_x"),
        "measure": ("atomic", "power_law"),
    }
