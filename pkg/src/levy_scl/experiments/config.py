"""Line-based experiment configuration: `key = value` with dotted keys.

Grammar: one `key = value` pair per line; blank lines and lines starting
with '#' are ignored.  Unknown keys are rejected with their line number,
duplicate keys with both line numbers.  List values are whitespace- or
comma-separated; atom lists use `z:w` pairs.

The full key table lives in KEY_TABLE below and is documented in the
README.  parse_config returns a frozen declarative ExperimentConfig;
resolving preset names into runtime objects happens in the runner.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from ..presets import PresetRef, build_flux, build_measure, build_noise, build_u0

__all__ = ["ExperimentConfig", "parse_config", "parse_config_text", "validate_config", "KEY_TABLE"]

EXPERIMENT_KINDS = (
    "error_rate",
    "continuous_dependence",
    "bv_monotone",
    "fractional_bv",
    "entropy_check",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run."""

    kind: str
    grid_x_min: float
    grid_x_max: float
    grid_n_cells: int
    horizon: float
    ensemble: int
    seed: int
    u0: PresetRef
    flux: PresetRef
    noise: PresetRef
    measure: PresetRef
    eps_list: tuple[float, ...] = ()
    snapshots: tuple[float, ...] = ()
    kappa: float | None = None
    cfl: float = 0.45
    scheme: str = "engquist_osher"
    max_dt: float | None = None
    # second dataset (continuous dependence)
    v0: PresetRef | None = None
    cd_mode: str | None = None  # "noise" or "flux"
    cd_c_list: tuple[float, ...] = ()
    cd_slope_tol: float | None = None
    # estimator options
    phi_radius: float | None = None
    phi_decay: float = 1.0
    xi: float | None = None
    k_values: tuple[float, ...] = (-1.0, 0.0, 1.0)
    # calibrated once on a resolution sweep of the entropy-scheme ensemble
    entropy_tol_c: float = 1.0
    u_range: tuple[float, float] = (-8.0, 8.0)
    n_u: int = 161
    delta_min_cells: int = 2
    delta_max_cells: int = 64
    mu: float = 0.75
    frac_radius: float | None = None
    bv_slack: float = 0.05
    slope_window: tuple[float, float] = (0.35, 1.2)
    max_stderr_frac: float = 0.2
    rate_reference: str = "scheme_zero"
    # psi bump for the entropy check (None -> derived from the grid)
    psi_x_center: float = 0.0
    psi_x_halfwidth: float | None = None
    psi_x_ramp: float | None = None
    psi_t_flat_frac: float = 0.6
    psi_t_end_frac: float = 0.9
    # declared x-dependence of the noise ("none" | "x"), checked against
    # the preset when given
    noise_x_dependence: str | None = None


def _parse_float(s):
    return float(s)


def _parse_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_str(s):
    return s.strip()


def _parse_floats(s):
    parts = s.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _parse_atoms(s):
    pairs = []
    for token in s.replace(",", " ").split():
        if ":" not in token:
            raise ValueError(f"atom {token!r} must look like z:w")
        z, w = token.split(":", 1)
        pairs.append((float(z), float(w)))
    if not pairs:
        raise ValueError("empty atom list")
    return tuple(pairs)


# key -> (parser, target)
# target "field:<name>" assigns a config field; "<section>.<param>" goes
# into that section's PresetRef parameters.
KEY_TABLE = {
    "kind": (_parse_str, "field:kind"),
    "grid.x_min": (_parse_float, "field:grid_x_min"),
    "grid.x_max": (_parse_float, "field:grid_x_max"),
    "grid.n_cells": (_parse_int, "field:grid_n_cells"),
    "horizon": (_parse_float, "field:horizon"),
    "snapshots": (_parse_floats, "field:snapshots"),
    "eps_list": (_parse_floats, "field:eps_list"),
    "ensemble": (_parse_int, "field:ensemble"),
    "seed": (_parse_int, "field:seed"),
    "cfl": (_parse_float, "field:cfl"),
    "scheme": (_parse_str, "field:scheme"),
    "max_dt": (_parse_float, "field:max_dt"),
    "u0.preset": (_parse_str, "preset:u0"),
    "u0.amp": (_parse_float, "u0.amp"),
    "u0.center": (_parse_float, "u0.center"),
    "u0.width": (_parse_float, "u0.width"),
    "u0.left": (_parse_float, "u0.left"),
    "u0.right": (_parse_float, "u0.right"),
    "u0.x0": (_parse_float, "u0.x0"),
    "u0.value": (_parse_float, "u0.value"),
    "u0.waves": (_parse_float, "u0.waves"),
    "u0.length": (_parse_float, "u0.length"),
    "flux.preset": (_parse_str, "preset:flux"),
    "flux.speed": (_parse_float, "flux.speed"),
    "flux.state_lo": (_parse_float, "flux.state_lo"),
    "flux.state_hi": (_parse_float, "flux.state_hi"),
    "noise.kind": (_parse_str, "preset:noise"),
    "noise.scale": (_parse_float, "noise.scale"),
    "noise.lambda_star": (_parse_float, "noise.lambda_star"),
    "noise.center": (_parse_float, "noise.center"),
    "noise.width": (_parse_float, "noise.width"),
    "noise.x_dependence": (_parse_str, "field:noise_x_dependence"),
    "measure.kind": (_parse_str, "preset:measure"),
    "measure.atoms": (_parse_atoms, "measure.atoms"),
    "measure.alpha": (_parse_float, "measure.alpha"),
    "measure.scale": (_parse_float, "measure.scale"),
    "measure.z_min": (_parse_float, "measure.z_min"),
    "measure.z_max": (_parse_float, "measure.z_max"),
    "measure.symmetric": (_parse_bool, "measure.symmetric"),
    "measure.kappa": (_parse_float, "field:kappa"),
    "v0.preset": (_parse_str, "preset:v0"),
    "v0.amp": (_parse_float, "v0.amp"),
    "v0.center": (_parse_float, "v0.center"),
    "v0.width": (_parse_float, "v0.width"),
    "v0.left": (_parse_float, "v0.left"),
    "v0.right": (_parse_float, "v0.right"),
    "v0.x0": (_parse_float, "v0.x0"),
    "v0.value": (_parse_float, "v0.value"),
    "cd.mode": (_parse_str, "field:cd_mode"),
    "cd.c_list": (_parse_floats, "field:cd_c_list"),
    "cd.slope_tol": (_parse_float, "field:cd_slope_tol"),
    "phi.radius": (_parse_float, "field:phi_radius"),
    "phi.decay": (_parse_float, "field:phi_decay"),
    "entropy.xi": (_parse_float, "field:xi"),
    "entropy.k_values": (_parse_floats, "field:k_values"),
    "entropy.tol_c": (_parse_float, "field:entropy_tol_c"),
    "distance.u_range": (_parse_floats, "field:u_range"),
    "distance.n_u": (_parse_int, "field:n_u"),
    "frac.delta_min_cells": (_parse_int, "field:delta_min_cells"),
    "frac.delta_max_cells": (_parse_int, "field:delta_max_cells"),
    "frac.mu": (_parse_float, "field:mu"),
    "frac.radius": (_parse_float, "field:frac_radius"),
    "bv.slack": (_parse_float, "field:bv_slack"),
    "rate.slope_min": (_parse_float, "special:slope_min"),
    "rate.slope_max": (_parse_float, "special:slope_max"),
    "rate.max_stderr_frac": (_parse_float, "field:max_stderr_frac"),
    "rate.reference": (_parse_str, "field:rate_reference"),
    "psi.x_center": (_parse_float, "field:psi_x_center"),
    "psi.x_halfwidth": (_parse_float, "field:psi_x_halfwidth"),
    "psi.x_ramp": (_parse_float, "field:psi_x_ramp"),
    "psi.t_flat_frac": (_parse_float, "field:psi_t_flat_frac"),
    "psi.t_end_frac": (_parse_float, "field:psi_t_end_frac"),
}

_REQUIRED = (
    "kind",
    "grid.x_min",
    "grid.x_max",
    "grid.n_cells",
    "horizon",
    "ensemble",
    "seed",
    "u0.preset",
    "flux.preset",
    "noise.kind",
    "measure.kind",
)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a config file."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text, source=str(path))


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    seen: dict[str, int] = {}
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KEY_TABLE:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key {key!r} (first set on line {seen[key]})"
            )
        seen[key] = lineno
        parser, _target = KEY_TABLE[key]
        try:
            raw[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None

    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"{source}: missing mandatory keys: {', '.join(missing)}")

    field_vals: dict[str, object] = {}
    preset_params: dict[str, dict[str, object]] = {"u0": {}, "v0": {}, "flux": {}, "noise": {}, "measure": {}}
    preset_names: dict[str, str] = {}
    for key, value in raw.items():
        _parser, target = KEY_TABLE[key]
        if target.startswith("field:"):
            field_vals[target[6:]] = value
        elif target.startswith("preset:"):
            preset_names[target[7:]] = value
        elif target == "special:slope_min":
            lo, hi = field_vals.get("slope_window", (0.35, 1.2))
            field_vals["slope_window"] = (value, hi)
        elif target == "special:slope_max":
            lo, hi = field_vals.get("slope_window", (0.35, 1.2))
            field_vals["slope_window"] = (lo, value)
        else:
            section, _, param = target.partition(".")
            preset_params[section][param] = value

    for section in ("u0", "v0", "flux", "noise", "measure"):
        if preset_params[section] and section not in preset_names:
            raise ConfigError(
                f"{source}: {section}.* parameters given without naming the {section} preset"
            )
    for section, name in preset_names.items():
        field_vals[section if section != "v0" else "v0"] = PresetRef(
            name, tuple(sorted(preset_params.get(section, {}).items()))
        )
    if "u_range" in field_vals:
        ur = field_vals["u_range"]
        if len(ur) != 2:
            raise ConfigError(f"{source}: distance.u_range needs exactly two values")
        field_vals["u_range"] = (ur[0], ur[1])

    field_vals.setdefault("snapshots", (field_vals["horizon"],))
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig(**{k: v for k, v in field_vals.items() if k in known})
    validate_config(cfg, source=source)
    return cfg


def validate_config(cfg: ExperimentConfig, source: str = "<config>") -> None:
    """Cross-field invariants; raises ConfigError naming the offender."""
    if cfg.kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"{source}: unknown experiment kind {cfg.kind!r}")
    if cfg.grid_x_max <= cfg.grid_x_min or cfg.grid_n_cells < 2:
        raise ConfigError(f"{source}: invalid grid")
    if cfg.horizon <= 0:
        raise ConfigError(f"{source}: horizon must be positive")
    if cfg.ensemble < 2:
        raise ConfigError(f"{source}: ensemble must be at least 2")
    if not cfg.snapshots or any(t <= 0 for t in cfg.snapshots):
        raise ConfigError(f"{source}: snapshots must be positive times")
    if sorted(cfg.snapshots) != list(cfg.snapshots):
        raise ConfigError(f"{source}: snapshots must be increasing")
    if max(cfg.snapshots) > cfg.horizon + 1e-12:
        raise ConfigError(f"{source}: snapshots exceed the horizon")
    if cfg.kind in ("error_rate", "continuous_dependence", "bv_monotone", "fractional_bv"):
        if not cfg.eps_list:
            raise ConfigError(f"{source}: {cfg.kind} needs eps_list")
    if cfg.kind in ("error_rate", "fractional_bv"):
        if any(e <= 0 for e in cfg.eps_list):
            raise ConfigError(f"{source}: eps_list must be positive for {cfg.kind}")
    if cfg.kind == "error_rate" and list(cfg.eps_list) != sorted(cfg.eps_list, reverse=True):
        raise ConfigError(f"{source}: eps_list must be strictly decreasing")
    if cfg.kind == "error_rate" and len(set(cfg.eps_list)) != len(cfg.eps_list):
        raise ConfigError(f"{source}: eps_list has repeated entries")
    if cfg.kind == "continuous_dependence":
        if cfg.cd_mode not in ("noise", "flux"):
            raise ConfigError(f"{source}: continuous_dependence needs cd.mode = noise|flux")
        if len(cfg.cd_c_list) < 2 or any(c <= 0 for c in cfg.cd_c_list):
            raise ConfigError(
                f"{source}: continuous_dependence needs at least two positive cd.c_list values"
            )
        # the second dataset is derived from (u0, F, eta) by the c-perturbation
        try:
            noise = build_noise(cfg.noise)
        except ConfigError:
            raise
        if noise.x_dependent:
            raise ConfigError(
                f"{source}: continuous dependence is stated for x-independent noise"
            )
    if cfg.kind == "bv_monotone":
        if build_noise(cfg.noise).x_dependent:
            raise ConfigError(f"{source}: bv_monotone needs an x-independent noise preset")
    if cfg.kind == "fractional_bv":
        if not 0.0 < cfg.mu < 1.0:
            raise ConfigError(f"{source}: frac.mu must lie in (0, 1)")
        if cfg.delta_min_cells < 1 or cfg.delta_max_cells < cfg.delta_min_cells:
            raise ConfigError(f"{source}: invalid delta ladder")
    # resolve every preset once so unknown names fail at validation time
    build_u0(cfg.u0)
    build_flux(cfg.flux)
    noise = build_noise(cfg.noise)
    build_measure(cfg.measure)
    if cfg.v0 is not None:
        build_u0(cfg.v0)
    if cfg.noise_x_dependence is not None:
        if cfg.noise_x_dependence not in ("none", "x"):
            raise ConfigError(f"{source}: noise.x_dependence must be 'none' or 'x'")
        declared = cfg.noise_x_dependence == "x"
        if declared != noise.x_dependent:
            raise ConfigError(
                f"{source}: noise.x_dependence = {cfg.noise_x_dependence!r} contradicts "
                f"the {cfg.noise.name!r} preset"
            )
