"""Sectioned key-value run configuration.

Plain INI files (stdlib ``configparser``), one section per subsystem.
Every value has a documented default; the fully resolved configuration
is echoed next to the outputs for reproducibility. Validation errors
name the offending key path (for example ``grid.k_shells[0]``).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .coherence import CoherenceField
from .dynamics import ConstantMedium, SimulationState, TrigMedium, cfl_dt
from .grid import GridConfig, PhaseSpaceGrid, build_grid
from .scattering import (
    AngleSpec,
    DiagTestSpec,
    IsotropicSpec,
    RotationSpec,
    build_kernel,
)


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "grid": {
        "x_extent": "6.283185307179586, 6.283185307179586",
        "x_points": "32, 32",
        "k_shells": "1.0",
        "k_angles": "32",
    },
    "medium": {
        "model": "constant",       # constant | trig
        "v0": "1.0",
        "amplitude": "0.15",
        "modes": "1, 1",
    },
    "kernel": {
        "type": "rotation",        # isotropic | angle | rotation | diag_test
        "sigma0": "0.25",
        "beta": "1.0",
        "profile": "uniform",      # uniform | cos2 | vonmises
        "param": "0.0",
    },
    "initial": {
        "profile": "bump",         # uniform | bump | polarized_bump
        "intensity": "1.0",
        "contrast": "0.5",
        "width": "1.0",
        "anisotropy": "0.5",
        "angle_harmonic": "1",
        "polarization": "0.0",
    },
    "integrator": {
        "scheme": "midpoint",      # rk4 | midpoint
        "cfl_safety": "0.5",       # exclusive with dt
        "dt": "",
        "n_steps": "100",
        "record_interval": "5",
        "snapshot_interval": "0",
        "picard_tol": "1e-14",
        "picard_max_iters": "400",
    },
    "output": {
        "directory": "out",
        "formats": "csv",
    },
    "rays": {
        "model": "waveguide",      # homogeneous | linear | conical | waveguide
        "v0": "1.0",
        "rho0": "2.0",             # conical apex scale / waveguide center radius
        "width": "1.5",            # waveguide channel width
        "gradient": "0.0, 0.0, 0.1",
        "x0": "2.6, 0.0, 0.0",
        "k0": "0.0, 0.9, 0.3",
        "length": "12.0",
        "samples": "600",
        "tol": "1e-10",
    },
}


def _parse_scalar(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}"
        ) from None


def _parse_tuple(section: str, key: str, raw: str, kind):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    out = []
    for i, p in enumerate(parts):
        try:
            out.append(kind(p))
        except ValueError:
            raise ConfigError(
                f"{section}.{key}[{i}]: cannot parse {p!r} as {kind.__name__}"
            ) from None
    return tuple(out)


@dataclass
class RunConfig:
    """Fully resolved configuration with typed values."""

    grid: GridConfig
    medium: dict
    kernel: dict
    initial: dict
    integrator: dict
    output: dict
    rays: dict
    resolved: dict = field(default_factory=dict)

    def resolved_text(self) -> str:
        lines = []
        for section, values in self.resolved.items():
            lines.append(f"[{section}]")
            for key, val in values.items():
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def default_config() -> RunConfig:
    """The all-defaults configuration (used by `verify` without a file)."""
    parser = configparser.ConfigParser()
    parser.add_section("grid")
    return _build_config(parser)


def parse_config(path) -> RunConfig:
    """Load, default-fill and validate a run configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} is missing or unreadable")
    return _build_config(parser)


def _build_config(parser: configparser.ConfigParser) -> RunConfig:

    for section in parser.sections():
        if section not in _DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _DEFAULTS[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    resolved = {}
    for section, defaults in _DEFAULTS.items():
        resolved[section] = dict(defaults)
        if parser.has_section(section):
            resolved[section].update(parser[section])

    g = resolved["grid"]
    x_points = _parse_tuple("grid", "x_points", g["x_points"], int)
    x_extent = _parse_tuple("grid", "x_extent", g["x_extent"], float)[: len(x_points)]
    if len(x_extent) != len(x_points):
        raise ConfigError("grid.x_extent must provide one extent per x dimension")
    shells = _parse_tuple("grid", "k_shells", g["k_shells"], float)
    for i, r in enumerate(shells):
        if r <= 0:
            raise ConfigError(f"grid.k_shells[{i}]: radius {r} is not positive "
                              "(k = 0 is excluded)")
    if any(b <= a for a, b in zip(shells, shells[1:])):
        raise ConfigError("grid.k_shells: radii must be strictly ascending")
    k_angles = _parse_scalar("grid", "k_angles", g["k_angles"], int)
    for i, n in enumerate(x_points):
        if n < 4:
            raise ConfigError(f"grid.x_points[{i}]: need at least 4 points")
    if k_angles < 4:
        raise ConfigError("grid.k_angles: need at least 4 angles")
    grid_cfg = GridConfig(x_extent, x_points, shells, k_angles)

    m = resolved["medium"]
    medium = {
        "model": m["model"].strip().lower(),
        "v0": _parse_scalar("medium", "v0", m["v0"], float),
        "amplitude": _parse_scalar("medium", "amplitude", m["amplitude"], float),
        "modes": _parse_tuple("medium", "modes", m["modes"], int),
    }
    if medium["model"] not in ("constant", "trig"):
        raise ConfigError(f"medium.model: unknown model {medium['model']!r}")
    if medium["v0"] <= 0:
        raise ConfigError("medium.v0: velocity must be positive")

    k = resolved["kernel"]
    kernel = {
        "type": k["type"].strip().lower(),
        "sigma0": _parse_scalar("kernel", "sigma0", k["sigma0"], float),
        "beta": _parse_scalar("kernel", "beta", k["beta"], float),
        "profile": k["profile"].strip().lower(),
        "param": _parse_scalar("kernel", "param", k["param"], float),
    }
    if kernel["type"] not in ("isotropic", "angle", "rotation", "diag_test"):
        raise ConfigError(f"kernel.type: unknown kernel {kernel['type']!r}")
    if kernel["sigma0"] < 0:
        raise ConfigError("kernel.sigma0: must be nonnegative")

    ic = resolved["initial"]
    initial = {
        "profile": ic["profile"].strip().lower(),
        "intensity": _parse_scalar("initial", "intensity", ic["intensity"], float),
        "contrast": _parse_scalar("initial", "contrast", ic["contrast"], float),
        "width": _parse_scalar("initial", "width", ic["width"], float),
        "anisotropy": _parse_scalar("initial", "anisotropy", ic["anisotropy"], float),
        "angle_harmonic": _parse_scalar("initial", "angle_harmonic",
                                        ic["angle_harmonic"], int),
        "polarization": _parse_scalar("initial", "polarization",
                                      ic["polarization"], float),
    }
    if initial["profile"] not in ("uniform", "bump", "polarized_bump"):
        raise ConfigError(f"initial.profile: unknown profile {initial['profile']!r}")
    if initial["intensity"] <= 0:
        raise ConfigError("initial.intensity: must be positive")

    it = resolved["integrator"]
    dt_raw = it["dt"].strip()
    cfl_raw = it["cfl_safety"].strip()
    explicit_dt = dt_raw != ""
    # a config that sets dt must not also set cfl_safety (the default
    # carries cfl_safety, so only complain when both were user-supplied)
    user_keys = {key for key in (parser["integrator"] if parser.has_section("integrator") else {})}
    if explicit_dt and "cfl_safety" in user_keys:
        raise ConfigError("integrator.dt and integrator.cfl_safety are exclusive; "
                          "set exactly one")
    integrator = {
        "scheme": it["scheme"].strip().lower(),
        "dt": _parse_scalar("integrator", "dt", dt_raw, float) if explicit_dt else None,
        "cfl_safety": (None if explicit_dt
                       else _parse_scalar("integrator", "cfl_safety", cfl_raw, float)),
        "n_steps": _parse_scalar("integrator", "n_steps", it["n_steps"], int),
        "record_interval": _parse_scalar("integrator", "record_interval",
                                         it["record_interval"], int),
        "snapshot_interval": _parse_scalar("integrator", "snapshot_interval",
                                           it["snapshot_interval"], int),
        "picard_tol": _parse_scalar("integrator", "picard_tol",
                                    it["picard_tol"], float),
        "picard_max_iters": _parse_scalar("integrator", "picard_max_iters",
                                          it["picard_max_iters"], int),
    }
    if integrator["scheme"] not in ("rk4", "midpoint"):
        raise ConfigError(f"integrator.scheme: unknown scheme {integrator['scheme']!r}")
    if integrator["n_steps"] <= 0:
        raise ConfigError("integrator.n_steps: must be positive")
    if explicit_dt and integrator["dt"] <= 0:
        raise ConfigError("integrator.dt: must be positive")

    out = dict(resolved["output"])
    out["formats"] = tuple(f.strip() for f in out["formats"].split(",") if f.strip())
    for f in out["formats"]:
        if f not in ("csv", "snap"):
            raise ConfigError(f"output.formats: unknown format {f!r}")

    ry = resolved["rays"]
    rays = {
        "model": ry["model"].strip().lower(),
        "v0": _parse_scalar("rays", "v0", ry["v0"], float),
        "rho0": _parse_scalar("rays", "rho0", ry["rho0"], float),
        "width": _parse_scalar("rays", "width", ry["width"], float),
        "gradient": _parse_tuple("rays", "gradient", ry["gradient"], float),
        "x0": _parse_tuple("rays", "x0", ry["x0"], float),
        "k0": _parse_tuple("rays", "k0", ry["k0"], float),
        "length": _parse_scalar("rays", "length", ry["length"], float),
        "samples": _parse_scalar("rays", "samples", ry["samples"], int),
        "tol": _parse_scalar("rays", "tol", ry["tol"], float),
    }
    if rays["model"] not in ("homogeneous", "linear", "conical", "waveguide"):
        raise ConfigError(f"rays.model: unknown model {rays['model']!r}")
    for key in ("x0", "k0", "gradient"):
        if len(rays[key]) != 3:
            raise ConfigError(f"rays.{key}: need exactly 3 components")

    return RunConfig(grid_cfg, medium, kernel, initial, integrator, out, rays,
                     resolved=resolved)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def make_medium(cfg: RunConfig):
    m = cfg.medium
    if m["model"] == "constant":
        return ConstantMedium(m["v0"])
    return TrigMedium(m["v0"], m["amplitude"], m["modes"])


def make_kernel_spec(cfg: RunConfig):
    k = cfg.kernel
    if k["type"] == "isotropic":
        return IsotropicSpec(k["sigma0"])
    if k["type"] == "angle":
        return AngleSpec(k["sigma0"], k["profile"], k["param"])
    if k["type"] == "rotation":
        return RotationSpec(k["sigma0"], k["beta"], k["profile"], k["param"])
    return DiagTestSpec(k["sigma0"])


def make_initial(grid: PhaseSpaceGrid, cfg: RunConfig) -> CoherenceField:
    ic = cfg.initial
    x1, x2, _r, th = grid.meshgrid()
    data = np.zeros(grid.shape + (4,))
    if ic["profile"] == "uniform":
        bump = np.ones(grid.shape)
    else:
        kx1 = 2.0 * np.pi / grid.x_extent[0]
        inv_w2 = 1.0 / ic["width"] ** 2
        bump = np.exp(inv_w2 * (np.cos(kx1 * x1 - np.pi) - 1.0))
        if grid.x_dims == 2:
            kx2 = 2.0 * np.pi / grid.x_extent[1]
            bump = bump * np.exp(inv_w2 * (np.cos(kx2 * x2 - np.pi) - 1.0))
        bump = 1.0 + ic["contrast"] * bump
        bump = np.broadcast_to(bump, grid.shape).copy()
    angular = 1.0 + ic["anisotropy"] * np.cos(ic["angle_harmonic"] * th)
    data[..., 0] = ic["intensity"] * bump * angular
    if ic["profile"] == "polarized_bump" and ic["polarization"] != 0.0:
        data[..., 1] = ic["polarization"] * data[..., 0] * np.cos(2.0 * th)
        data[..., 2] = ic["polarization"] * data[..., 0] * np.sin(2.0 * th)
    return CoherenceField(grid, data)


def make_state(cfg: RunConfig) -> SimulationState:
    grid = build_grid(cfg.grid)
    kernel = build_kernel(make_kernel_spec(cfg), grid)
    medium = make_medium(cfg)
    w = make_initial(grid, cfg)
    return SimulationState(w, kernel, medium)


def resolve_dt(cfg: RunConfig, state: SimulationState) -> float:
    it = cfg.integrator
    if it["dt"] is not None:
        return it["dt"]
    return cfl_dt(state, it["cfl_safety"])
