"""Run configuration: flat key = value files, typed resolution, manifests.

A config file is plain text, one `key = value` pair per line, with `#`
comments and blank lines ignored.  Keys mirror SystemParams, the grid, the
propagator settings, and the experiment tunables; command-line overrides win
over file values.  Every run writes a JSON manifest with the fully resolved
configuration and the package version, sufficient to reproduce the run.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .core import SpatialGrid, SystemParams
from .errors import ConfigError
from .propagator import PropagatorConfig


def _float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); None default means required when accessed
_SCHEMA = {
    # system
    "kappa": (float, None),
    "epsilon": (float, None),
    "hbar_eff": (float, None),
    "u_nl": (float, 0.0),
    # grid
    "x_max": (float, 30.0),
    "n_points": (int, 1024),
    # propagator
    "steps_per_period": (int, 1024),
    "splitting_order": (int, 2),
    "boundary_margin": (int, 5),
    "boundary_tol": (float, 1e-10),
    "check_boundary": (_bool, True),
    # floquet / basis
    "n_basis": (int, 128),
    "n_phases": (int, 32),
    # classical seeds
    "seed_x_window": (float, 6.0),
    "seed_p_window": (float, 3.5),
    "lattice_nx": (int, 32),
    "lattice_np": (int, 32),
    "poincare_periods": (int, 200),
    "chaos_threshold": (float, 1e-2),
    # husimi lattice
    "husimi_x_max": (float, 8.0),
    "husimi_p_max": (float, 3.5),
    "husimi_nx": (int, 128),
    "husimi_np": (int, 128),
    "island_radius": (float, 0.0),  # 0 = automatic
    # evolution / experiments
    "n_periods": (int, 1500),
    "store_every": (int, 0),
    "x0": (float, 0.0),
    "p0": (float, 0.0),
    "trap_floor": (float, 0.1),
    "u_target": (float, 0.0),
    "u_list": (_float_list, []),
    "sweep_param": (str, "epsilon"),
    "sweep_values": (_float_list, []),
    "bisect_resolution": (float, 0.05),
    "bisect_periods": (int, 600),
}

_CONSTRAINTS = {
    "kappa": ("must be positive", lambda v: v > 0),
    "epsilon": ("must lie in [0, 1)", lambda v: 0 <= v < 1),
    "hbar_eff": ("must be positive", lambda v: v > 0),
    "u_nl": ("must be non-negative", lambda v: v >= 0),
    "x_max": ("must be positive", lambda v: v > 0),
    "n_points": ("must be a positive power of two",
                 lambda v: v > 0 and (v & (v - 1)) == 0),
    "steps_per_period": ("must be positive", lambda v: v > 0),
    "splitting_order": ("must be 2 or 4", lambda v: v in (2, 4)),
    "n_basis": ("must be positive", lambda v: v > 0),
    "n_phases": ("must be positive", lambda v: v > 0),
    "n_periods": ("must be positive", lambda v: v > 0),
    "sweep_param": ("must be epsilon or hbar_eff",
                    lambda v: v in ("epsilon", "hbar_eff")),
    "bisect_resolution": ("must lie in (0, 1)", lambda v: 0 < v < 1),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; values accessed as attributes."""

    values: dict

    def __getattr__(self, key):
        values = object.__getattribute__(self, "values")
        if key in values:
            return values[key]
        raise AttributeError(key)

    def require(self, *keys):
        for key in keys:
            if self.values.get(key) is None:
                raise ConfigError(f"missing required key '{key}'", key=key)
        return self

    def system_params(self, u_nl=None):
        self.require("kappa", "epsilon", "hbar_eff")
        return SystemParams(kappa=self.kappa, epsilon=self.epsilon,
                            hbar_eff=self.hbar_eff,
                            u_nl=self.u_nl if u_nl is None else u_nl)

    def grid(self):
        return SpatialGrid(self.x_max, self.n_points)

    def propagator_config(self):
        return PropagatorConfig(steps_per_period=self.steps_per_period,
                                splitting_order=self.splitting_order,
                                boundary_margin=self.boundary_margin,
                                boundary_tol=self.boundary_tol,
                                check_boundary=self.check_boundary)


def parse_config_text(text):
    """key = value lines to a raw string dict; rejects unknown keys."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got "
                              f"{stripped!r}", key=stripped)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{key}'", key=key)
        raw[key] = value
    return raw


def resolve_config(file_text=None, overrides=None):
    """Merge defaults, a config file, and overrides into a RunConfig.

    overrides maps schema keys to already-typed values (or strings, which are
    parsed); file values are strings.  Precedence: overrides > file > default.
    """
    values = {}
    raw = parse_config_text(file_text) if file_text else {}
    overrides = overrides or {}
    for key, (parser, default) in _SCHEMA.items():
        if key in overrides and overrides[key] is not None:
            v = overrides[key]
            source = v if isinstance(v, str) else None
        elif key in raw:
            source = raw[key]
        else:
            values[key] = default
            continue
        try:
            values[key] = parser(source) if source is not None else v
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"key '{key}': {exc}", key=key) from None
    for key in overrides:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key '{key}'", key=key)
    for key, (msg, check) in _CONSTRAINTS.items():
        v = values.get(key)
        if v is not None and not check(v):
            raise ConfigError(f"key '{key}' {msg} (got {v!r})", key=key)
    return RunConfig(values)


def write_manifest(path, config, command=None, extra=None):
    """JSON manifest: resolved config + package version (+ command, extras)."""
    doc = {"version": __version__, "command": command,
           "config": {k: v for k, v in config.values.items()}}
    if extra:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
        fh.write("\n")


def load_manifest(path):
    """Rebuild a RunConfig from a manifest written by write_manifest."""
    with open(path) as fh:
        doc = json.load(fh)
    overrides = {k: v for k, v in doc["config"].items() if v is not None}
    return resolve_config(overrides={k: _restring(v)
                                     for k, v in overrides.items()})


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not JSON-serializable: {type(v)}")


def _restring(v):
    if isinstance(v, list):
        return " ".join(repr(x) for x in v)
    return repr(v) if not isinstance(v, str) else v
