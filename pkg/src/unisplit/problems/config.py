"""JSON problem configurations.

A configuration is an object with a ``"problem"`` key (``helmholtz1d``,
``helmholtz2d``, ``diffusion``, ``pantograph`` or ``schrodinger``) and either
a ``"preset"`` naming one of the built-in desk problems or the fields of the
matching spec. Optional ``"target_norm"`` and ``"alpha"`` apply to all.

Field arrays may be given as

* a number (broadcast to ``"shape"``),
* a nested list of real numbers,
* ``{"re": [...], "im": [...]}``,
* ``{"sidecar": "file.bin", "shape": [...]}``: little-endian float64
  ``(re, im)`` pairs in row-major order, the path relative to the config.

Pantograph coefficients are a number, a ``[re, im]`` pair,
``{"piecewise": [[t_start, value], ...]}`` (value from ``t_start`` on) or
``{"gaussian": {"center": t, "rate": r, "amplitude": 1}}``.
"""
from __future__ import annotations

import json
import os
from typing import Any, Mapping

import numpy as np

from ..splitting import DEFAULT_ALPHA, DEFAULT_TARGET_NORM, SplitSystem
from .catalog import PRESETS, build_preset
from .diffusion import DiffusionSpec, build_diffusion_split
from .helmholtz import HelmholtzSpec, build_helmholtz_split
from .pantograph import PantographSpec, build_pantograph_split
from .schrodinger import SchrodingerSpec, build_schrodinger_split, double_ring_potential

__all__ = ["ConfigError", "PROBLEM_KINDS", "load_config", "build_from_config", "load_problem",
           "read_sidecar", "write_sidecar"]

PROBLEM_KINDS = ("helmholtz1d", "helmholtz2d", "diffusion", "pantograph", "schrodinger")


class ConfigError(ValueError):
    """An invalid or incomplete problem configuration."""


def write_sidecar(path, values) -> None:
    """Store a complex array as little-endian float64 ``(re, im)`` pairs."""
    np.ascontiguousarray(values, dtype="<c16").tofile(path)


def read_sidecar(path, shape) -> np.ndarray:
    data = np.fromfile(path, dtype="<f8")
    count = int(np.prod(shape))
    if data.size != 2 * count:
        raise ConfigError(f"sidecar {path} holds {data.size // 2} values, expected {count} for shape {tuple(shape)}")
    return (data[0::2] + 1j * data[1::2]).reshape(shape)


def _field(value, shape=None, base_dir: str = ".") -> np.ndarray:
    if isinstance(value, (int, float)):
        if shape is None:
            raise ConfigError("a scalar field needs a top-level 'shape'")
        return np.full(tuple(shape), complex(value))
    if isinstance(value, Mapping):
        if "sidecar" in value:
            shp = value.get("shape", shape)
            if shp is None:
                raise ConfigError("sidecar fields need a 'shape'")
            return read_sidecar(os.path.join(base_dir, value["sidecar"]), tuple(shp))
        if "re" in value:
            re = np.asarray(value["re"], dtype=float)
            im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
            if re.shape != im.shape:
                raise ConfigError("'re' and 'im' parts differ in shape")
            return re + 1j * im
        raise ConfigError(f"unrecognized field description with keys {sorted(value)}")
    if isinstance(value, list):
        return np.asarray(value, dtype=float).astype(complex)
    raise ConfigError(f"unrecognized field value of type {type(value).__name__}")


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError("complex numbers are written as [re, im]")
        return complex(v[0], v[1])
    return complex(v)


def _time_function(v):
    if isinstance(v, Mapping) and "piecewise" in v:
        pieces = sorted((float(t), _complex(val)) for t, val in v["piecewise"])
        starts = np.array([p[0] for p in pieces])
        values = np.array([p[1] for p in pieces])

        def f(t):
            idx = np.searchsorted(starts, np.asarray(t, dtype=float), side="right") - 1
            return values[np.clip(idx, 0, len(values) - 1)]
        return f
    if isinstance(v, Mapping) and "gaussian" in v:
        g = v["gaussian"]
        center, rate = float(g["center"]), float(g["rate"])
        amplitude = _complex(g.get("amplitude", 1.0))
        return lambda t: amplitude * np.exp(-rate * (np.asarray(t, dtype=float) - center) ** 2)
    if isinstance(v, (int, float, list)):
        return _complex(v)
    raise ConfigError(f"unrecognized time function {v!r}")


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"{cfg.get('problem')} configuration lacks {', '.join(missing)}")


def load_config(path) -> dict:
    """Read a JSON configuration, remembering its directory for sidecars."""
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg.setdefault("_base_dir", os.path.dirname(os.path.abspath(path)))
    return cfg


def build_from_config(cfg: Mapping[str, Any]) -> SplitSystem:
    """Build the split system a configuration describes."""
    kind = cfg.get("problem")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"'problem' must be one of {PROBLEM_KINDS}, got {kind!r}")
    target = float(cfg.get("target_norm", DEFAULT_TARGET_NORM))
    alpha = float(cfg.get("alpha", DEFAULT_ALPHA))
    if "preset" in cfg:
        if cfg["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {cfg['preset']!r}")
        return build_preset(cfg["preset"], target_norm=target, alpha=alpha)
    base = cfg.get("_base_dir", ".")
    shape = cfg.get("shape")
    name = cfg.get("name", kind)
    try:
        if kind in ("helmholtz1d", "helmholtz2d"):
            _require(cfg, "k2", "source", "spacing")
            spec = HelmholtzSpec(k2=_field(cfg["k2"], shape, base), source=_field(cfg["source"], shape, base),
                                 spacing=cfg["spacing"], absorber_width=int(cfg.get("absorber_width", 16)),
                                 absorber_strength=cfg.get("absorber_strength"), bias=cfg.get("bias", "complex"),
                                 name=name)
            if spec.k2.ndim != (1 if kind == "helmholtz1d" else 2):
                raise ConfigError(f"{kind} needs a {kind[-2]}-D k2 field")
            return build_helmholtz_split(spec, target, alpha)
        if kind == "diffusion":
            _require(cfg, "D", "a", "source", "spacing")
            spec = DiffusionSpec(D=_field(cfg["D"], shape, base), a=_field(cfg["a"], shape, base),
                                 source=_field(cfg["source"], shape, base), spacing=cfg["spacing"],
                                 absorber_width=int(cfg.get("absorber_width", 0)),
                                 absorber_strength=float(cfg.get("absorber_strength", 0.0)), name=name)
            return build_diffusion_split(spec, target, alpha)
        if kind == "pantograph":
            _require(cfg, "lam", "a", "b", "x0", "t0", "t_end", "dt")
            spec = PantographSpec(lam=float(cfg["lam"]), a=_time_function(cfg["a"]), b=_time_function(cfg["b"]),
                                  x0=_time_function(cfg["x0"]), t0=float(cfg["t0"]), t_end=float(cfg["t_end"]),
                                  dt=float(cfg["dt"]), name=name)
            return build_pantograph_split(spec, target, alpha, antisymmetric=bool(cfg.get("antisymmetric", False)))
        if kind == "schrodinger":
            if "double_ring" in cfg:
                pot, spacing = double_ring_potential(**cfg["double_ring"])
            else:
                _require(cfg, "potential", "spacing")
                pot, spacing = _field(cfg["potential"], shape, base), cfg["spacing"]
            spec = SchrodingerSpec(potential=pot, spacing=spacing, shift=float(cfg.get("shift", 0.0)), name=name)
            return build_schrodinger_split(spec, target, alpha)
    except ConfigError:
        raise
    except (TypeError, KeyError) as err:
        raise ConfigError(f"invalid {kind} configuration: {err}") from err
    raise AssertionError("unreachable")


def load_problem(path) -> SplitSystem:
    return build_from_config(load_config(path))
