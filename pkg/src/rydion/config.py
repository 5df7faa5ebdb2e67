"""Experiment configuration: YAML files with unit-suffixed keys.

Every physical quantity carries its unit in the key name, e.g.
``Omega_MHz: 13.1`` or ``d_um: 1.0``. Frequencies are ordinary frequencies
in the file; the 2 pi is applied on load so the resolved config holds
angular frequencies (rad/s), lengths in metres and times in seconds.
Unknown keys are rejected with their full key path.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

KINDS = ("bo-curves", "dressed", "trap-info", "gate", "gate-thermal", "micromotion",
         "taylor-check")

_UNITS = {
    "freq": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
}

# block -> key -> dimension ("freq", "length", "time") or a plain python type
_SCHEMA = {
    "species": {"atom": str, "ion": str, "defects_file": str},
    "trap": {"omega_i": "freq", "Omega_rf": "freq", "q": float},
    "bo": {"n": int, "l": int, "j": float, "n_min": int, "n_max": int, "l_max": int,
           "R_min": "length", "R_max": "length", "points": int, "trap_phases": list,
           "geometry": str, "all_mj": bool, "window": "freq"},
    "dressing": {"Omega": "freq", "Delta0": "freq", "n": int, "l": int, "j": float,
                 "R_w": "length", "min_ratio": float},
    "dressed": {"R_min": "length", "R_max": "length", "points": int, "Delta0_list": list},
    "gate": {"preset": str, "omega_i": "freq", "omega_a": "freq", "delta": "freq",
             "eta_Omega": "freq", "d": "length", "n_ion": int, "n_atom": int,
             "inputs": list, "samples": int, "modulation": str, "steps_per_period": int},
    "thermal": {"nbar_a": float, "nbar_i": float, "n_max": int, "input": str},
    "micromotion": {"omega_a": "freq", "d": "length", "delta_perp": "freq",
                    "eta_Omega": "freq", "ramp": "time", "t_end": "time",
                    "ramp_shape": str, "ramp_drive": bool, "steps_per_rf": int,
                    "samples": int, "zoom_start": "time", "zoom_length": "time"},
    "grid": {"points": int, "widths": float},
    "taylor_check": {"steps_per_rf": int, "t_end": "time", "d": "length"},
    "output": {"dir": str},
    "cache": {"enabled": bool, "dir": str},
}

_LIST_ITEMS = {("bo", "trap_phases"): str, ("gate", "inputs"): str,
               ("dressed", "Delta0_list"): "freq"}

_TWO_PI = 2 * math.pi

# defaults reproduce the parameter sets of the reference calculations
DEFAULTS = {
    "species": {"atom": "Li7", "ion": "Yb171"},
    "trap": {"omega_i": _TWO_PI * 250e3, "Omega_rf": _TWO_PI * 2.5e6, "q": 0.28},
    "bo": {"n": 30, "l": 0, "j": 0.5, "n_min": 25, "n_max": 35, "l_max": 34,
           "R_min": 0.3e-6, "R_max": 4e-6, "points": 200, "trap_phases": [],
           "geometry": "radial", "all_mj": False, "window": _TWO_PI * 200e9},
    "dressing": {"Omega": _TWO_PI * 10.02e6, "Delta0": _TWO_PI * 0.4e9, "n": 30, "l": 0,
                 "j": 0.5, "min_ratio": 10.0},
    "dressed": {"R_min": 0.1e-6, "R_max": 4e-6, "points": 400,
                "Delta0_list": [_TWO_PI * 1e9, _TWO_PI * 0.4e9]},
    "gate": {"preset": "reference", "omega_i": _TWO_PI * 250e3, "omega_a": _TWO_PI * 205e3,
             "n_ion": 10, "n_atom": 10, "inputs": ["++", "+-", "-+", "--"], "samples": 400,
             "modulation": "plus", "steps_per_period": 200},
    "thermal": {"nbar_a": 0.25, "nbar_i": 0.25, "n_max": 3, "input": "++"},
    "micromotion": {"omega_a": _TWO_PI * 200e3, "d": 1e-6, "delta_perp": _TWO_PI * 1.064e3,
                    "ramp": 50e-6, "ramp_shape": "sin2", "ramp_drive": True,
                    "steps_per_rf": 128, "samples": 2500},
    "grid": {"points": 256, "widths": 12.0},
    "taylor_check": {"steps_per_rf": 100, "d": 1e-6},
    "output": {"dir": "out"},
    "cache": {"enabled": True},
}

# settings that differ from DEFAULTS per experiment kind
_KIND_DEFAULTS = {
    "bo-curves": {"species": {"atom": "Li6"}},
    "micromotion": {"dressing": {"Omega": _TWO_PI * 13.1e6, "Delta0": _TWO_PI * 0.8e9},
                    "trap": {"omega_i": 0.0}},
    "taylor-check": {"dressing": {"Omega": _TWO_PI * 13.1e6, "Delta0": _TWO_PI * 0.8e9},
                     "trap": {"omega_i": 0.0}},
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    kind: str
    values: dict        # resolved SI values, block -> key -> value
    source: dict        # the file contents as read

    def __getitem__(self, block):
        return self.values[block]

    def canonical(self) -> str:
        return json.dumps({"kind": self.kind, "values": self.values}, sort_keys=True,
                          default=str)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _split_unit(key: str):
    base, _, suffix = key.rpartition("_")
    for dim, table in _UNITS.items():
        if base and suffix in table:
            return base, dim, table[suffix]
    return key, None, None


def _convert(path, value, dim, factor):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value) * factor
    return _TWO_PI * v if dim == "freq" else v


def _check_plain(path, value, typ):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, typ) and not (typ is int and isinstance(value, bool)):
        return value
    raise ConfigError(path, f"expected {typ.__name__}, got {value!r}")


def _parse_block(block: str, raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(block, "expected a mapping")
    schema = _SCHEMA[block]
    out = {}
    for key, value in raw.items():
        path = f"{block}.{key}"
        base, dim, factor = _split_unit(str(key))
        if base not in schema:
            raise ConfigError(path, "unknown key")
        want = schema[base]
        if isinstance(want, str):
            if dim is None:
                raise ConfigError(path, f"{want} quantity needs a unit suffix, e.g. {base}_"
                                  + next(iter(_UNITS[want])))
            if dim != want:
                raise ConfigError(path, f"unit suffix is a {dim}, expected a {want}")
            out[base] = _convert(path, value, dim, factor)
        elif want is list:
            if dim is not None and _LIST_ITEMS.get((block, base)) != dim:
                raise ConfigError(path, "unexpected unit suffix")
            if not isinstance(value, list):
                raise ConfigError(path, "expected a list")
            item = _LIST_ITEMS[(block, base)]
            if isinstance(item, str):
                if dim is None:
                    raise ConfigError(path, "list of frequencies needs a unit suffix")
                out[base] = [_convert(f"{path}[{i}]", v, dim, factor) for i, v in enumerate(value)]
            else:
                out[base] = [_check_plain(f"{path}[{i}]", v, item) for i, v in enumerate(value)]
        else:
            if dim is not None:
                raise ConfigError(path, "this key takes no unit suffix")
            out[base] = _check_plain(path, value, want)
    return out


def _merge(dst: dict, src: dict):
    for block, vals in src.items():
        dst.setdefault(block, {}).update(vals)


def parse_config(raw: dict, kind: str | None = None) -> ExperimentConfig:
    """Validate a config mapping and resolve defaults for experiment ``kind``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    file_kind = raw.get("experiment")
    if file_kind is not None and file_kind not in KINDS:
        raise ConfigError("experiment", f"unknown experiment kind {file_kind!r}")
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ConfigError("experiment", f"file is for {file_kind!r}, command is {kind!r}")
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("experiment", "no experiment kind given")
    values = copy.deepcopy(DEFAULTS)
    _merge(values, copy.deepcopy(_KIND_DEFAULTS.get(kind, {})))
    for block, body in raw.items():
        if block == "experiment":
            continue
        if block not in _SCHEMA:
            raise ConfigError(block, "unknown section")
        _merge(values, {block: _parse_block(block, body)})
    _validate(kind, values)
    return ExperimentConfig(kind, values, raw)


def _validate(kind, v):
    if v["species"]["atom"] not in ("Li6", "Li7"):
        raise ConfigError("species.atom", "supported atoms are Li6 and Li7")
    if v["species"]["ion"] != "Yb171":
        raise ConfigError("species.ion", "supported ion is Yb171")
    for phase in v["bo"]["trap_phases"]:
        if phase not in ("max+", "zero", "max-"):
            raise ConfigError("bo.trap_phases", f"unknown phase {phase!r}")
    if v["gate"]["preset"] not in ("reference", "self-consistent"):
        raise ConfigError("gate.preset", "expected 'reference' or 'self-consistent'")
    for label in v["gate"]["inputs"]:
        if label not in ("++", "+-", "-+", "--"):
            raise ConfigError("gate.inputs", f"unknown input {label!r}")
    if v["thermal"]["input"] not in ("++", "+-", "-+", "--"):
        raise ConfigError("thermal.input", "unknown input")
    g = v["grid"]["points"]
    if g < 8 or g & (g - 1):
        raise ConfigError("grid.points", "must be a power of two")
    if v["micromotion"]["steps_per_rf"] < 100:
        raise ConfigError("micromotion.steps_per_rf", "at least 100 steps per rf period")
    if v["bo"]["points"] < 2:
        raise ConfigError("bo.points", "need at least two points")


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    """Read and validate a YAML config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from exc
    return parse_config(raw, kind)


_BASE_SUFFIX = {"freq": "Hz", "length": "m", "time": "s"}


def dump_config(cfg: ExperimentConfig) -> dict:
    """Resolved config as a file mapping in base units (Hz, m, s).

    ``parse_config(dump_config(cfg))`` reproduces ``cfg.values``.
    """
    out = {"experiment": cfg.kind}
    for block, vals in cfg.values.items():
        schema = _SCHEMA[block]
        body = {}
        for key, value in vals.items():
            want = schema[key]
            if isinstance(want, str):
                v = value / _TWO_PI if want == "freq" else value
                body[f"{key}_{_BASE_SUFFIX[want]}"] = v
            elif want is list and isinstance(_LIST_ITEMS[(block, key)], str):
                dim = _LIST_ITEMS[(block, key)]
                body[f"{key}_{_BASE_SUFFIX[dim]}"] = [v / _TWO_PI for v in value]
            else:
                body[key] = copy.deepcopy(value)
        out[block] = body
    return out
