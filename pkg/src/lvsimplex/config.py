"""Strict run configuration.

A run is described by one TOML document::

    seed = 7
    out = "runs/attract"

    [operator]
    family = "power_attract"
    m = 3
    eps = 1.0
    ell = 1

    [tolerances]
    tau_conv = 1e-10

    [simulate]
    starts = [[0.5, 0.3, 0.2]]

Unknown keys are rejected at every level.  Defaults are materialized when
the config is bound to a command, so the echo written to the manifest
re-parses to the same configuration.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import LVError
from .operators import LVOperator, from_description
from .simplex import ToleranceProfile

COMMANDS = ("simulate", "classify", "fixed-points", "periodic", "preimage",
            "surjectivity", "plot")
SAMPLED = {"classify", "surjectivity"}

_POINTS = "points"
# section -> key -> (type, default); a default of None marks a required key
SECTIONS: dict[str, dict[str, tuple[str, Any]]] = {
    "simulate": {"starts": (_POINTS, None)},
    "classify": {"budget": ("int", 200)},
    "fixed_points": {"grid_density": ("int", 6)},
    "periodic": {"r_max": ("int", 4), "grid_density": ("int", 20)},
    "preimage": {"targets": (_POINTS, None), "n_steps": ("int", 20)},
    "surjectivity": {"n_targets": ("int", 100), "n_steps": ("int", 20)},
    "plot": {"csv": ("str", "")},
}
TOLERANCE_KEYS = {"tau_simplex": "float", "tau_tie": "float", "tau_conv": "float",
                  "tau_root": "float", "max_iter": "int", "confirm_steps": "int",
                  "max_stored": "int"}
TOP_KEYS = {"seed", "out", "threads", "operator", "tolerances", *SECTIONS}


class ConfigError(LVError, ValueError):
    pass


def section_name(command: str) -> str:
    return command.replace("-", "_")


def _typed(value, kind: str, where: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if kind == _POINTS:
        if (not isinstance(value, list) or not value
                or not all(isinstance(p, list) and p for p in value)):
            raise ConfigError(f"{where} must be a nonempty list of coordinate lists")
        out = []
        for p in value:
            if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p):
                raise ConfigError(f"{where} entries must be numbers")
            out.append([float(c) for c in p])
        return out
    raise AssertionError(kind)


@dataclass
class RunConfig:
    operator: dict | None = None
    seed: int | None = None
    out: str | None = None
    threads: int = 1
    tolerances: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a table")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        cfg = cls()
        if "seed" in data:
            cfg.seed = _typed(data["seed"], "int", "seed")
            if not 0 <= cfg.seed < 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
        if "out" in data:
            cfg.out = _typed(data["out"], "str", "out")
        if "threads" in data:
            cfg.threads = _typed(data["threads"], "int", "threads")
            if cfg.threads < 1:
                raise ConfigError("threads must be >= 1")
        if "operator" in data:
            if not isinstance(data["operator"], dict):
                raise ConfigError("[operator] must be a table")
            cfg.operator = data["operator"]
            cfg.build_operator()  # fail early on a bad [operator] table
        tol = data.get("tolerances", {})
        if not isinstance(tol, dict):
            raise ConfigError("[tolerances] must be a table")
        for k, v in tol.items():
            if k not in TOLERANCE_KEYS:
                raise ConfigError(f"unknown tolerance {k!r}")
            cfg.tolerances[k] = _typed(v, TOLERANCE_KEYS[k], f"tolerances.{k}")
        try:
            ToleranceProfile(**cfg.tolerances)
        except ValueError as exc:
            raise ConfigError(f"bad tolerances: {exc}") from None
        for name, schema in SECTIONS.items():
            if name not in data:
                continue
            sec = data[name]
            if not isinstance(sec, dict):
                raise ConfigError(f"[{name}] must be a table")
            extra = set(sec) - set(schema)
            if extra:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
            cfg.sections[name] = {k: _typed(v, schema[k][0], f"{name}.{k}")
                                  for k, v in sec.items()}
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_mapping(data)

    def to_mapping(self) -> dict:
        out: dict = {}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.out is not None:
            out["out"] = self.out
        out["threads"] = self.threads
        if self.operator is not None:
            out["operator"] = self.operator
        out["tolerances"] = dict(self.tolerances)
        for name in SECTIONS:
            if name in self.sections:
                out[name] = dict(self.sections[name])
        return out

    @property
    def profile(self) -> ToleranceProfile:
        return ToleranceProfile(**self.tolerances)

    def build_operator(self) -> LVOperator:
        if self.operator is None:
            raise ConfigError("this command needs an [operator] table")
        try:
            return from_description(self.operator, self.profile)
        except (KeyError, ValueError, TypeError, LVError) as exc:
            raise ConfigError(f"bad [operator]: {exc}") from None

    def bind(self, command: str, seed: int | None = None, out: str | None = None,
             threads: int | None = None) -> "RunConfig":
        """Copy with CLI overrides applied and the command's defaults filled in."""
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        cfg = RunConfig.from_mapping(self.to_mapping())
        if seed is not None:
            if not 0 <= seed < 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg.seed = seed
        if out is not None:
            cfg.out = out
        if threads is not None:
            if threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg.threads = threads
        if cfg.out is None:
            raise ConfigError("no output directory: pass --out or set `out`")
        if command in SAMPLED and cfg.seed is None:
            raise ConfigError(f"{command} is sampled and needs a seed")
        if command != "plot":
            cfg.build_operator()
        name = section_name(command)
        sec = dict(cfg.sections.get(name, {}))
        for key, (_, default) in SECTIONS[name].items():
            if key not in sec:
                if default is None:
                    raise ConfigError(f"[{name}] needs {key!r}")
                sec[key] = default
        cfg.sections[name] = sec
        return cfg

    def section(self, command: str) -> dict:
        return self.sections[section_name(command)]


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.load(path)
