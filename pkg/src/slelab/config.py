"""Run configuration: flat key-value config files plus CLI overrides.

Config files are INI-style with a single [run] section; every key can also be
given as a command-line flag, which wins.  Identical configs must reproduce
byte-identical outputs, so nothing here consults the clock or the machine.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

from .spectral import ConstraintSpec, GammaCone, Sigma2Lower

OUTPUT_ROOT_ENV = "SLELAB_OUT"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    command: str = ""
    n: int = 3
    constraint: str = "cone"  # cone | sigma2
    eps: float = 1.0
    theta: Optional[float] = None
    spectrum: Optional[tuple] = None
    grid_l: float = 2.0
    grid_points: int = 17
    seed: int = 1
    count: int = 8
    samples: int = 100000
    amplitude: float = 0.0
    amplitudes: tuple = (0.0, 0.01, 0.05, 0.1)
    rotate: bool = False
    tol: float = 1e-9
    check: str = "all"
    r: float = 0.125
    out_dir: Optional[str] = None
    jobs: int = 1

    def constraint_spec(self) -> ConstraintSpec:
        if self.constraint == "cone":
            return GammaCone(self.n)
        if self.constraint == "sigma2":
            if self.n != 3:
                raise ConfigError("sigma2 constraint requires n = 3")
            return Sigma2Lower(self.eps)
        raise ConfigError(f"unknown constraint family {self.constraint!r}")

    def validate(self) -> "RunConfig":
        if self.command == "spectral-fuzz":
            if not 2 <= self.n <= 8:
                raise ConfigError(f"dimension n = {self.n} outside [2, 8]")
        elif not 2 <= self.n <= 4:
            raise ConfigError(f"dimension n = {self.n} outside [2, 4] (grid limit)")
        if self.constraint not in ("cone", "sigma2"):
            raise ConfigError(f"unknown constraint family {self.constraint!r}")
        if self.constraint == "sigma2" and not self.eps > 0:
            raise ConfigError("sigma2 family needs eps > 0")
        if self.grid_points < 9 or self.grid_points % 2 == 0:
            raise ConfigError("grid_points must be an odd integer >= 9")
        if self.theta is not None and not abs(self.theta) < self.n * math.pi / 2:
            raise ConfigError(f"theta = {self.theta} is unreachable (|theta| >= n*pi/2)")
        if self.spectrum is not None and len(self.spectrum) != self.n:
            raise ConfigError("spectrum length must equal the dimension")
        if self.count < 1 or self.samples < 1:
            raise ConfigError("count and samples must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0 < self.r < 0.25:
            raise ConfigError("doubling radius r must lie in (0, 1/4)")
        return self

    def output_root(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        return Path(os.environ.get(OUTPUT_ROOT_ENV, "slelab-out"))

    def canonical_items(self) -> list:
        out = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out_dir":
                continue  # output location must not change report content
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            out.append((f.name, repr(v) if not isinstance(v, str) else v))
        return out

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _parse_tuple(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def load_config_file(path) -> dict:
    """Read a [run] section of flat key = value pairs."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if "run" not in parser:
        raise ConfigError(f"config file {path} has no [run] section")
    return dict(parser["run"])


def build_config(command: str, file_values: dict, cli_values: dict) -> RunConfig:
    """Merge config file values and CLI overrides into a validated RunConfig."""
    cfg = RunConfig(command=command)
    merged = dict(file_values)
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    casts = {
        "n": int, "grid_points": int, "seed": int, "count": int, "samples": int,
        "jobs": int,
        "eps": float, "theta": float, "grid_l": float, "amplitude": float,
        "tol": float, "r": float,
        "spectrum": _parse_tuple, "amplitudes": _parse_tuple,
        "rotate": lambda v: v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes"),
    }
    for key, value in merged.items():
        if not hasattr(cfg, key) or key == "command":
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(cfg, key, casts.get(key, str)(value) if value is not None else None)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}")
    return cfg.validate()
