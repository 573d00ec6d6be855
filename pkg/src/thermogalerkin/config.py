"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Every key must be known;
values are parsed to the type of the default.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, object] = {
    "domain.L": 1.0,
    "domain.H": 1.0,
    "domain.nx": 64,
    "domain.ny": 64,
    "domain.order": 6,
    "physics.a": 0.1,
    "physics.theta_inf": 0.0,
    "physics.theta_p": 1.0,
    "physics.T": 1.0,
    "velocity.kind": "steady-vortex",
    "velocity.V0": 1.0,
    "velocity.file": "",
    "initial.kind": "bump",
    "initial.amplitude": 1.0,
    "initial.mode": 1,
    "lifting.depth": 2000,
    "lifting.accelerated": True,
    "solver.m": 32,
    "solver.dt": 1e-3,
    "solver.scheme": "crank-nicolson",
    "solver.snapshot_stride": 100,
    "eigs.fd_n": 128,
    "estimates.tol_floor": 1e-8,
    "estimates.tol_k": 1.0,
    "estimates.e3_constant": "auto",
    "estimates.p_values": "1,1.5,1.9",
    "estimates.sweep_m_list": "8,16,32,64",
    "output.directory": "out",
    "output.formats": "csv,json",
}

INITIAL_KINDS = ("zero", "mode", "bump")


def _parse(key: str, raw: str):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


@dataclass
class RunConfig:
    values: dict
    source_text: str = ""
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def floats(self, key) -> list[float]:
        return [float(s) for s in str(self.values[key]).split(",") if s.strip()]

    def ints(self, key) -> list[int]:
        return [int(s) for s in str(self.values[key]).split(",") if s.strip()]

    def inputs(self) -> dict:
        """All values except where outputs go."""
        return {k: v for k, v in self.values.items() if k != "output.directory"}

    def canonical_text(self) -> str:
        inp = self.inputs()
        return "".join(f"{k} = {inp[k]!r}\n" for k in sorted(inp))

    def input_hash(self) -> str:
        h = hashlib.sha256(self.canonical_text().encode())
        path = self.velocity_file
        if path is not None:
            h.update(path.read_bytes())
        return h.hexdigest()

    @property
    def velocity_file(self) -> Path | None:
        f = self.values["velocity.file"]
        if not f:
            return None
        p = Path(f)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self) -> "RunConfig":
        v = self.values
        for key in ("domain.L", "domain.H", "physics.a", "physics.T", "solver.dt"):
            if not v[key] > 0:
                raise ConfigError(f"{key} must be positive, got {v[key]}")
        for key in ("domain.nx", "domain.ny"):
            if v[key] < 4:
                raise ConfigError(f"{key} must be >= 4, got {v[key]}")
        if v["solver.m"] < 1:
            raise ConfigError(f"solver.m must be >= 1, got {v['solver.m']}")
        if v["physics.theta_p"] == v["physics.theta_inf"]:
            raise ConfigError("physics.theta_p must differ from physics.theta_inf")
        if v["initial.kind"] not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}, got {v['initial.kind']!r}")
        if v["velocity.kind"] == "user-sampled":
            path = self.velocity_file
            if path is None or not path.exists():
                raise ConfigError(f"velocity.file: file not found ({v['velocity.file']!r})")
        if v["estimates.e3_constant"] != "auto":
            try:
                float(v["estimates.e3_constant"])
            except ValueError:
                raise ConfigError("estimates.e3_constant must be 'auto' or a number") from None
        for key in ("estimates.p_values", "estimates.sweep_m_list"):
            try:
                self.floats(key)
            except ValueError:
                raise ConfigError(f"{key}: expected a comma-separated list of numbers") from None
        return self


def parse_config(text: str, overrides=(), base_dir: Path | str = ".") -> RunConfig:
    values = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        _assign(values, *line.split("=", 1), where=f"line {lineno}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        _assign(values, *item.split("=", 1), where="--set")
    return RunConfig(values, text, Path(base_dir)).validate()


def _assign(values, key, raw, where):
    key = key.strip()
    if key not in DEFAULTS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    values[key] = _parse(key, raw)


def load_config(path=None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), overrides, base_dir=path.parent)
