"""Run configuration: validation, file parsing, manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict, fields as dc_fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


_U0_PRESETS = ("zero", "taylor-green", "random")
_MARK_LAWS = ("two-point", "uniform", "gaussian")


@dataclass
class SolverConfig:
    """Flat run configuration; flags and config-file keys mirror the fields.

    Times are in the simulation's dimensionless units (viscosity 1, box
    side 2*pi); ``rate`` is the expected number of jumps per unit time.
    """

    n: int = 64
    horizon: float = 1.0
    dt: float = 1e-3
    alpha: float = 0.1
    gamma: float = 1.5
    sigma: float = 0.5
    rate: float = 10.0
    mark_law: str = "two-point"
    u0: str = "zero"
    u0_amplitude: float = 0.5
    u0_seed: int = 7
    tol: float = 1e-9
    max_iter: int = 60
    n_paths: int = 200
    seed: int = 20260808
    snapshot_stride: int = 0
    noise_ceiling: float = 1e8
    workers: int = 1
    outdir: str = "runs"

    def validate(self) -> "SolverConfig":
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"n must be even and >= 8, got {self.n}")
        if not 0.0 < self.alpha < 0.25:
            raise ConfigError(
                f"alpha must lie strictly inside (0, 0.25), got {self.alpha}; "
                "the negative-order noise space is only defined there"
            )
        if self.gamma <= 0 or self.gamma + 2 * self.alpha <= 1.0:
            raise ConfigError(
                f"noise too rough: need gamma > 0 and gamma + 2*alpha > 1, "
                f"got gamma={self.gamma}, alpha={self.alpha}; increase gamma "
                "or alpha"
            )
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.dt <= 0 or self.dt > self.horizon / 2:
            raise ConfigError(
                f"dt must satisfy 0 < dt <= horizon/2, got {self.dt}"
            )
        if self.rate < 0:
            raise ConfigError(f"rate must be nonnegative, got {self.rate}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if self.mark_law not in _MARK_LAWS:
            raise ConfigError(
                f"unknown mark_law {self.mark_law!r}; pick one of {_MARK_LAWS}"
            )
        if self.u0 not in _U0_PRESETS:
            raise ConfigError(
                f"unknown u0 preset {self.u0!r}; pick one of {_U0_PRESETS}"
            )
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be >= 0 (0 disables)")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "SolverConfig":
        """Parse a flat ``key = value`` file; '#' starts a comment."""
        values: dict = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: dict) -> "SolverConfig":
        known = {f.name: f.type for f in dc_fields(cls)}
        kwargs = {}
        for key, val in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[name] = _coerce(name, val, known[name])
        return cls(**kwargs)


def _coerce(name: str, value, type_name):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    text = str(value)
    try:
        if type_name in ("int", int):
            return int(text)
        if type_name in ("float", float):
            return float(text)
        return text
    except ValueError as err:
        raise ConfigError(f"cannot parse {name}={text!r}: {err}") from None


@dataclass
class RunManifest:
    """Everything needed to reproduce a run bit-exactly with the same build."""

    config: dict
    config_hash: str
    code_version: str
    path_seeds: list
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))
