"""Validated analysis and reconstruction settings."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

TRANSFORMS = ("s1", "time", "time+freq", "joint")


@dataclass(frozen=True)
class ReconConfig:
    objective: str = "time_s1s2"
    iterations: int = 1000
    step: float = 0.1
    seed: int = 0
    tol: float | None = None

    def __post_init__(self):
        from .reconstruction import OBJECTIVES
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"recon.objective must be one of {OBJECTIVES}")
        if not (isinstance(self.iterations, int) and self.iterations >= 1):
            raise ConfigError("recon.iterations must be an integer >= 1")
        if not self.step > 0:
            raise ConfigError("recon.step must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("recon.tol must be positive")


@dataclass(frozen=True)
class Config:
    """Defaults reproduce Q = 8, T = 32 ms and K = 4 octaves."""

    Q: int = 8
    T_ms: float = 32.0
    K_octaves: float = 4.0
    oversampling: int = 2
    transform: str = "time"
    log_eps: float | None = None
    padding: str = "reflect"
    recon: ReconConfig = field(default_factory=ReconConfig)
    input: str | None = None
    output: str | None = None

    def __post_init__(self):
        if not (isinstance(self.Q, int) and self.Q >= 1):
            raise ConfigError(f"Q must be an integer >= 1, got {self.Q!r}")
        if not self.T_ms > 0:
            raise ConfigError(f"T must be positive, got {self.T_ms!r} ms")
        if not self.K_octaves >= 1:
            raise ConfigError(f"K must be >= 1 octave, got {self.K_octaves!r}")
        if not (isinstance(self.oversampling, int) and self.oversampling >= 0):
            raise ConfigError("oversampling must be a nonnegative integer")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if self.log_eps is not None and not self.log_eps > 0:
            raise ConfigError("log_eps must be positive")
        if self.padding not in ("reflect", "periodic"):
            raise ConfigError(f"unknown padding {self.padding!r}")

    @property
    def T(self):
        return self.T_ms / 1000.0

    def to_dict(self):
        return asdict(self)


def _check_keys(d, cls, where):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def config_from_dict(d, base: Config | None = None) -> Config:
    """Overlay ``d`` on ``base`` (defaults when omitted); unknown keys are rejected."""
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    base = base or Config()
    _check_keys(d, Config, "config")
    d = dict(d)
    if "recon" in d:
        r = d["recon"]
        if not isinstance(r, dict):
            raise ConfigError("recon must be an object")
        _check_keys(r, ReconConfig, "recon")
        try:
            d["recon"] = replace(base.recon, **r)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return replace(base, **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> Config:
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: {exc}") from None
    return config_from_dict(d)


_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ms|s)?\s*$")


def parse_ms(text) -> float:
    """``'32ms'``, ``'0.032s'`` or a bare number of milliseconds."""
    m = _DURATION.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse duration {text!r}; use e.g. 32ms or 0.032s")
    v = float(m.group(1))
    return v * 1000.0 if m.group(2) == "s" else v
