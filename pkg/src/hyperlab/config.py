"""Run configuration: flat ``key = value`` files with command-line overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError

LIST_KEYS = ("lambdas", "ps")
# keys that do not change results and so stay out of the hash
UNHASHED = ("out", "workers", "mutate")

ALIASES = {"lambda": "lam", "Tmax": "T_max", "T_max": "T_max", "C_delta": "zero_window_C"}


@dataclass(frozen=True)
class RunConfig:
    N: int = 3
    p: float = 3.0
    lam: float = 0.5
    epsilon: float = 0.0
    ball: Optional[float] = None
    t0: float = 1e-4
    h: float = 0.01
    T_max: float = 15.0
    ode_tol: float = 1e-13
    eig_tol: float = 1e-12
    zero_window_C: float = 10.0
    ell_max: int = 4
    lambdas: tuple = ()
    ps: tuple = ()
    out: str = "out"
    seed: int = 0
    workers: int = 1
    mutate: Optional[str] = None

    def __post_init__(self):
        for name in ("ode_tol", "eig_tol", "zero_window_C"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.h <= 0.05:
            raise ConfigurationError(f"h={self.h} must lie in (0, 0.05]")
        if not 0 < self.t0 <= 1e-2:
            raise ConfigurationError(f"t0={self.t0} must lie in (0, 1e-2]")
        if self.t0 >= self.h:
            raise ConfigurationError("t0 must be smaller than h")
        if not self.T_max > 0:
            raise ConfigurationError("T_max must be positive")
        if self.ball is not None and not self.ball > 0:
            raise ConfigurationError("ball radius must be positive")
        if self.ell_max < 2:
            raise ConfigurationError("ell_max must be at least 2")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    def hashed_fields(self) -> dict:
        d = dataclasses.asdict(self)
        for k in UNHASHED:
            d.pop(k)
        d["lambdas"] = list(d["lambdas"])
        d["ps"] = list(d["ps"])
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw):
    if raw is None:
        return None
    if key in LIST_KEYS:
        if isinstance(raw, (list, tuple)):
            return tuple(float(x) for x in raw)
        return tuple(float(x) for x in str(raw).replace(",", " ").split())
    if key in ("N", "ell_max", "seed", "workers"):
        value = float(raw)
        if value != int(value):
            raise ConfigurationError(f"{key} must be an integer, got {raw!r}")
        return int(value)
    if key in ("out", "mutate"):
        return str(raw)
    if key == "ball" and str(raw).strip().lower() in ("", "none"):
        return None
    return float(raw)


def canonical_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    return key


def parse_config_text(text: str) -> dict:
    """``key = value`` per line; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = canonical_key(key)
        try:
            out[key] = _convert(key, value.strip())
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (``None`` values ignored)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        key = canonical_key(key)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {exc}") from None
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if value is None:
            continue
        if name in LIST_KEYS:
            value = ",".join(repr(float(x)) for x in value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"
