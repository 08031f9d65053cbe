"""Plain ``key=value`` run configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

SUBCOMMANDS = ("modes", "fpl-modes", "grazing-study", "relax", "bench", "validate")

# Settings that select the collision kernel (forwarded to parse_kernel_spec).
KERNEL_KEYS = ("kind", "gamma", "nu", "s", "epsilon", "lambda0", "c")


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def parse_float_list(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    parts = [p for p in str(value).replace(";", ",").split(",") if p.strip()]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {value!r}") from exc


def parse_int_list(value):
    return [int(round(v)) for v in parse_float_list(value)]


@dataclass
class RunConfig:
    subcommand: str
    settings: dict = field(default_factory=dict)
    out: Path = Path("out")
    cache: Path | None = None
    seed: int = 0

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.out = Path(self.out)
        self.cache = None if self.cache in (None, "") else Path(self.cache)
        if "eps" in self.settings:
            eps = parse_float_list(self.settings["eps"])
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigError(f"epsilon list must be strictly decreasing, got {eps}")
            if any(not 0 < e <= 1 for e in eps):
                raise ConfigError("epsilon values must lie in (0, 1]")

    def get(self, key, default=None, cast=str):
        value = self.settings.get(key, default)
        if value is None:
            return None
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    def kernel_spec(self, **defaults):
        spec = dict(defaults)
        spec.update({k: v for k, v in self.settings.items() if k in KERNEL_KEYS})
        return spec

    def canonical(self):
        """Stable text form of everything that affects results."""
        lines = [f"subcommand={self.subcommand}", f"seed={int(self.seed)}"]
        lines += [f"{k}={self.settings[k]}" for k in sorted(self.settings)]
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()
