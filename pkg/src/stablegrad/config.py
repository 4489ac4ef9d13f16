"""Flat key=value run configuration with dotted section prefixes.

Example:

    experiment = ou-gradient
    alpha = 1.2
    dimension = 3
    drift.name = ou
    drift.kappa = 1.0
    f.name = linear
    f.a = 1.0, 0.5, -0.25
    h = 1, 1, 1
    x0 = 0, 0, 0
    t = 1.0
    n_paths = 100000
    grid_size = 2048
    seed = 7

Lines starting with '#' are comments. Values are typed by the consumer;
validation errors always name the offending field.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid or missing configuration entry; `field` names the key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


_MISSING = object()


@dataclass
class RunConfig:
    entries: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        entries: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(line, f"line {lineno} is not 'key = value'")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
        return cls(entries)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def digest(self) -> str:
        canon = "\n".join(f"{k}={self.entries[k]}" for k in sorted(self.entries))
        return hashlib.md5(canon.encode("utf-8")).hexdigest()[:12]

    def has(self, key: str) -> bool:
        return key in self.entries

    def _raw(self, key: str, default=_MISSING) -> str:
        if key in self.entries:
            return self.entries[key]
        if default is _MISSING:
            raise ConfigError(key, "missing required entry")
        return default

    def get_str(self, key: str, default=_MISSING) -> str:
        return self._raw(key, default)

    def get_int(self, key: str, default=_MISSING) -> int:
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(key, f"not an integer: {raw!r}") from exc

    def get_float(self, key: str, default=_MISSING) -> float:
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(key, f"not a number: {raw!r}") from exc

    def get_vector(self, key: str, default=_MISSING) -> np.ndarray:
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return np.asarray(raw, dtype=np.float64)
        try:
            return np.array([float(v) for v in raw.split(",") if v.strip()],
                            dtype=np.float64)
        except ValueError as exc:
            raise ConfigError(key, f"not a comma-separated vector: {raw!r}") from exc

    def set(self, key: str, value) -> None:
        self.entries[key] = str(value)
