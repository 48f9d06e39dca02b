"""Flat key=value configuration: defaults < config file < CLI flags.

Every tunable of the toolkit lives under a dotted key with a typed
default; unknown keys are rejected so typos fail loudly. The effective
configuration can be dumped for reproducibility via ``--print-config``.
"""

from __future__ import annotations

from typing import Any


class ConfigError(Exception):
    """Malformed configuration input or unknown key."""


DEFAULTS: dict[str, Any] = {
    "detector": "arcfast",
    "geometry.width": 240,
    "geometry.height": 180,
    "io.out_of_order": "reject",
    "evharris.queue_capacity": 2000,
    "evharris.patch": 9,
    "evharris.gauss_sigma": 1.0,
    "evharris.harris_k": 0.04,
    "evharris.threshold": 6.0,
    "anms.window_radius": 4,
    "anms.k": 20.0,
    "anms.tau_fallback": 0.05,
    "anms.tau_neighbors": 5,
    "anms.sae_policy": "all",
    "tracks.interpolation": "linear",
    "label.positive_radius": 1.0,
    "label.negative_radius": 5.0,
    "eval.t_min": 100.0 / 24.0,
    "eval.t_max": 400.0 / 24.0,
    "eval.frame_period": 1.0 / 24.0,
    "bench.repetitions": 5,
    "bench.min_events": 100_000,
}


def parse_keyvalue_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    pairs: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{line_no}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def parse_keyvalue_file(path: str) -> dict[str, str]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_keyvalue_text(fh.read(), source=path)


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if isinstance(value, str):
        try:
            if isinstance(default, bool):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(value)
            if isinstance(default, int):
                return int(value)
            if isinstance(default, float):
                return float(value)
            return value
        except ValueError:
            raise ConfigError(
                f"key {key!r}: cannot parse {value!r} as {type(default).__name__}"
            ) from None
    if isinstance(default, float) and isinstance(value, int):
        return float(value)
    if not isinstance(value, type(default)):
        raise ConfigError(f"key {key!r}: expected {type(default).__name__}, got {value!r}")
    return value


class Config:
    """Effective settings after merging defaults, file, and overrides."""

    def __init__(self) -> None:
        self.values: dict[str, Any] = dict(DEFAULTS)

    @classmethod
    def load(cls, path: str | None = None, overrides: dict[str, Any] | None = None) -> "Config":
        cfg = cls()
        if path is not None:
            for key, value in parse_keyvalue_file(path).items():
                cfg.set(key, value)
        if overrides:
            for key, value in overrides.items():
                if value is not None:
                    cfg.set(key, value)
        return cfg

    def set(self, key: str, value: Any) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        self.values[key] = _coerce(key, value)

    def get(self, key: str) -> Any:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self.values[key]

    def dump(self) -> str:
        """All effective keys, one ``key = value`` line each, sorted."""
        return "\n".join(f"{k} = {self.values[k]}" for k in sorted(self.values))
