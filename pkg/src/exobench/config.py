"""Flat key = value configuration files.

One assignment per line, `#` starts a comment (units and notes live in
comments, not in values). Keys are registered up front; an unknown key is
an error rather than a silent ignore so typos surface immediately.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable


class ConfigError(ValueError):
    pass


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


@dataclass(frozen=True)
class ConfigKey:
    name: str
    parse: Callable[[str], object]
    description: str


_KEYS = {
    key.name: key
    for key in (
        ConfigKey("seed", int, "base RNG seed"),
        ConfigKey("rate_hz", float, "signal sample rate"),
        ConfigKey("group", str, "interface group, EMG or SH"),
        ConfigKey("hand_size", str, "glove size, S, M, or L"),
        ConfigKey("mas", str, "spasticity grade, 0, 1, 1+, or 2"),
        ConfigKey("sessions", int, "number of training sessions"),
        ConfigKey("duration_scale", float, "task duration multiplier"),
        ConfigKey("noise_std", float, "EMG noise standard deviation"),
        ConfigKey("crosstalk", float, "EMG channel mixing fraction"),
        ConfigKey("drift_rate", float, "EMG mean decay per second"),
        ConfigKey("sh_noise_n", float, "harness load-cell noise, newtons"),
        ConfigKey("q", str, "false discovery rate, as a decimal string"),
        ConfigKey("window_s", float, "feature window length, seconds"),
        ConfigKey("hop_s", float, "feature hop, seconds"),
        ConfigKey("vote_k", int, "majority vote window, decisions"),
        ConfigKey("arm_support", _parse_bool, "passive arm support in use"),
    )
}


def known_keys() -> tuple[str, ...]:
    return tuple(sorted(_KEYS))


def parse_config(text: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        name, _, raw = body.partition("=")
        name = name.strip()
        raw = raw.strip()
        if name not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {name!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {name!r}")
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {name!r}")
        try:
            values[name] = _KEYS[name].parse(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {name!r}: {exc}") from exc
    return values


def load_config(path: str | Path) -> dict[str, object]:
    return parse_config(Path(path).read_text())
