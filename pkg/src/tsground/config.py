"""Flat key=value config files shared by the synthetic generator and the trainer.

Files are UTF-8 text, one ``key = value`` pair per line, ``#`` starts a
comment. Values are coerced into dataclass fields by field type; unknown
keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import get_type_hints


class ConfigError(ValueError):
    """Unparsable config text, unknown key, or uncoercible value."""


def parse_flat_file(path) -> dict[str, str]:
    """Read a flat key=value file into a raw string mapping."""
    raw = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def _coerce_value(text: str, target_type, key: str):
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {text!r}")
    try:
        return target_type(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def field_types(dc_type) -> dict[str, type]:
    hints = get_type_hints(dc_type)
    return {f.name: hints[f.name] for f in dataclasses.fields(dc_type)}


def coerce_into(dc_type, raw: dict[str, str]):
    """Build a dataclass instance from raw strings; unknown keys are errors."""
    types = field_types(dc_type)
    unknown = sorted(set(raw) - set(types))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {k: _coerce_value(v, types[k], k) for k, v in raw.items()}
    return dc_type(**kwargs)


def split_raw(raw: dict[str, str], *dc_types) -> list[dict[str, str]]:
    """Partition a raw mapping among several dataclasses' fields.

    Keys claimed by no dataclass raise; keys claimed by more than one go to
    the first claimant.
    """
    buckets = [dict() for _ in dc_types]
    for key, value in raw.items():
        for bucket, dc_type in zip(buckets, dc_types):
            if key in field_types(dc_type):
                bucket[key] = value
                break
        else:
            raise ConfigError(f"unknown config key: {key}")
    return buckets


def apply_overrides(cfg, overrides: dict):
    """Return a copy of a dataclass with non-None override values applied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **updates)


def config_echo(cfg) -> str:
    """Serialize a dataclass back to flat key=value text."""
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"
