"""Shared configuration plumbing for file-driven entry points."""

from __future__ import annotations

from pathlib import Path

import yaml


class ConfigError(Exception):
    """A config file (or config mapping) cannot be turned into a runnable setup."""


def load_mapping(path: str | Path) -> dict:
    """Read a YAML (or JSON, which is a YAML subset) mapping from disk."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {p} must contain a mapping at the top level")
    return data
