"""
Checker Configuration
=====================
Loads solver limits and budgets from ``checker_settings.json``.

Usage:
    from core.config import SETTINGS, load_settings

    settings = load_settings(maxint=15)     # explicit overrides win
"""

import json
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

_ENV_OVERRIDES = {
    "BDEAD_MAXINT": "maxint",
    "BDEAD_TIMEOUT_MS": "timeout_ms",
    "BDEAD_EVENT_TIMEOUT_MS": "event_timeout_ms",
    "BDEAD_MAX_STATES": "max_states",
}


@dataclass(frozen=True)
class Settings:
    """Solver limits, budgets and model-checking bounds."""

    maxint: int = 1023
    quantifier_expansion_limit: int = 64
    nested_set_universe_limit: int = 1024
    event_timeout_ms: int = 200
    timeout_ms: int = 10000
    max_decisions: int = 1_000_000
    max_states: int = 100000
    bench_max_states: int = 10000
    bench_workers: int = 4

    @property
    def minint(self) -> int:
        return -self.maxint


def _flatten(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Flatten the grouped JSON layout into Settings field names."""
    flat = {}
    for section, values in raw.items():
        if isinstance(values, dict):
            for key, value in values.items():
                flat[key] = value
        else:
            flat[section] = values
    if "workers" in flat:
        flat["bench_workers"] = flat.pop("workers")
    return flat


def load_settings(settings_file: str = 'checker_settings.json', **overrides: Any) -> Settings:
    """
    Load settings from JSON, then environment, then explicit overrides.

    Args:
        settings_file: Path to JSON settings (relative paths resolve next to this module)
        **overrides: Settings field values that take precedence

    Returns:
        Settings instance

    Raises:
        ValueError: If an override names an unknown setting or maxint < 1
    """
    if not os.path.isabs(settings_file):
        _current_dir = os.path.dirname(os.path.abspath(__file__))
        settings_file = os.path.join(_current_dir, settings_file)

    values: Dict[str, Any] = {}
    if os.path.exists(settings_file):
        with open(settings_file, 'r') as f:
            values.update(_flatten(json.load(f)))

    for env_name, field_name in _ENV_OVERRIDES.items():
        env_value = os.environ.get(env_name)
        if env_value:
            values[field_name] = int(env_value)

    for key, value in overrides.items():
        if value is not None:
            values[key] = value

    known = set(Settings.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"Unknown settings: {', '.join(sorted(unknown))}")

    settings = Settings(**values)
    if settings.maxint < 1:
        raise ValueError("maxint must be at least 1")
    return settings


def with_overrides(settings: Settings, **overrides: Optional[Any]) -> Settings:
    """Return a copy of settings with the non-None overrides applied."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    return replace(settings, **changes) if changes else settings


SETTINGS = load_settings()
