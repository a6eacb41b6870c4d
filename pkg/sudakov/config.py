"""Runtime settings read from the environment (and a project ``.env``)."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .numeric import FLOAT, MODES

try:
    from dotenv import load_dotenv
except Exception:  # pragma: no cover
    load_dotenv = None

PROJECT_ROOT = Path(__file__).resolve().parent.parent

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class Settings:
    mode: str = FLOAT
    seed: int = 0
    float_tol: float = 1e-9
    class_key_tol: float = 1e-7
    witness_radius: float = 1e-6
    forward_step: Fraction = Fraction(1, 4)
    forward_trials: int = 12
    section_bound: Fraction = Fraction(10)
    min_chart_kappa: float = 1e-6
    area_slack: float = 0.05
    resolution: int = 200
    histogram_bins: int = 16
    min_histogram_samples: int = 8
    max_monotonicity_support: int = 60
    log_dir: str = "logs"
    log_level: str = "INFO"

    @property
    def exact(self) -> bool:
        return self.mode != FLOAT


_ENV_NAMES = {f.name: f"SUDAKOV_{f.name.upper()}" for f in fields(Settings)}


def _env(name: str) -> str:
    return (os.environ.get(name, "") or "").strip()


def _parse_int(name: str, raw: str, minimum: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _parse_float(name: str, raw: str, *, positive: bool = True) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None
    if value < 0 or (positive and value == 0):
        raise ConfigError(f"{name} must be {'positive' if positive else 'non-negative'}, got {raw}")
    return value


def _parse_fraction(name: str, raw: str) -> Fraction:
    try:
        value = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name} must be a rational like 1/4 or 0.25, got {raw!r}") from None
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {raw}")
    return value


def _coerce(field_name: str, raw: str):
    name = _ENV_NAMES[field_name]
    if field_name == "mode":
        value = raw.lower()
        if value not in MODES:
            raise ConfigError(f"{name} must be one of {', '.join(MODES)}, got {raw!r}")
        return value
    if field_name == "log_level":
        value = raw.upper()
        if value not in LOG_LEVELS:
            raise ConfigError(f"{name} must be one of {', '.join(LOG_LEVELS)}, got {raw!r}")
        return value
    if field_name == "log_dir":
        return raw
    if field_name == "seed":
        return _parse_int(name, raw, 0)
    if field_name in ("forward_trials", "resolution", "histogram_bins", "min_histogram_samples", "max_monotonicity_support"):
        return _parse_int(name, raw, 1)
    if field_name in ("forward_step", "section_bound"):
        return _parse_fraction(name, raw)
    if field_name == "area_slack":
        value = _parse_float(name, raw, positive=False)
        if value >= 1:
            raise ConfigError(f"{name} must be below 1, got {raw}")
        return value
    if field_name == "witness_radius":
        return _parse_float(name, raw, positive=False)
    return _parse_float(name, raw)


def load_settings(overrides: dict | None = None, *, use_dotenv: bool = True) -> Settings:
    """Build settings from SUDAKOV_* variables, then apply explicit overrides.

    ``overrides`` holds already-parsed values (CLI flags); ``None`` entries are
    ignored so argparse defaults do not mask the environment.
    """
    if use_dotenv and load_dotenv is not None:
        try:
            load_dotenv(PROJECT_ROOT / ".env", override=False)
        except Exception:
            pass

    values = {}
    for field_name, env_name in _ENV_NAMES.items():
        raw = _env(env_name)
        if raw:
            values[field_name] = _coerce(field_name, raw)
    settings = Settings(**values)

    if overrides:
        clean = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _ENV_NAMES:
                raise ConfigError(f"unknown setting {key!r}")
            clean[key] = _coerce(key, str(value)) if isinstance(value, str) else value
        settings = replace(settings, **clean)
    return settings
