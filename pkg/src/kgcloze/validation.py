"""Small input-validation helpers used across estimators and operations."""

from __future__ import annotations

from typing import Sequence

from .errors import ConfigError

SIMPLEX_TOL = 1e-9


def check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return value


def check_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonnegative(value: float, name: str) -> float:
    if value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return value


def check_unit_interval(value: float, name: str, *, open_left: bool = False,
                        open_right: bool = False) -> float:
    lo_ok = value > 0 if open_left else value >= 0
    hi_ok = value < 1 if open_right else value <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise ConfigError(f"{name} must lie in {lo}0, 1{hi}, got {value!r}")
    return value


def check_simplex(weights: Sequence[float], name: str = "weights") -> None:
    if any(w < 0 for w in weights):
        raise ConfigError(f"{name} must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ConfigError(f"{name} must sum to 1 within {SIMPLEX_TOL}, got {total!r}")


def check_ratios(ratios: Sequence[float], name: str = "ratios") -> None:
    if len(ratios) != 3:
        raise ConfigError(f"{name} must have three components, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"{name} must be nonnegative")
    if abs(sum(ratios) - 1.0) > SIMPLEX_TOL:
        raise ConfigError(f"{name} must sum to 1, got {sum(ratios)!r}")
