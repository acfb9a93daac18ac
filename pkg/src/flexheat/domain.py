"""Core value types shared across the package.

Everything here is an immutable value or a pure function, so it can be used
freely from any thread.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

NORM_LOW = 0.1
NORM_HIGH = 0.9

PHI_LOW = 0.7
PHI_HIGH = 1.3
MAX_WINDOW_STEPS = 40


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


class InputError(ValueError):
    """Raised for invalid data passed to an operation."""


@dataclass(frozen=True)
class TimeGrid:
    start: datetime
    n_steps: int
    step_minutes: int = 15

    def __post_init__(self):
        if self.step_minutes <= 0:
            raise ConfigError(f"step_minutes must be positive, got {self.step_minutes}")
        if self.n_steps <= 0:
            raise ConfigError(f"n_steps must be positive, got {self.n_steps}")

    @property
    def dt_hours(self) -> float:
        return self.step_minutes / 60.0

    @property
    def steps_per_day(self) -> int:
        return (24 * 60) // self.step_minutes

    @property
    def steps_per_hour(self) -> int:
        return 60 // self.step_minutes

    def timestamp(self, t: int) -> datetime:
        return self.start + timedelta(minutes=self.step_minutes * t)


@dataclass(frozen=True)
class FlexibilityRequest:
    """Operator message asking to scale window energy by ``phi`` relative to BAU.

    ``t_start`` is inclusive and ``t_end`` exclusive, both as step indices.
    """

    t_start: int
    t_end: int
    phi: float
    announced_at: int = 0

    def __post_init__(self):
        if not (self.announced_at <= self.t_start < self.t_end):
            raise InputError(
                f"need announced_at <= t_start < t_end, got "
                f"({self.announced_at}, {self.t_start}, {self.t_end})"
            )
        if not self.phi > 0:
            raise InputError(f"phi must be positive, got {self.phi}")

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start

    @property
    def reduce(self) -> bool:
        """True when the window caps consumption (phi <= 1), False when it sets a floor."""
        return self.phi <= 1.0

    def contains(self, t: int) -> bool:
        return self.t_start <= t < self.t_end

    def validate(self, phi_range=(PHI_LOW, PHI_HIGH), max_steps=MAX_WINDOW_STEPS):
        lo, hi = phi_range
        if not lo <= self.phi <= hi:
            raise InputError(f"phi={self.phi} outside [{lo}, {hi}]")
        if self.duration > max_steps:
            raise InputError(f"window of {self.duration} steps exceeds {max_steps}")
        return self


@dataclass(frozen=True)
class ComfortBand:
    t_min: float = 23.5
    t_max: float = 25.0

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ConfigError(f"comfort band needs t_min < t_max, got {self.t_min}, {self.t_max}")

    def violation(self, t_room: float) -> float:
        """Distance in kelvin outside the band (0 inside)."""
        return max(t_room - self.t_max, 0.0) - min(t_room - self.t_min, 0.0)


@dataclass(frozen=True)
class NormSpec:
    raw_min: float
    raw_max: float

    def __post_init__(self):
        if not self.raw_min < self.raw_max:
            raise ConfigError(f"NormSpec needs raw_min < raw_max, got {self.raw_min}, {self.raw_max}")


def normalize(x: float, spec: NormSpec) -> float:
    """Min-max map ``[raw_min, raw_max]`` onto ``[0.1, 0.9]``; out-of-range input is clamped."""
    if not spec.raw_min < spec.raw_max:
        raise ConfigError("invalid NormSpec")
    if x <= spec.raw_min:
        return NORM_LOW
    if x >= spec.raw_max:
        return NORM_HIGH
    frac = (x - spec.raw_min) / (spec.raw_max - spec.raw_min)
    return NORM_LOW + (NORM_HIGH - NORM_LOW) * frac


def denormalize(y: float, spec: NormSpec) -> float:
    if not spec.raw_min < spec.raw_max:
        raise ConfigError("invalid NormSpec")
    frac = (y - NORM_LOW) / (NORM_HIGH - NORM_LOW)
    return spec.raw_min + frac * (spec.raw_max - spec.raw_min)


def window_features(t: int, request: Optional[FlexibilityRequest]) -> tuple[int, int]:
    """Steps until the window opens and until it closes, as seen at step ``t``.

    Both are zero before the request is announced, after the window has
    closed, or when there is no request.
    """
    if request is None or t < request.announced_at or t >= request.t_end:
        return 0, 0
    if t < request.t_start:
        return request.t_start - t, request.t_end - t
    return 0, request.t_end - t


def flexibility_budget(request: FlexibilityRequest, e_bau_window: float) -> float:
    """Allowed window energy ``phi * E_BAU`` in kWh (a cap for phi <= 1, a floor above)."""
    if e_bau_window < 0:
        raise InputError(f"BAU window energy must be non-negative, got {e_bau_window}")
    return request.phi * e_bau_window
