"""Exogenous scenarios and flexibility-request generation.

The synthetic generator is a stand-in for measured building data: a
winter-like sinusoidal ambient temperature with day-to-day drift, a
half-sine solar profile, a fixed neighbor temperature and a two-tier tariff
with noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

from .domain import (
    MAX_WINDOW_STEPS,
    PHI_HIGH,
    PHI_LOW,
    FlexibilityRequest,
    InputError,
    TimeGrid,
)
from .thermal import ExogenousSample, time_features


@dataclass
class Scenario:
    grid: TimeGrid
    t_amb: np.ndarray
    i_solar: np.ndarray
    t_neigh: np.ndarray
    price: np.ndarray
    requests: list = field(default_factory=list)
    rng_seed: Optional[int] = None

    def __post_init__(self):
        n = self.grid.n_steps
        for name in ("t_amb", "i_solar", "t_neigh", "price"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise InputError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        self._time = np.array([time_features(self.grid.timestamp(t)) for t in range(n)])

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    @property
    def dt(self) -> float:
        return self.grid.dt_hours

    def sample(self, t: int) -> ExogenousSample:
        return ExogenousSample(
            float(self.t_amb[t]),
            float(self.i_solar[t]),
            float(self.t_neigh[t]),
            float(self.price[t]),
            tuple(self._time[t]),
        )

    def with_requests(self, requests: Sequence[FlexibilityRequest]) -> "Scenario":
        out = replace(self, requests=list(requests))
        return out

    def slice(self, start: int, n_steps: int) -> "Scenario":
        """Sub-scenario ``[start, start + n_steps)``; only requests fully inside are kept."""
        stop = start + n_steps
        if start < 0 or stop > self.n_steps or n_steps <= 0:
            raise InputError(f"slice [{start}, {stop}) outside scenario of {self.n_steps} steps")
        reqs = [
            FlexibilityRequest(r.t_start - start, r.t_end - start, r.phi, r.announced_at - start)
            for r in self.requests
            if r.announced_at >= start and r.t_end <= stop
        ]
        grid = TimeGrid(self.grid.timestamp(start), n_steps, self.grid.step_minutes)
        return Scenario(
            grid,
            self.t_amb[start:stop],
            self.i_solar[start:stop],
            self.t_neigh[start:stop],
            self.price[start:stop],
            reqs,
            self.rng_seed,
        )


def generate_scenario(
    n_days: int,
    seed: int,
    start: datetime = datetime(2022, 1, 3),
    step_minutes: int = 15,
    t_amb_mean: float = 4.0,
    t_amb_amplitude: float = 4.0,
    solar_peak: float = 500.0,
    t_neigh: float = 23.0,
    price_low: float = 0.15,
    price_high: float = 0.30,
    price_noise: float = 0.02,
) -> Scenario:
    """Synthetic winter scenario (non-measured stand-in data)."""
    if n_days < 1:
        raise InputError("scenario needs at least one day")
    rng = np.random.default_rng(seed)
    grid = TimeGrid(start, n_days * (24 * 60 // step_minutes), step_minutes)
    hours = np.array([grid.timestamp(t).hour + grid.timestamp(t).minute / 60.0 for t in range(grid.n_steps)])
    day = np.arange(grid.n_steps) // grid.steps_per_day

    # daily mean drifts as a bounded random walk; minimum around 03:00, maximum around 15:00
    drift = np.zeros(n_days)
    for d in range(1, n_days):
        drift[d] = 0.7 * drift[d - 1] + rng.normal(0.0, 1.5)
    t_amb = t_amb_mean + drift[day] + t_amb_amplitude * np.sin(2 * math.pi * (hours - 9.0) / 24.0)

    clearness = rng.uniform(0.2, 1.0, size=n_days)
    sun = np.clip(np.sin(math.pi * (hours - 8.0) / 8.0), 0.0, None) * ((hours >= 8.0) & (hours <= 16.0))
    i_solar = solar_peak * clearness[day] * sun

    peak = (hours >= 7.0) & (hours < 21.0)
    price = np.where(peak, price_high, price_low) + rng.normal(0.0, price_noise, size=grid.n_steps)
    price = np.clip(price, 0.01, None)

    return Scenario(grid, t_amb, i_solar, np.full(grid.n_steps, t_neigh), price, [], seed)


def generate_requests(
    grid: TimeGrid,
    rng: np.random.Generator,
    phi_range: tuple = (PHI_LOW, PHI_HIGH),
    max_hours: float = MAX_WINDOW_STEPS / 4,
    announce_hour: int = 8,
    min_steps: int = 1,
    start_weights: Optional[np.ndarray] = None,
) -> list[FlexibilityRequest]:
    """One request per day, announced at ``announce_hour``.

    Windows start at or after the announcement and end no later than the next
    day's announcement, so at most one window is open at any time. Windows
    that would run past the end of the grid are dropped. ``start_weights``
    (one non-negative weight per grid step) biases where windows start.
    """
    spd = grid.steps_per_day
    if grid.n_steps < spd:
        raise InputError("request generation needs at least one full day")
    max_steps = int(round(max_hours * grid.steps_per_hour))
    announce_off = announce_hour * grid.steps_per_hour
    requests = []
    for d in range(grid.n_steps // spd):
        announce = d * spd + announce_off
        dur = int(rng.integers(min_steps, max_steps + 1))
        lo, hi = announce, announce + spd - dur
        if start_weights is None:
            t_s = int(rng.integers(lo, hi + 1))
        else:
            w = np.asarray(start_weights[lo:hi + 1], dtype=float)
            w = np.pad(w, (0, hi + 1 - lo - len(w)))
            t_s = int(lo + rng.choice(len(w), p=w / w.sum())) if w.sum() > 0 else int(rng.integers(lo, hi + 1))
        phi = float(rng.uniform(*phi_range))
        if t_s + dur > grid.n_steps:
            continue
        requests.append(FlexibilityRequest(t_s, t_s + dur, phi, announce))
    return requests
