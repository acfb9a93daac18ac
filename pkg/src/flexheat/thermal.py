"""Single-room RC thermal environment: dynamics, energy/cost accounting,
observation assembly and the shaped reward used for training.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Optional

import numpy as np

from .domain import (
    ComfortBand,
    ConfigError,
    FlexibilityRequest,
    InputError,
    NormSpec,
    normalize,
    window_features,
)

# residual(state, exogenous) -> temperature correction in K, added after the RC update
Residual = Callable[["EnvState", "ExogenousSample"], float]


@dataclass(frozen=True)
class ThermalParams:
    capacitance: float = 4.0          # kWh/K
    r_ambient: float = 80.0           # K/kW
    r_neighbor: float = 6.0           # K/kW
    solar_gain: float = 0.003         # kW per W/m^2
    p_rated: float = 2.0              # kW
    efficiency: float = 0.9
    c_heat: int = 1

    def __post_init__(self):
        for name in ("capacitance", "r_ambient", "r_neighbor", "p_rated"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.efficiency <= 1.5:
            raise ConfigError(f"efficiency must be in (0, 1.5], got {self.efficiency}")
        if self.c_heat not in (1, -1):
            raise ConfigError(f"c_heat must be +1 or -1, got {self.c_heat}")
        if self.solar_gain < 0:
            raise ConfigError("solar_gain must be non-negative")


def time_features(ts: datetime) -> tuple[float, ...]:
    """Cyclic (sin, cos) encodings of hour-of-day, weekday and day-of-year."""
    hour = ts.hour + ts.minute / 60.0
    doy = ts.timetuple().tm_yday - 1
    angles = (2 * math.pi * hour / 24.0, 2 * math.pi * ts.weekday() / 7.0, 2 * math.pi * doy / 365.0)
    out = []
    for a in angles:
        out.extend((math.sin(a), math.cos(a)))
    return tuple(out)


@dataclass(frozen=True)
class ExogenousSample:
    t_amb: float
    i_solar: float
    t_neigh: float
    price: float
    time_features: tuple = (0.0, 1.0, 0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        if self.i_solar < 0:
            raise InputError(f"solar irradiance must be non-negative, got {self.i_solar}")
        if self.price < 0:
            raise InputError(f"price must be non-negative, got {self.price}")


@dataclass
class EnvState:
    t: int
    t_room: float
    last_action: float = 0.0
    e_window: float = 0.0
    e_bau_window: float = 0.0
    cumulative_cost: float = 0.0
    cumulative_energy: float = 0.0


@dataclass(frozen=True)
class RewardConfig:
    beta: float = 20.0
    delta: float = 0.8
    alpha1: float = 1.0
    alpha2: float = 10.0
    gamma: float = 0.99
    normalized_price: bool = True

    def __post_init__(self):
        for name in ("beta", "delta", "alpha1", "alpha2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class ObsSpecs:
    """Normalization ranges for every physical observation component."""

    i_solar: NormSpec = NormSpec(0.0, 800.0)
    t_amb: NormSpec = NormSpec(-10.0, 20.0)
    t_room: NormSpec = NormSpec(22.0, 26.0)
    t_neigh: NormSpec = NormSpec(15.0, 28.0)
    steps: NormSpec = NormSpec(0.0, 96.0)
    energy: NormSpec = NormSpec(0.0, 10.0)
    price: NormSpec = NormSpec(0.0, 0.5)
    phi: NormSpec = NormSpec(0.0, 1.5)


OBS_FIELDS = (
    "i_solar", "t_amb", "t_room", "t_neigh",
    "hour_sin", "hour_cos", "weekday_sin", "weekday_cos", "season_sin", "season_cos",
    "u", "c_heat", "t_tostart", "t_toend", "e_bau", "e_used", "price", "phi",
)
OBS_DIM = len(OBS_FIELDS)


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise FloatingPointError(f"non-finite input to thermal step: {values}")


def step_thermal(
    state: EnvState,
    u: float,
    ex: ExogenousSample,
    p: ThermalParams,
    dt: float,
    residual: Optional[Residual] = None,
) -> float:
    """Explicit-Euler update of the room temperature over ``dt`` hours."""
    if not 0.0 <= u <= 1.0:
        raise InputError(f"action must lie in [0, 1], got {u}")
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    _check_finite(state.t_room, u, ex.t_amb, ex.t_neigh, ex.i_solar)
    flux = (
        (ex.t_amb - state.t_room) / p.r_ambient
        + (ex.t_neigh - state.t_room) / p.r_neighbor
        + p.solar_gain * ex.i_solar
        + p.c_heat * p.efficiency * u * p.p_rated
    )
    t_next = state.t_room + dt / p.capacitance * flux
    if residual is not None:
        t_next += residual(state, ex)
    _check_finite(t_next)
    return t_next


def energy_of_action(u: float, p: ThermalParams, dt: float) -> float:
    """Electrical energy in kWh drawn by valve opening ``u`` for ``dt`` hours."""
    return u * p.p_rated * dt


def cost_of_step(energy: float, price: float) -> float:
    return energy * price


def observe(
    state: EnvState,
    ex: ExogenousSample,
    request: Optional[FlexibilityRequest],
    specs: ObsSpecs,
    c_heat: int = 1,
) -> np.ndarray:
    """Assemble the normalized agent observation (layout in ``OBS_FIELDS``).

    Flexibility components sit at the 0.1 floor unless a request has been
    announced and its window has not yet closed.
    """
    if specs is None:
        raise ConfigError("observation needs normalization specs")
    to_start, to_end = window_features(state.t, request)
    active = request is not None and request.announced_at <= state.t < request.t_end
    e_bau = state.e_bau_window if active else 0.0
    e_used = state.e_window if active else 0.0
    phi = request.phi if active else 0.0
    obs = np.empty(OBS_DIM)
    obs[0] = normalize(ex.i_solar, specs.i_solar)
    obs[1] = normalize(ex.t_amb, specs.t_amb)
    obs[2] = normalize(state.t_room, specs.t_room)
    obs[3] = normalize(ex.t_neigh, specs.t_neigh)
    obs[4:10] = ex.time_features
    obs[10] = 0.1 + 0.8 * min(max(state.last_action, 0.0), 1.0)
    obs[11] = 0.9 if c_heat > 0 else 0.1
    obs[12] = normalize(to_start, specs.steps)
    obs[13] = normalize(to_end, specs.steps)
    obs[14] = normalize(e_bau, specs.energy)
    obs[15] = normalize(e_used, specs.energy)
    obs[16] = normalize(ex.price, specs.price)
    obs[17] = normalize(phi, specs.phi)
    return obs


def flex_penalty(state: EnvState, window: Optional[FlexibilityRequest], cfg: RewardConfig) -> float:
    """Penalty for the step that ended at ``state.t`` (post-transition state).

    The running check compares window energy with the budget pro-rated to the
    elapsed part of the window; on the closing step the full budget applies
    and the larger penalty is used.
    """
    if window is None or not window.contains(state.t - 1):
        return 0.0
    budget = window.phi * state.e_bau_window
    elapsed = (state.t - window.t_start) / window.duration
    _, to_end = window_features(state.t, window)
    eps = 1e-12
    if window.reduce:
        off = state.e_window > budget * elapsed + eps
    else:
        off = state.e_window < budget * elapsed - eps
    if not off:
        return 0.0
    return cfg.alpha2 if to_end == 0 else cfg.alpha1


def reward(
    state: EnvState,
    u: float,
    ex: ExogenousSample,
    band: ComfortBand,
    cfg: RewardConfig,
    window: Optional[FlexibilityRequest] = None,
    price_spec: NormSpec = ObsSpecs.price,
) -> float:
    """Step reward ``-beta*R_temp - delta*R_price - R_flex`` for the applied action ``u``.

    ``state`` is the state reached after applying ``u``; ``ex`` is the
    exogenous sample of the step in which ``u`` was applied.
    """
    r_temp = band.violation(state.t_room)
    price = normalize(ex.price, price_spec) if cfg.normalized_price else ex.price
    r_price = u * price
    return -cfg.beta * r_temp - cfg.delta * r_price - flex_penalty(state, window, cfg)
