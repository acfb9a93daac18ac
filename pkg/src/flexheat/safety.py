"""Real-time adaptive safety filter.

While a flexibility window is open, the agent's proposal is clamped around
the *remaining average action*: the constant valve opening that would use
exactly the remaining energy budget over the remaining steps. The allowed
deviation (tolerance) widens for cold rooms and cheap power and shrinks to
zero as the window closes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .domain import ComfortBand, ConfigError, FlexibilityRequest, NormSpec, normalize
from .thermal import ThermalParams, energy_of_action

TOLERANCE_EXPONENT = 1.5


class ContractViolation(RuntimeError):
    """The filter was queried for a window that has no steps left."""


@dataclass(frozen=True)
class FilterConfig:
    w1: float = 0.5
    tau0: float = 0.5
    pin_steps: int = 1
    t_room_spec: NormSpec = NormSpec(ComfortBand().t_min, ComfortBand().t_max)
    price_spec: NormSpec = NormSpec(0.0, 0.5)

    def __post_init__(self):
        if not 0.0 <= self.w1 <= 1.0:
            raise ConfigError(f"w1 must lie in [0, 1], got {self.w1}")
        if self.tau0 < 0:
            raise ConfigError("tau0 must be non-negative")
        if self.pin_steps < 1:
            raise ConfigError("pin_steps must be >= 1 so the tolerance vanishes on the final step")

    def tau_base(self, progress: float, steps_remaining: Optional[int] = None) -> float:
        """Linear decay ``tau0 * (1 - progress)``, forced to 0 on the last ``pin_steps`` steps."""
        if steps_remaining is not None and steps_remaining <= self.pin_steps:
            return 0.0
        return self.tau0 * max(0.0, 1.0 - progress)


@dataclass(frozen=True)
class WindowLedger:
    budget: float
    consumed: float
    steps_remaining: int
    phi: float
    steps_total: int = 0

    def __post_init__(self):
        if self.budget < 0 or self.consumed < 0 or self.steps_remaining < 0:
            raise ValueError(f"invalid ledger {self}")

    @property
    def remaining(self) -> float:
        return self.budget - self.consumed

    @property
    def progress(self) -> float:
        if self.steps_total <= 0:
            return 0.0
        return 1.0 - self.steps_remaining / self.steps_total

    @classmethod
    def open(cls, request: FlexibilityRequest, budget: float) -> "WindowLedger":
        return cls(budget, 0.0, request.duration, request.phi, request.duration)


def _require_open(ledger: WindowLedger):
    if ledger.steps_remaining < 1:
        raise ContractViolation("safety filter queried after the window closed")


def remaining_average_action(ledger: WindowLedger, p: ThermalParams, dt: float) -> float:
    _require_open(ledger)
    u1 = ledger.remaining / (ledger.steps_remaining * p.p_rated * dt)
    return min(max(u1, 0.0), 1.0)


def tolerance(t_room_norm: float, price_norm: float, progress: float, cfg: FilterConfig,
              steps_remaining: Optional[int] = None) -> float:
    weight = cfg.w1 * (1.0 - t_room_norm) + (1.0 - cfg.w1) * (1.0 - price_norm)
    return cfg.tau_base(progress, steps_remaining) * max(weight, 0.0) ** TOLERANCE_EXPONENT


def action_bounds(u1: float, tau: float) -> tuple[float, float]:
    """``(u_min, u_max)`` around the remaining average action."""
    return max(u1 * (1.0 - tau), 0.0), min(u1 * (1.0 + tau), 1.0)


def filter_action(
    u_proposed: float,
    ledger: Optional[WindowLedger],
    bounds: tuple[float, float],
    p: ThermalParams,
    dt: float,
) -> float:
    """Clamp a proposal so the window budget is met.

    Reduction windows (phi <= 1) take ``min(u, u_max)`` and are additionally
    capped by the energy still left in the budget. Increase windows take
    ``max(u, u_min)`` and are floored by whatever cannot be caught up on the
    remaining steps. Without a ledger the proposal passes through.
    """
    if ledger is None:
        return u_proposed
    _require_open(ledger)
    u_min, u_max = bounds
    step_energy = p.p_rated * dt
    if ledger.phi <= 1.0:
        u = min(u_proposed, u_max)
        cap = max(ledger.remaining, 0.0) / step_energy
        u = min(u, cap)
    else:
        u = max(u_proposed, u_min)
        floor = (ledger.remaining - (ledger.steps_remaining - 1) * step_energy) / step_energy
        u = max(u, floor)
    return min(max(u, 0.0), 1.0)


def ledger_advance(ledger: WindowLedger, u_safe: float, p: ThermalParams, dt: float) -> WindowLedger:
    _require_open(ledger)
    return replace(
        ledger,
        consumed=ledger.consumed + energy_of_action(u_safe, p, dt),
        steps_remaining=ledger.steps_remaining - 1,
    )


@dataclass
class FilterDecision:
    u_proposed: float
    u_safe: float
    u1: float = float("nan")
    tau: float = float("nan")
    u_min: float = float("nan")
    u_max: float = float("nan")


class SafetyFilter:
    """Stateful wrapper running the filter over one window at a time."""

    def __init__(self, cfg: FilterConfig, params: ThermalParams, dt: float):
        self.cfg = cfg
        self.params = params
        self.dt = dt
        self.ledger: Optional[WindowLedger] = None

    def open(self, request: FlexibilityRequest, budget: float):
        self.ledger = WindowLedger.open(request, budget)

    def close(self):
        self.ledger = None

    @property
    def active(self) -> bool:
        return self.ledger is not None and self.ledger.steps_remaining > 0

    def decide(self, u_proposed: float, t_room: float, price: float) -> FilterDecision:
        if not self.active:
            return FilterDecision(u_proposed, u_proposed)
        led = self.ledger
        u1 = remaining_average_action(led, self.params, self.dt)
        tau = tolerance(
            normalize(t_room, self.cfg.t_room_spec),
            normalize(price, self.cfg.price_spec),
            led.progress,
            self.cfg,
            led.steps_remaining,
        )
        u_min, u_max = action_bounds(u1, tau)
        u_safe = filter_action(u_proposed, led, (u_min, u_max), self.params, self.dt)
        return FilterDecision(u_proposed, u_safe, u1, tau, u_min, u_max)

    def advance(self, u_safe: float):
        if self.active:
            self.ledger = ledger_advance(self.ledger, u_safe, self.params, self.dt)
