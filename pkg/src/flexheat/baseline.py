"""Hysteresis (bang-bang) heating controller used as the comparison baseline."""
from __future__ import annotations

from dataclasses import dataclass

from .domain import ComfortBand


@dataclass
class RbState:
    last_action: int = 0


def rb_action(t_room: float, band: ComfortBand, state: RbState) -> int:
    """Open the valve below the band, close it above, otherwise hold."""
    if t_room < band.t_min:
        state.last_action = 1
    elif t_room > band.t_max:
        state.last_action = 0
    return state.last_action


class RuleBasedController:
    """Stateful wrapper so the baseline plugs into the episode runner.

    It only looks at room temperature; prices and flexibility requests are
    ignored by construction.
    """

    name = "rb"

    def __init__(self, band: ComfortBand = ComfortBand()):
        self.band = band
        self.state = RbState()

    def reset(self):
        self.state = RbState()

    def __call__(self, obs, env_state) -> float:
        return float(rb_action(env_state.t_room, self.band, self.state))
