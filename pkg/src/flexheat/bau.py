"""Business-as-usual energy reference used to size flexibility budgets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import FlexibilityRequest, InputError
from .env import EnvConfig, run_episode
from .scenario import Scenario


@dataclass(frozen=True)
class BauProfile:
    energy: np.ndarray
    source: str = "drl-noflex"

    def __post_init__(self):
        e = np.asarray(self.energy, dtype=float)
        if e.ndim != 1 or np.any(e < 0):
            raise InputError("BAU profile must be a 1-D series of non-negative energies")
        object.__setattr__(self, "energy", e)

    def __len__(self):
        return len(self.energy)


def project_bau(
    scenario: Scenario,
    policy,
    env_cfg: EnvConfig = EnvConfig(),
    source: str = "drl-noflex",
    t_room0: Optional[float] = None,
) -> BauProfile:
    """Replay a frozen controller over the scenario with no flexibility requests
    and record the energy it draws at every step."""
    plain = scenario.with_requests([])
    traj = run_episode(plain, policy, env_cfg, show_requests=False, t_room0=t_room0)
    if len(traj) != scenario.n_steps:
        raise InputError("BAU replay length does not match the scenario")
    return BauProfile(traj.column("energy_kwh"), source)


def window_bau(profile: BauProfile, request: FlexibilityRequest) -> float:
    """BAU energy summed over ``[t_start, t_end)``."""
    if request.t_start < 0 or request.t_end > len(profile):
        raise InputError(f"window [{request.t_start}, {request.t_end}) outside BAU profile of {len(profile)} steps")
    return float(np.sum(profile.energy[request.t_start:request.t_end]))
