"""Episode-level environment tying together dynamics, reward, requests and the
optional safety filter, plus the episode runner used by every case.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .domain import ComfortBand, ConfigError, FlexibilityRequest, flexibility_budget
from .safety import FilterConfig, SafetyFilter
from .scenario import Scenario
from .thermal import (
    EnvState,
    ObsSpecs,
    Residual,
    RewardConfig,
    ThermalParams,
    cost_of_step,
    energy_of_action,
    observe,
    reward,
    step_thermal,
)

EPISODE_STEPS = 288

TRAJECTORY_COLUMNS = (
    "t", "timestamp", "t_room", "t_room_next", "t_amb", "i_solar", "price",
    "u_proposed", "u_safe", "u1", "tau", "u_min", "u_max",
    "energy_kwh", "cost_chf", "reward", "in_window", "window_id", "phi",
)


@dataclass(frozen=True)
class EnvConfig:
    params: ThermalParams = ThermalParams()
    band: ComfortBand = ComfortBand()
    reward: RewardConfig = RewardConfig()
    specs: ObsSpecs = ObsSpecs()
    filter: FilterConfig = FilterConfig()
    t_room0: float = 24.0


@dataclass
class WindowOutcome:
    window_id: int
    t_start: int
    t_end: int
    phi: float
    e_bau: float
    budget: float
    step_energy: float
    energy: float = 0.0

    @property
    def feasible(self) -> bool:
        """An increase budget is only reachable if it fits under full power."""
        return self.phi <= 1.0 or self.budget <= (self.t_end - self.t_start) * self.step_energy + 1e-12

    @property
    def compliant(self) -> bool:
        tol = 1e-9
        if self.phi <= 1.0:
            return self.energy <= self.budget + tol
        return self.energy >= self.budget - tol


@dataclass
class Trajectory:
    case: str
    records: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    dt: float = 0.25

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records])

    @property
    def total_reward(self) -> float:
        return float(sum(r["reward"] for r in self.records))

    def __len__(self):
        return len(self.records)


class FlexHeatEnv:
    """Gym-style environment over a :class:`Scenario`.

    ``reset`` takes the scenario (with its requests) and an optional BAU energy
    profile used to size window budgets. With ``show_requests=False`` the
    agent observes no flexibility information and no flexibility penalty is
    applied, which is how the no-flexibility controller is trained and run;
    windows are still tracked so compliance can be reported.
    """

    def __init__(self, cfg: EnvConfig = EnvConfig(), residual: Optional[Residual] = None):
        self.cfg = cfg
        self.residual = residual

    def reset(
        self,
        scenario: Scenario,
        bau: Optional[np.ndarray] = None,
        t_room0: Optional[float] = None,
        use_filter: bool = False,
        show_requests: bool = True,
    ) -> np.ndarray:
        self.scenario = scenario
        self.dt = scenario.dt
        bau = getattr(bau, "energy", bau)
        requests = sorted(scenario.requests, key=lambda r: r.t_start)
        if requests and bau is None:
            if show_requests:
                raise ConfigError("a BAU profile is required to size flexibility budgets")
            requests = []
        if bau is not None and len(bau) != scenario.n_steps:
            raise ConfigError(f"BAU profile has {len(bau)} steps, scenario {scenario.n_steps}")
        self.requests = requests
        self.show_requests = show_requests
        self.bau = bau
        self.use_filter = use_filter
        self.filter = SafetyFilter(self.cfg.filter, self.cfg.params, self.dt)
        self.state = EnvState(0, self.cfg.t_room0 if t_room0 is None else float(t_room0))
        self.windows = []
        self._req_idx = 0
        self._current: Optional[FlexibilityRequest] = None
        self._refresh_request()
        self._obs = self._observe()
        return self._obs

    # the request whose announcement has passed and whose window has not closed
    def _refresh_request(self):
        t = self.state.t
        cur = self._current
        if cur is not None and t >= cur.t_end:
            self._current = None
            self.state.e_bau_window = 0.0
            self.state.e_window = 0.0
        if self._current is None:
            while self._req_idx < len(self.requests) and self.requests[self._req_idx].t_end <= t:
                self._req_idx += 1
            if self._req_idx < len(self.requests) and self.requests[self._req_idx].announced_at <= t:
                req = self.requests[self._req_idx]
                self._req_idx += 1
                self._current = req
                e_bau = float(np.sum(self.bau[req.t_start:req.t_end]))
                self.state.e_bau_window = e_bau
                self.state.e_window = 0.0
                self.windows.append(WindowOutcome(
                    len(self.windows), req.t_start, req.t_end, req.phi, e_bau,
                    flexibility_budget(req, e_bau),
                    self.cfg.params.p_rated * self.dt,
                ))
        cur = self._current
        if cur is not None and t == cur.t_start:
            self.state.e_window = 0.0
            if self.use_filter:
                self.filter.open(cur, self.windows[-1].budget)

    def _observe(self) -> np.ndarray:
        t = self.state.t
        ex = self.scenario.sample(min(t, self.scenario.n_steps - 1))
        req = self._current if self.show_requests else None
        return observe(self.state, ex, req, self.cfg.specs, self.cfg.params.c_heat)

    @property
    def done(self) -> bool:
        return self.state.t >= self.scenario.n_steps

    def step(self, u_proposed: float):
        if self.done:
            raise RuntimeError("episode already finished")
        cfg, p, st = self.cfg, self.cfg.params, self.state
        t = st.t
        ex = self.scenario.sample(t)
        req = self._current
        in_window = req is not None and req.contains(t)
        u_proposed = min(max(float(u_proposed), 0.0), 1.0)

        decision = None
        if in_window and self.use_filter:
            decision = self.filter.decide(u_proposed, st.t_room, ex.price)
            u = decision.u_safe
        else:
            u = u_proposed

        energy = energy_of_action(u, p, self.dt)
        cost = cost_of_step(energy, ex.price)
        t_room = st.t_room
        t_next = step_thermal(st, u, ex, p, self.dt, self.residual)

        st.t = t + 1
        st.t_room = t_next
        st.last_action = u
        st.cumulative_energy += energy
        st.cumulative_cost += cost
        if in_window:
            st.e_window += energy
            self.windows[-1].energy += energy
            if self.use_filter:
                self.filter.advance(u)
        flex_window = req if in_window and self.show_requests else None
        r = reward(st, u, ex, cfg.band, cfg.reward, flex_window, cfg.specs.price)
        if in_window and st.t >= req.t_end:
            self.filter.close()

        record = {
            "t": t,
            "timestamp": self.scenario.grid.timestamp(t).isoformat(),
            "t_room": t_room,
            "t_room_next": t_next,
            "t_amb": ex.t_amb,
            "i_solar": ex.i_solar,
            "price": ex.price,
            "u_proposed": u_proposed,
            "u_safe": u,
            "u1": decision.u1 if decision else float("nan"),
            "tau": decision.tau if decision else float("nan"),
            "u_min": decision.u_min if decision else float("nan"),
            "u_max": decision.u_max if decision else float("nan"),
            "energy_kwh": energy,
            "cost_chf": cost,
            "reward": r,
            "in_window": int(in_window),
            "window_id": self.windows[-1].window_id if in_window else -1,
            "phi": req.phi if in_window else float("nan"),
        }
        self._refresh_request()
        if not self.done:
            self._obs = self._observe()
        return self._obs, r, self.done, record


def run_episode(
    scenario: Scenario,
    controller,
    env_cfg: EnvConfig = EnvConfig(),
    bau: Optional[np.ndarray] = None,
    use_filter: bool = False,
    show_requests: bool = True,
    t_room0: Optional[float] = None,
    case: str = "",
    residual: Optional[Residual] = None,
) -> Trajectory:
    """Roll ``controller`` over the whole scenario and return the per-step log.

    ``controller(obs, env_state) -> u`` proposes a valve opening; when the
    filter is enabled its decision replaces the proposal inside windows.
    """
    env = FlexHeatEnv(env_cfg, residual)
    obs = env.reset(scenario, bau, t_room0, use_filter, show_requests)
    if hasattr(controller, "reset"):
        controller.reset()
    traj = Trajectory(case or getattr(controller, "name", ""), dt=scenario.dt)
    done = False
    while not done:
        u = controller(obs, env.state)
        obs, _, done, rec = env.step(u)
        traj.records.append(rec)
    traj.windows = env.windows
    return traj
