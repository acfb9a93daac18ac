"""KPIs per trajectory and the four-case comparison on a shared scenario."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .baseline import RuleBasedController
from .bau import BauProfile, project_bau
from .ddpg import DdpgAgent
from .domain import ComfortBand, ConfigError
from .env import EnvConfig, Trajectory, run_episode
from .scenario import Scenario


class CaseId(str, Enum):
    RB = "RB"
    DRL_NOFLEX = "DRL_NOFLEX"
    DRL_FLEX = "DRL_FLEX"
    DRL_FLEX_RASF = "DRL_FLEX_RASF"


@dataclass
class KpiReport:
    case: str
    comfort_violation: float     # Kh
    energy: float                # kWh
    cost: float                  # CHF
    flex_compliance_rate: float  # over feasible windows
    n_windows: int = 0
    n_compliant: int = 0
    n_infeasible: int = 0
    windows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def comfort_kelvin_hours(t_room: np.ndarray, band: ComfortBand, dt: float) -> float:
    """Time integral of the band violation, sampled at the end of each step."""
    t = np.asarray(t_room, dtype=float)
    v = np.maximum(t - band.t_max, 0.0) + np.maximum(band.t_min - t, 0.0)
    return float(np.sum(v) * dt)


def evaluate_kpis(traj: Trajectory, band: ComfortBand = ComfortBand()) -> KpiReport:
    windows = []
    n_ok = n_inf = 0
    for w in traj.windows:
        feasible = w.feasible
        ok = w.compliant
        if not feasible:
            n_inf += 1
        elif ok:
            n_ok += 1
        windows.append({
            "window_id": w.window_id, "t_start": w.t_start, "t_end": w.t_end, "phi": w.phi,
            "e_bau": w.e_bau, "budget": w.budget, "energy": w.energy,
            "compliant": bool(ok), "feasible": bool(feasible),
        })
    n_feasible = len(windows) - n_inf
    rate = n_ok / n_feasible if n_feasible else 1.0
    return KpiReport(
        case=traj.case,
        comfort_violation=comfort_kelvin_hours(traj.column("t_room_next"), band, traj.dt) if len(traj) else 0.0,
        energy=float(np.sum(traj.column("energy_kwh"))) if len(traj) else 0.0,
        cost=float(np.sum(traj.column("cost_chf"))) if len(traj) else 0.0,
        flex_compliance_rate=rate,
        n_windows=len(windows),
        n_compliant=n_ok,
        n_infeasible=n_inf,
        windows=windows,
    )


@dataclass
class Comparison:
    reports: dict
    trajectories: dict
    bau: BauProfile

    def summary(self) -> dict:
        return {case: rep.to_dict() for case, rep in self.reports.items()}


def _as_agent(ck) -> DdpgAgent:
    if ck is None:
        raise ConfigError("missing checkpoint")
    return ck if isinstance(ck, DdpgAgent) else DdpgAgent.load(ck)


def compare_cases(
    scenario: Scenario,
    checkpoints: Mapping[str, object],
    env_cfg: EnvConfig = EnvConfig(),
    t_room0: Optional[float] = None,
) -> Comparison:
    """Run RB and the three DRL cases on one scenario and one request list.

    ``checkpoints`` maps ``"noflex"`` and ``"flex"`` to agents or checkpoint
    paths. Window budgets for every case come from the no-flexibility policy
    replayed without requests.
    """
    for key in ("noflex", "flex"):
        if checkpoints.get(key) is None:
            raise ConfigError(f"missing '{key}' checkpoint")
    noflex = _as_agent(checkpoints["noflex"]).controller()
    flex = _as_agent(checkpoints["flex"]).controller()
    bau = project_bau(scenario, noflex, env_cfg, t_room0=t_room0)
    runs = {
        CaseId.RB: (RuleBasedController(env_cfg.band), dict(show_requests=True)),
        CaseId.DRL_NOFLEX: (noflex, dict(show_requests=False)),
        CaseId.DRL_FLEX: (flex, dict(show_requests=True)),
        CaseId.DRL_FLEX_RASF: (flex, dict(show_requests=True, use_filter=True)),
    }
    reports, trajs = {}, {}
    for case, (ctrl, kw) in runs.items():
        tr = run_episode(scenario, ctrl, env_cfg, bau.energy, t_room0=t_room0, case=case.value, **kw)
        trajs[case.value] = tr
        reports[case.value] = evaluate_kpis(tr, env_cfg.band)
    return Comparison(reports, trajs, bau)
