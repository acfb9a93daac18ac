"""JSON run configuration with strict key checking and an effective-config echo."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .ddpg import DdpgConfig
from .domain import ComfortBand, ConfigError, NormSpec
from .env import EnvConfig
from .safety import FilterConfig
from .scenario import generate_requests, generate_scenario
from .thermal import RewardConfig, ThermalParams

CASES = ("RB", "DRL_NOFLEX", "DRL_FLEX", "DRL_FLEX_RASF")


@dataclass(frozen=True)
class ScenarioSettings:
    path: Optional[str] = None   # CSV file; when unset a synthetic scenario is generated
    days: int = 30
    seed: int = 7
    requests_seed: int = 7


@dataclass(frozen=True)
class TrainingSettings:
    episodes: int = 800          # shared no-flexibility base
    flex_episodes: int = 400     # further episodes on each branch
    days: int = 60
    scenario_seed: int = 100
    validation_days: int = 14    # 0 disables best-snapshot selection
    validation_seed: int = 101
    validate_every: int = 25
    checkpoint_every: int = 0

    def validation_scenario(self):
        if self.validation_days <= 0:
            return None
        sc = generate_scenario(self.validation_days, self.validation_seed)
        return sc.with_requests(generate_requests(sc.grid, np.random.default_rng(self.validation_seed)))


@dataclass(frozen=True)
class FilterSettings:
    w1: float = 0.5
    tau0: float = 0.5
    pin_steps: int = 1


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    t_room0: float = 24.0
    cases: tuple = CASES
    scenario: ScenarioSettings = ScenarioSettings()
    training: TrainingSettings = TrainingSettings()
    thermal: ThermalParams = ThermalParams()
    comfort: ComfortBand = ComfortBand()
    reward: RewardConfig = RewardConfig()
    filter: FilterSettings = FilterSettings()
    ddpg: DdpgConfig = DdpgConfig()

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        bad = [c for c in self.cases if c not in CASES]
        if bad:
            raise ConfigError(f"unknown cases {bad}; choose from {list(CASES)}")

    def env_config(self) -> EnvConfig:
        band = self.comfort
        flt = FilterConfig(
            self.filter.w1, self.filter.tau0, self.filter.pin_steps,
            t_room_spec=NormSpec(band.t_min, band.t_max),
        )
        return EnvConfig(params=self.thermal, band=band, reward=self.reward, filter=flt, t_room0=self.t_room0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cases"] = list(self.cases)
        for key in ("actor_hidden", "critic_hidden"):
            d["ddpg"][key] = list(d["ddpg"][key])
        return d


_SECTIONS = {
    "scenario": ScenarioSettings,
    "training": TrainingSettings,
    "thermal": ThermalParams,
    "comfort": ComfortBand,
    "reward": RewardConfig,
    "filter": FilterSettings,
    "ddpg": DdpgConfig,
}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    top = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: RunConfig, path) -> Path:
    """Write the fully resolved configuration (every default filled in)."""
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Replace top-level fields, ignoring ``None`` values (unset CLI flags)."""
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg
