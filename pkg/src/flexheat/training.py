"""Training loops: the thermal flexibility task and a one-state toy problem."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .baseline import RuleBasedController
from .bau import project_bau
from .ddpg import DdpgAgent, DdpgConfig, TrainingError
from .domain import InputError
from .env import EPISODE_STEPS, EnvConfig, FlexHeatEnv, run_episode
from .scenario import Scenario, generate_requests
from .thermal import OBS_DIM

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    agent: DdpgAgent
    episode_rewards: list = field(default_factory=list)
    rb_rewards: list = field(default_factory=list)
    episode_steps: list = field(default_factory=list)
    aborted: bool = False
    checkpoints: list = field(default_factory=list)
    validation_rewards: list = field(default_factory=list)   # (episode, reward) pairs
    best_episode: Optional[int] = None

    @property
    def mean_step_rewards(self) -> list:
        return [r / n for r, n in zip(self.episode_rewards, self.episode_steps)]


def moving_mean(values, window: int = 50) -> np.ndarray:
    """Trailing mean over up to ``window`` previous entries (shorter at the start)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    c = np.cumsum(np.insert(v, 0, 0.0))
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def noise_schedule(cfg: DdpgConfig, episode: int, episodes: int) -> float:
    """Linear anneal from ``noise_sigma`` to ``noise_sigma_final`` across training."""
    if episodes <= 1:
        return cfg.noise_sigma
    frac = min(episode / (episodes - 1), 1.0)
    return cfg.noise_sigma + frac * (cfg.noise_sigma_final - cfg.noise_sigma)


def _snapshot(agent: DdpgAgent) -> bytes:
    buf = io.BytesIO()
    agent.save(buf)
    return buf.getvalue()


def _restore(blob: bytes) -> DdpgAgent:
    return DdpgAgent.load(io.BytesIO(blob))


def run_agent_episode(env, agent: DdpgAgent, sigma: float, learn: bool = True, reset_kwargs=None):
    """One exploration episode: act, store transitions, update every ``update_every`` steps."""
    obs = env.reset(**(reset_kwargs or {}))
    total, steps, done = 0.0, 0, False
    while not done:
        if learn and len(agent.buffer) < agent.cfg.warmup_steps:
            u = float(agent.rng.uniform())
        else:
            u = agent.act(obs, sigma)
        obs_next, r, done, info = env.step(u)
        u_applied = info["u_safe"] if isinstance(info, dict) and "u_safe" in info else u
        if learn:
            agent.remember(obs, u_applied, r, obs_next, done)
            if steps % agent.cfg.update_every == 0:
                agent.update()
        obs = obs_next
        total += r
        steps += 1
    return total, steps


def train(
    scenario: Scenario,
    ddpg_cfg: DdpgConfig = DdpgConfig(),
    env_cfg: EnvConfig = EnvConfig(),
    episodes: int = 1000,
    seed: int = 0,
    flex: bool = True,
    episode_steps: int = EPISODE_STEPS,
    bau_policy=None,
    t_room0_range: tuple = (22.5, 25.5),
    checkpoint_every: Optional[int] = None,
    out_dir: Optional[Path] = None,
    rb_reference: bool = True,
    stop_when: Optional[Callable[[TrainResult], bool]] = None,
    init_agent: Optional[DdpgAgent] = None,
    validation: Optional[Scenario] = None,
    validate_every: int = 25,
) -> TrainResult:
    """Train a DDPG heating agent on random ``episode_steps`` slices of ``scenario``.

    With ``flex=True`` every episode gets fresh random requests and the agent
    observes them; budgets come from ``bau_policy`` replayed on the slice, or
    from the agent's own deterministic policy with requests hidden when no
    policy is given. ``init_agent`` warm-starts from a copy of an existing
    agent (networks and optimizer state; the replay buffer starts empty).
    ``stop_when`` is polled after each episode. With a ``validation``
    scenario the greedy policy is scored on it every ``validate_every``
    episodes and the best-scoring snapshot is returned.
    """
    spd = scenario.grid.steps_per_day
    if scenario.n_steps < episode_steps:
        raise InputError(f"scenario of {scenario.n_steps} steps is shorter than one episode")
    n_starts = (scenario.n_steps - episode_steps) // spd + 1
    ss = np.random.SeedSequence(seed)
    agent_seed, episode_seed = ss.spawn(2)
    if init_agent is not None:
        agent = _restore(_snapshot(init_agent))
        agent.rng = np.random.default_rng(agent_seed)
    else:
        agent = DdpgAgent(OBS_DIM, ddpg_cfg, int(agent_seed.generate_state(1)[0]))
    rng = np.random.default_rng(episode_seed)
    env = FlexHeatEnv(env_cfg)
    result = TrainResult(agent)
    out_dir = Path(out_dir) if out_dir is not None else None
    last_good = _snapshot(agent)
    best = (-np.inf, None)
    val_bau = None
    if validation is not None and flex and bau_policy is not None:
        val_bau = project_bau(validation, bau_policy, env_cfg).energy

    for ep in range(episodes):
        start = int(rng.integers(0, n_starts)) * spd
        sl = scenario.slice(start, episode_steps).with_requests([])
        t0 = float(rng.uniform(*t_room0_range))
        bau = None
        if flex:
            sl = sl.with_requests(generate_requests(sl.grid, rng))
            policy = bau_policy if bau_policy is not None else agent.controller()
            bau = project_bau(sl, policy, env_cfg, t_room0=t0).energy
        sigma = noise_schedule(ddpg_cfg, ep, episodes)
        kwargs = dict(scenario=sl, bau=bau, t_room0=t0, use_filter=False, show_requests=flex)
        try:
            total, steps = run_agent_episode(env, agent, sigma, reset_kwargs=kwargs)
        except TrainingError as exc:
            log.error("training diverged in episode %d: %s; restoring last good checkpoint", ep, exc)
            result.agent = _restore(last_good)
            result.aborted = True
            break
        result.episode_rewards.append(total)
        result.episode_steps.append(steps)
        if rb_reference:
            rb = run_episode(sl, RuleBasedController(env_cfg.band), env_cfg, bau, show_requests=flex, t_room0=t0)
            result.rb_rewards.append(rb.total_reward)
        if checkpoint_every and (ep + 1) % checkpoint_every == 0:
            last_good = _snapshot(agent)
            if out_dir is not None:
                path = agent.save(out_dir / f"checkpoint_ep{ep + 1:05d}.npz")
                result.checkpoints.append(path)
        if validation is not None and (ep + 1) % validate_every == 0:
            score = validate(agent, validation, env_cfg, flex, val_bau)
            result.validation_rewards.append((ep + 1, score))
            if score > best[0]:
                best = (score, _snapshot(agent))
                result.best_episode = ep + 1
        if stop_when is not None and stop_when(result):
            break
    if best[1] is not None:
        result.agent = _restore(best[1])
    return result


def validate(agent: DdpgAgent, scenario: Scenario, env_cfg: EnvConfig = EnvConfig(),
             flex: bool = True, bau: Optional[np.ndarray] = None) -> float:
    """Total reward of the greedy policy on ``scenario`` (requests shown when ``flex``)."""
    policy = agent.controller()
    if not flex:
        scenario = scenario.with_requests([])
    elif bau is None and scenario.requests:
        bau = project_bau(scenario, policy, env_cfg).energy
    return run_episode(scenario, policy, env_cfg, bau, show_requests=flex).total_reward


class ToyQuadraticEnv:
    """One-state problem with reward ``-(u - target)^2``; every action is scored alone."""

    def __init__(self, target: float = 0.7, episode_len: int = 50, obs_dim: int = 1):
        self.target = target
        self.episode_len = episode_len
        self.obs = np.full(obs_dim, 0.5)

    def reset(self):
        self.t = 0
        return self.obs

    def step(self, u):
        self.t += 1
        r = -(u - self.target) ** 2
        return self.obs, r, self.t >= self.episode_len, {}


def train_toy(target: float = 0.7, episodes: int = 200, seed: int = 0, cfg: Optional[DdpgConfig] = None):
    cfg = cfg or DdpgConfig(gamma=0.0, warmup_steps=64, actor_lr=1e-3, critic_lr=1e-2)
    env = ToyQuadraticEnv(target)
    agent = DdpgAgent(len(env.obs), cfg, seed)
    rewards = []
    for ep in range(episodes):
        total, _ = run_agent_episode(env, agent, noise_schedule(cfg, ep, episodes))
        rewards.append(total)
    return agent, rewards


def train_case_agents(
    scenario: Scenario,
    ddpg_cfg: DdpgConfig = DdpgConfig(),
    env_cfg: EnvConfig = EnvConfig(),
    noflex_episodes: int = 800,
    flex_episodes: int = 400,
    seed: int = 0,
    validation: Optional[Scenario] = None,
    validate_every: int = 25,
) -> dict:
    """Train the no-flexibility and flexibility agents with equal budgets.

    A shared base agent is trained without requests for ``noflex_episodes``.
    Two copies then train ``flex_episodes`` more: one still without requests,
    one on random requests whose budgets come from the frozen base policy.
    With a ``validation`` scenario each stage returns its best snapshot.
    """
    kw = dict(validation=validation, validate_every=validate_every, rb_reference=False)
    base = train(scenario, ddpg_cfg, env_cfg, noflex_episodes, seed, flex=False, **kw)
    noflex = train(scenario, ddpg_cfg, env_cfg, flex_episodes, seed + 2000, flex=False,
                   init_agent=base.agent, **kw)
    flex = train(scenario, ddpg_cfg, env_cfg, flex_episodes, seed + 1000, flex=True,
                 init_agent=base.agent, bau_policy=base.agent.controller(), **{**kw, "rb_reference": True})
    return {"base": base, "noflex": noflex, "flex": flex}
