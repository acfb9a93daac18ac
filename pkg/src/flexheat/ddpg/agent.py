"""Deterministic policy gradient actor-critic with target networks."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..domain import ConfigError
from .mlp import MlpParams, init_mlp, mlp_forward, mlp_gradient
from .optim import Adam
from .replay import Batch, ReplayBuffer

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau_soft: float = 0.005
    batch_size: int = 64
    noise_sigma: float = 0.1
    noise_sigma_final: float = 0.01
    buffer_capacity: int = 100_000
    actor_hidden: tuple = (64, 64)
    critic_hidden: tuple = (64, 64)
    use_target_networks: bool = True
    reward_scale: float = 1.0
    warmup_steps: int = 1000
    update_every: int = 1

    def __post_init__(self):
        if not 0 < self.tau_soft <= 1:
            raise ConfigError(f"tau_soft must lie in (0, 1], got {self.tau_soft}")
        if not (self.actor_lr > 0 and self.critic_lr > 0):
            raise ConfigError("learning rates must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.batch_size <= 0 or self.buffer_capacity < self.batch_size:
            raise ConfigError("need 0 < batch_size <= buffer_capacity")
        if self.update_every < 1:
            raise ConfigError("update_every must be >= 1")
        object.__setattr__(self, "actor_hidden", tuple(self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(self.critic_hidden))

    @classmethod
    def from_dict(cls, d: dict) -> "DdpgConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ddpg keys: {sorted(unknown)}")
        return cls(**d)


def q_values(critic: MlpParams, s: np.ndarray, u: np.ndarray) -> np.ndarray:
    x = np.concatenate([s, u.reshape(-1, 1)], axis=1)
    return mlp_forward(critic, x)[0][:, 0]


def policy(actor: MlpParams, s: np.ndarray) -> np.ndarray:
    return mlp_forward(actor, s)[0][:, 0]


def critic_target(batch: Batch, target_actor: MlpParams, target_critic: MlpParams, gamma: float) -> np.ndarray:
    """Bootstrapped regression target ``r + gamma * Q'(s', mu'(s'))``, masked on terminal steps."""
    u_next = policy(target_actor, batch.s_next)
    q_next = q_values(target_critic, batch.s_next, u_next)
    return batch.r + gamma * (1.0 - batch.terminal) * q_next


def critic_update(batch: Batch, critic: MlpParams, y: np.ndarray, optimizer: Adam) -> float:
    """One optimizer step on the mean squared Bellman error; returns the pre-step loss."""
    if len(y) != len(batch):
        raise ConfigError("target count does not match batch size")
    x = np.concatenate([batch.s, batch.u.reshape(-1, 1)], axis=1)
    q, cache = mlp_forward(critic, x)
    resid = y - q[:, 0]
    loss = float(np.mean(resid ** 2))
    if not np.isfinite(loss):
        raise TrainingError(f"critic loss is not finite ({loss})")
    upstream = (-2.0 / len(y) * resid).reshape(-1, 1)
    grads, _ = mlp_gradient(critic, cache, upstream)
    optimizer.step(critic.arrays(), grads)
    return loss


def actor_gradients(s: np.ndarray, actor: MlpParams, critic: MlpParams):
    """Gradients of ``-mean Q(s, mu(s))`` w.r.t. the actor parameters (critic held fixed)."""
    u, a_cache = mlp_forward(actor, s)
    x = np.concatenate([s, u], axis=1)
    _, c_cache = mlp_forward(critic, x)
    upstream = np.full((len(s), 1), -1.0 / len(s))
    _, dx = mlp_gradient(critic, c_cache, upstream)
    du = dx[:, -1:]
    grads, _ = mlp_gradient(actor, a_cache, du)
    return grads


def actor_update(batch: Batch, actor: MlpParams, critic: MlpParams, optimizer: Adam) -> None:
    """Ascend the deterministic policy gradient ``E[dQ/du * dmu/dtheta]``."""
    grads = actor_gradients(batch.s, actor, critic)
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError("actor gradient is not finite")
    optimizer.step(actor.arrays(), grads)


def soft_update(target: MlpParams, online: MlpParams, rho: float) -> MlpParams:
    """Polyak averaging ``target <- rho*online + (1-rho)*target`` in place."""
    t_arrays, o_arrays = target.arrays(), online.arrays()
    if [a.shape for a in t_arrays] != [a.shape for a in o_arrays]:
        raise ConfigError("target and online networks have different shapes")
    for t, o in zip(t_arrays, o_arrays):
        t *= 1.0 - rho
        t += rho * o
    return target


def act(actor: MlpParams, obs: np.ndarray, noise_sigma: float, rng: np.random.Generator) -> float:
    """Policy action plus Gaussian exploration noise, clipped to [0, 1]."""
    u = float(mlp_forward(actor, obs)[0][0, 0])
    if noise_sigma > 0:
        u += noise_sigma * rng.standard_normal()
    return min(max(u, 0.0), 1.0)


class DdpgAgent:
    def __init__(self, obs_dim: int, cfg: DdpgConfig = DdpgConfig(), seed: int = 0):
        self.obs_dim = obs_dim
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.actor = init_mlp([obs_dim, *cfg.actor_hidden, 1], self.rng, "sigmoid", final_scale=1e-3)
        self.critic = init_mlp([obs_dim + 1, *cfg.critic_hidden, 1], self.rng, "identity")
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.arrays(), cfg.actor_lr)
        self.critic_opt = Adam(self.critic.arrays(), cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim)
        self.updates = 0

    def act(self, obs: np.ndarray, noise_sigma: float = 0.0) -> float:
        return act(self.actor, obs, noise_sigma, self.rng)

    def remember(self, s, u, r, s_next, terminal=False):
        self.buffer.push(s, u, r * self.cfg.reward_scale, s_next, terminal)

    def update(self):
        """One critic and one actor step on a fresh minibatch; ``None`` until the buffer is warm."""
        if len(self.buffer) < max(self.cfg.warmup_steps, self.cfg.batch_size):
            return None
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        if self.cfg.use_target_networks:
            y = critic_target(batch, self.target_actor, self.target_critic, self.cfg.gamma)
        else:
            y = critic_target(batch, self.actor, self.critic, self.cfg.gamma)
        loss = critic_update(batch, self.critic, y, self.critic_opt)
        actor_update(batch, self.actor, self.critic, self.actor_opt)
        if self.cfg.use_target_networks:
            soft_update(self.target_actor, self.actor, self.cfg.tau_soft)
            soft_update(self.target_critic, self.critic, self.cfg.tau_soft)
        self.updates += 1
        return loss

    def controller(self) -> "PolicyController":
        return PolicyController(self.actor.copy())

    # -- checkpoints -------------------------------------------------------

    def _networks(self):
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def save(self, path):
        """Write an ``.npz`` checkpoint to a path or binary file object."""
        arrays = {}
        for name, net in self._networks().items():
            for i, a in enumerate(net.arrays()):
                arrays[f"{name}/{i}"] = a
        for name, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt)):
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                arrays[f"{name}/m{i}"] = m
                arrays[f"{name}/v{i}"] = v
        meta = {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "seed": self.seed,
            "config": asdict(self.cfg),
            "layer_sizes": {k: n.layer_sizes for k, n in self._networks().items()},
            "opt_steps": {"actor_opt": self.actor_opt.t, "critic_opt": self.critic_opt.t},
            "updates": self.updates,
            "rng_state": self.rng.bit_generator.state,
        }
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
        if hasattr(path, "write"):
            np.savez(path, **arrays)
            return path
        path = Path(path)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path

    @classmethod
    def load(cls, path) -> "DdpgAgent":
        src = path if hasattr(path, "read") else Path(path)
        with np.load(src, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ConfigError(f"unsupported checkpoint version {meta.get('version')}")
            cfg = DdpgConfig.from_dict(meta["config"])
            agent = cls(meta["obs_dim"], cfg, meta["seed"])
            for name, net in agent._networks().items():
                if net.layer_sizes != meta["layer_sizes"][name]:
                    raise ConfigError(f"{name}: checkpoint layer sizes {meta['layer_sizes'][name]} do not match config")
                for i, a in enumerate(net.arrays()):
                    a[...] = data[f"{name}/{i}"]
            for name, opt in (("actor_opt", agent.actor_opt), ("critic_opt", agent.critic_opt)):
                for i in range(len(opt.m)):
                    opt.m[i][...] = data[f"{name}/m{i}"]
                    opt.v[i][...] = data[f"{name}/v{i}"]
                opt.t = meta["opt_steps"][name]
        agent.updates = meta["updates"]
        agent.rng.bit_generator.state = meta["rng_state"]
        return agent


class PolicyController:
    """Frozen deterministic policy, usable as an episode controller."""

    name = "drl"

    def __init__(self, actor: MlpParams):
        self.actor = actor

    def reset(self):
        pass

    def __call__(self, obs, env_state=None) -> float:
        u = float(mlp_forward(self.actor, obs)[0][0, 0])
        return min(max(u, 0.0), 1.0)
