from .agent import (
    DdpgAgent,
    DdpgConfig,
    PolicyController,
    TrainingError,
    act,
    actor_gradients,
    actor_update,
    critic_target,
    critic_update,
    policy,
    q_values,
    soft_update,
)
from .mlp import MlpParams, init_mlp, mlp_forward, mlp_gradient
from .optim import Adam
from .replay import Batch, ReplayBuffer
