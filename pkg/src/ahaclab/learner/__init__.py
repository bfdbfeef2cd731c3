"""TD targets, critic fitting, horizon adaptation and the training loops."""

from .critic import critic_loss, train_critic_until_converged
from .horizon import HorizonState, ahac_lagrangian, constraint_penalty, update_multipliers_and_horizon
from .td import TDConfig, n_step_return, td_lambda_targets
from .trainer import (
    ALGOS,
    TrainConfig,
    Trainer,
    TrainResult,
    ahac1_rollout,
    algo_preset,
    shac_actor_objective,
    train,
    train_one,
)

__all__ = [
    "ALGOS",
    "HorizonState",
    "TDConfig",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "ahac1_rollout",
    "ahac_lagrangian",
    "algo_preset",
    "constraint_penalty",
    "critic_loss",
    "n_step_return",
    "shac_actor_objective",
    "td_lambda_targets",
    "train",
    "train_critic_until_converged",
    "train_one",
    "update_multipliers_and_horizon",
]
