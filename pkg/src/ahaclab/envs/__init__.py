"""Differentiable environments with separately exposed contact terms."""

from .ball import BALL_CONFIG, BALL_CONTACT, BallEnv, BallGeometry, ball_step, launch, wall_force
from .base import (
    ContactParams,
    Env,
    EnvConfig,
    SimState,
    StepOutcome,
    normalized_contact_stiffness,
    soft_heaviside,
)
from .heaviside import heaviside_env_eval, zero_gradient_mass
from .hopper import HOPPER_CONFIG, HOPPER_CONTACT, Hopper, HopperModel, hopper_reward
from .rollout import RolloutBuffer, lane_noise, lane_streams, rollout, start_batch
from .scripted import ScriptedContactEnv


def hopper_step(s, a, cfg=HOPPER_CONFIG, cp=HOPPER_CONTACT):
    return Hopper(cfg, cp).step(s, a)


def make_env(name, **kw):
    """Build an environment by id: ``hopper``, ``ball``, ``scripted`` or ``free``."""
    if name == "hopper":
        return Hopper(**kw)
    if name == "ball":
        return BallEnv(**kw)
    if name == "scripted":
        return ScriptedContactEnv(**kw)
    if name == "free":
        return ScriptedContactEnv(stiff_from=None, **kw)
    raise KeyError(f"unknown environment {name!r}")


__all__ = [
    "BALL_CONFIG",
    "BALL_CONTACT",
    "BallEnv",
    "BallGeometry",
    "ContactParams",
    "Env",
    "EnvConfig",
    "HOPPER_CONFIG",
    "HOPPER_CONTACT",
    "Hopper",
    "HopperModel",
    "RolloutBuffer",
    "ScriptedContactEnv",
    "SimState",
    "StepOutcome",
    "ball_step",
    "heaviside_env_eval",
    "hopper_reward",
    "hopper_step",
    "lane_noise",
    "lane_streams",
    "launch",
    "make_env",
    "normalized_contact_stiffness",
    "rollout",
    "soft_heaviside",
    "start_batch",
    "wall_force",
    "zero_gradient_mass",
]
