"""TD(lambda) critic targets over a rollout window."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TDConfig:
    gamma: float = 0.99
    lam: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")


def td_lambda_targets(rewards, next_values, done, cfg=TDConfig()):
    """Lambda-returns for every step of a ``(H, B)`` window.

    ``next_values[h]`` is the (minimum) critic value of the state reached by
    step ``h``; it must already be 0 where that step terminated the episode.
    ``done[h]`` closes the return at step ``h`` so nothing later leaks in.
    At the window end (or a boundary) the target is ``r + gamma * V``; before
    it, ``r + gamma * ((1 - lambda) V + lambda * target_next)``, which is the
    lambda-weighted mix of the n-step returns written out in full.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    done = np.asarray(done, dtype=bool)
    H = rewards.shape[0]
    g, lam = cfg.gamma, cfg.lam
    out = np.empty_like(rewards)
    nxt = None
    for t in range(H - 1, -1, -1):
        one_step = rewards[t] + g * next_values[t]
        if nxt is None:
            out[t] = one_step
        else:
            blended = rewards[t] + g * ((1.0 - lam) * next_values[t] + lam * nxt)
            out[t] = np.where(done[t], one_step, blended)
        nxt = out[t]
    return out


def n_step_return(rewards, next_values, t, h, gamma):
    """``sum_{n=t}^{t+h-1} gamma^(n-t) r_n + gamma^h V(s_{t+h})`` for one lane."""
    ret = sum(gamma ** (n - t) * rewards[n] for n in range(t, t + h))
    return ret + gamma**h * next_values[t + h - 1]
