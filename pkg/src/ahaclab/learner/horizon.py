"""Lagrange multipliers on contact stiffness and the adaptive horizon."""

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import ops


def round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass
class HorizonState:
    H_cont: float = 32.0
    H_min: int = 8
    H_max: int = 64
    C: float = 500.0
    alpha_phi: float = 2e-4
    sign: int = -1
    phi: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if not self.H_min <= self.H_max:
            raise ValueError("H_min must not exceed H_max")
        self.H_cont = float(np.clip(self.H_cont, self.H_min, self.H_max))
        if self.phi is None:
            self.phi = np.zeros(self.length)

    @property
    def length(self):
        """Rollout length for the next window."""
        return int(np.clip(round_half_up(self.H_cont), self.H_min, self.H_max))


def update_multipliers_and_horizon(hs, stiffness):
    """One dual step on ``phi`` followed by the horizon step.

    ``phi_h <- max(0, phi_h - alpha (C - k_h))`` grows a multiplier while its
    step is stiffer than ``C``. The horizon then moves by
    ``sign * alpha * sum(phi)`` and ``phi`` is truncated or zero-padded at the
    tail to the new rounded length.
    """
    k = np.asarray(stiffness, dtype=np.float64)
    if k.shape != hs.phi.shape:
        raise ValueError(f"stiffness length {k.shape} != multiplier length {hs.phi.shape}")
    phi = np.maximum(0.0, hs.phi - hs.alpha_phi * (hs.C - k))
    H = float(np.clip(hs.H_cont + hs.sign * hs.alpha_phi * float(np.sum(phi)), hs.H_min, hs.H_max))
    new = replace(hs, H_cont=H, phi=phi)
    n = new.length
    new.phi = phi[:n] if n <= phi.size else np.concatenate([phi, np.zeros(n - phi.size)])
    return new


def constraint_penalty(hs, stiffness):
    """``phi^T (C - k)``; a plain number since stiffness is held constant in theta."""
    return float(np.dot(hs.phi, hs.C - np.asarray(stiffness, dtype=np.float64)))


def ahac_lagrangian(J, hs, stiffness):
    """``J + phi^T (C - k)``."""
    return ops.add(J, constraint_penalty(hs, stiffness))
