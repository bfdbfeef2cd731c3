"""State containers and contact helpers shared by the environments."""

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import ops
from ..autodiff.jacobian import contact_jacobian, matrix_norm
from ..autodiff.tape import value_of


@dataclass
class SimState:
    """Generalized positions/velocities with optional leading batch axes.

    ``q`` and ``qdot`` may be arrays or tape Vars; ``t`` is the step index
    (an int, or an int array with one entry per lane).
    """

    q: object
    qdot: object
    t: object = 0

    def values(self):
        return SimState(np.array(value_of(self.q)), np.array(value_of(self.qdot)), np.array(self.t))

    def flat(self):
        """Plain ``(q, qdot)`` concatenation."""
        return np.concatenate([value_of(self.q), value_of(self.qdot)], axis=-1)


@dataclass
class ContactParams:
    k_n: float = 2000.0
    k_d: float = 10.0
    mu: float = 0.5
    nu: float = 0.1

    def __post_init__(self):
        if self.k_n < 0 or self.k_d < 0 or self.mu < 0:
            raise ValueError("contact stiffness, damping and friction must be non-negative")
        if self.nu <= 0:
            raise ValueError("nu must be positive")


@dataclass
class EnvConfig:
    dt: float = 0.05
    gravity: float = 9.81
    H_max: int = 40
    h_term: float = 0.0
    theta_term: float = 1.0
    reset_noise_scale: float = 0.0
    action_scale: float = 1.0
    term_margin: float = 0.0
    substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.H_max < 1:
            raise ValueError("H_max must be >= 1")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class StepOutcome:
    next: SimState
    reward: object
    done: np.ndarray
    contact_force: np.ndarray
    qddot: np.ndarray
    terminated: np.ndarray = None
    contact_stiffness: object = None
    info: dict = field(default_factory=dict)


def soft_heaviside(x, nu):
    """Soft Coulomb profile: +1 above nu/2, -1 below -nu/2, linear between."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    return ops.soft_heaviside(x, nu)


def normalized_contact_stiffness(J, qddot):
    """``|| diag(max(|qddot|, 1)) J ||_F`` per lane.

    ``J`` rows are either one per generalized coordinate or, for a
    ``(q, qdot)`` state Jacobian, two per coordinate; in the second case
    the scale is applied to both the position and velocity row.
    """
    J = np.asarray(J, dtype=np.float64)
    scale = np.maximum(np.abs(np.asarray(qddot, dtype=np.float64)), 1.0)
    rows = J.shape[-2]
    if rows == 2 * scale.shape[-1]:
        scale = np.concatenate([scale, scale], axis=-1)
    elif rows != scale.shape[-1]:
        raise ValueError(f"Jacobian has {rows} rows, acceleration has {scale.shape[-1]} entries")
    return matrix_norm(scale[..., :, None] * J, "fro")


class Env:
    """Batched differentiable environment interface used by the learners."""

    obs_dim: int
    act_dim: int
    nq: int
    jacobian_norm = "fro"
    scale_by = "acceleration"

    def reset(self, rng, batch):
        raise NotImplementedError

    def step(self, s, a):
        raise NotImplementedError

    def observe(self, s):
        raise NotImplementedError

    def contact_delta(self, x, a):
        """Contact contribution to the next ``(q, qdot)`` given flat state ``x``."""
        raise NotImplementedError

    def begin_window(self):
        """Hook called by learners at each rollout-window start."""

    def contact_stiffness(self, s, a, qddot):
        """Normalized contact-Jacobian norm per lane (plain values, no gradient)."""
        x = s.flat()
        a = np.asarray(value_of(a), dtype=np.float64)
        delta = np.asarray(self.contact_delta(x, a))
        active = np.any(delta != 0.0, axis=-1)
        if not np.any(active):
            return np.zeros(x.shape[:-1])
        J = contact_jacobian(self.contact_delta, x, a)
        if self.scale_by == "position":
            scale = np.asarray(value_of(s.q))
        else:
            scale = qddot
        if self.jacobian_norm == "fro":
            val = normalized_contact_stiffness(J, scale)
        else:
            sc = np.maximum(np.abs(scale), 1.0)
            sc = np.concatenate([sc, sc], axis=-1)
            val = matrix_norm(sc[..., :, None] * J, self.jacobian_norm)
        return np.where(active, val, 0.0)
