"""One-step soft-Heaviside problem: ``a = theta + sigma * w``, reward ``H(a)``."""

import numpy as np

from ..autodiff import backward, ops, record
from .base import soft_heaviside


def heaviside_env_eval(theta, noise, nu, sigma):
    """Return ``(value, per_sample_fobg)`` for scalar or array noise.

    ``per_sample_fobg`` is d/dtheta of ``H(theta + sigma * noise)`` taken
    through the tape, so it is exactly 0 or ``2/nu``.
    """
    if nu <= 0 or sigma <= 0:
        raise ValueError("nu and sigma must be positive")
    noise = np.asarray(noise, dtype=np.float64)
    theta_rep = np.broadcast_to(np.asarray(theta, dtype=np.float64), noise.shape)
    value, tape = record(lambda th: soft_heaviside(ops.add(th, sigma * noise), nu), theta_rep)
    grad = backward(tape, np.ones_like(value))
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


def zero_gradient_mass(nu, sigma):
    """Probability that ``|w| > nu/2`` for ``w ~ N(0, sigma^2)``."""
    from scipy.special import erf

    return 1.0 - erf(nu / (2.0 * np.sqrt(2.0) * sigma))
