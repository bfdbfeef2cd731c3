"""Jacobians, Jacobian norms and the finite-difference oracle."""

import numpy as np

from ..errors import ArityError
from .tape import record, backward


def finite_diff_grad(fn, point, eps=1e-5):
    """Central-difference gradient of a scalar function."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(point, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(fn(x))
        flat[i] = orig - eps
        lo = float(fn(x))
        flat[i] = orig
        g[i] = (hi - lo) / (2.0 * eps)
    return grad


def jacobian(fn, x):
    """Jacobian of a batch-polymorphic map ``(..., n_in) -> (..., n_out)``.

    All output rows come from a single backward sweep: the input is
    replicated once per output row along a new leading axis and each replica
    is seeded with its own unit row, so rows never mix.
    Returns an array of shape ``(..., n_out, n_in)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n_out = np.shape(fn(x))[-1]
    reps = np.broadcast_to(x, (n_out,) + x.shape).copy()
    out, tape = record(fn, reps)
    seed = np.zeros(out.shape)
    rows = np.arange(n_out)
    seed[rows, ..., rows] = 1.0
    g = backward(tape, seed)
    return np.moveaxis(g, 0, -2)


def spectral_norm(J, iters=50, seed=0):
    """Operator 2-norm per batch entry, estimated by power iteration on J^T J."""
    J = np.asarray(J, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(J.shape[:-2] + (J.shape[-1],))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    sigma = np.zeros(J.shape[:-2])
    for _ in range(iters):
        w = np.matmul(J, v[..., None])[..., 0]
        u = np.matmul(np.swapaxes(J, -1, -2), w[..., None])[..., 0]
        n = np.linalg.norm(u, axis=-1, keepdims=True)
        safe = np.where(n > 0, n, 1.0)
        v = np.where(n > 0, u / safe, v)
        sigma = np.linalg.norm(np.matmul(J, v[..., None])[..., 0], axis=-1)
    return sigma


def matrix_norm(J, kind="fro"):
    if kind == "fro":
        return np.sqrt(np.sum(np.square(J), axis=(-2, -1)))
    if kind in ("2", "spectral", 2):
        return spectral_norm(J)
    raise ArityError(f"unknown norm kind {kind!r}")


def contact_jacobian(contact_fn, state, action):
    """Jacobian of ``contact_fn(state, action)`` w.r.t. the concatenation
    ``(state, action)``; shape ``(..., n_out, n_state + n_action)``."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    ns = state.shape[-1]
    z = np.concatenate([state, np.broadcast_to(action, state.shape[:-1] + action.shape[-1:])], axis=-1)
    return jacobian(lambda zz: contact_fn(zz[..., :ns], zz[..., ns:]), z)


def contact_jacobian_norm(contact_fn, state, action, kind="fro"):
    """Norm of the Jacobian of the isolated contact contribution to the next
    state. Lanes with no active contact force return exactly 0."""
    state = np.asarray(state, dtype=np.float64)
    delta = np.asarray(contact_fn(state, np.asarray(action, dtype=np.float64)))
    active = np.any(delta != 0.0, axis=-1)
    if not np.any(active):
        return np.zeros(state.shape[:-1]) if state.ndim > 1 else 0.0
    J = contact_jacobian(contact_fn, state, action)
    res = np.where(active, matrix_norm(J, kind), 0.0)
    return res if state.ndim > 1 else float(res)
