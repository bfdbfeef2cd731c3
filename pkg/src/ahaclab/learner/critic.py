"""Critic regression against detached TD(lambda) targets."""

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import Tape, value_of
from ..nn import AdamState, critic_head_values, split_heads


def critic_loss(critic, obs, targets, arrays=None):
    """Batch mean of ``sum_heads (V_head(s) - target)^2``."""
    if arrays is None:
        arrays = critic.arrays()
    targets = np.asarray(value_of(targets), dtype=np.float64)
    total = 0.0
    for v in critic_head_values(split_heads(critic, arrays), obs):
        total = ops.add(total, ops.square(ops.sub(v, targets)))
    return ops.mean(total)


def critic_step(critic, opt, obs, targets, max_norm=None):
    from ..nn import clip_grad_norm

    tape = Tape()
    params = [tape.variable(a) for a in critic.arrays()]
    loss = critic_loss(critic, obs, targets, params)
    grads = tape.gradient(loss, params)
    if max_norm is not None:
        grads = clip_grad_norm(grads, max_norm)
    critic.set_arrays(opt.step(critic.arrays(), grads))
    return float(value_of(loss))


def train_critic_until_converged(
    critic,
    obs,
    targets,
    opt,
    rng,
    batches=8,
    tol=0.2,
    window=5,
    max_iters=64,
    fixed_iters=None,
    max_norm=None,
):
    """Mini-batch epochs until the loss settles.

    One iteration is a shuffled pass over the data in ``batches`` mini-batches.
    Training stops once the mean absolute change of the iteration loss over the
    last ``window`` iterations is below ``tol`` (or at ``max_iters``). With
    ``fixed_iters`` exactly that many iterations run. Returns
    ``(iterations, losses)``.
    """
    obs = np.asarray(obs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = obs.shape[0]
    if n == 0:
        raise ValueError("empty critic dataset")
    losses = []
    limit = fixed_iters if fixed_iters is not None else max_iters
    for _ in range(limit):
        order = rng.permutation(n)
        parts = [p for p in np.array_split(order, min(batches, n)) if p.size]
        losses.append(float(np.mean([critic_step(critic, opt, obs[p], targets[p], max_norm) for p in parts])))
        if fixed_iters is None and len(losses) > window:
            change = np.mean(np.abs(np.diff(losses[-window - 1 :])))
            if change < tol:
                break
    return len(losses), losses


def make_critic_optimizer(lr):
    return AdamState(lr=lr)
