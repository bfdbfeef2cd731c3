"""Policy rollouts over a window of steps, recorded on the active tape."""

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import value_of
from .base import SimState


def lane_streams(seed, lanes, salt=0):
    """One counter-based generator per lane, keyed by ``(seed, salt, lane)``."""
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, salt, i]))) for i in range(lanes)]


def lane_noise(streams, act_dim):
    return np.stack([g.standard_normal(act_dim) for g in streams], axis=0)


def start_batch(s0, N):
    """Replicate a single start state across ``N`` lanes."""
    q = np.broadcast_to(np.asarray(value_of(s0.q)), (N,) + np.shape(value_of(s0.q))[-1:]).copy()
    qdot = np.broadcast_to(np.asarray(value_of(s0.qdot)), q.shape).copy()
    return SimState(q, qdot, np.broadcast_to(np.asarray(s0.t), (N,)).copy())


@dataclass
class RolloutBuffer:
    """Per-step records of one window, lanes along axis 0 of every entry.

    ``rewards`` and ``bootstrap`` keep their tape Vars so the actor objective
    can be differentiated; everything else holds plain arrays. ``bootstrap[h]``
    is the critic value of the pre-reset next state on lanes whose episode
    ended by timeout at step ``h`` (and on every lane at the last step), 0 on
    terminated lanes and ``None`` on steps where nothing is needed.
    """

    obs: list = field(default_factory=list)
    next_obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    reward_values: list = field(default_factory=list)
    done: list = field(default_factory=list)
    terminated: list = field(default_factory=list)
    stiffness: list = field(default_factory=list)
    bootstrap: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    final_state: SimState = None
    t_start: int = 0
    truncated: bool = False

    def __len__(self):
        return len(self.rewards)

    @property
    def lanes(self):
        return np.shape(self.reward_values[0])[0] if self.reward_values else 0

    def arrays(self):
        """Stacked plain arrays, shape ``(H, B, ...)``."""
        out = {
            "obs": np.stack(self.obs),
            "next_obs": np.stack(self.next_obs),
            "actions": np.stack(self.actions),
            "rewards": np.stack(self.reward_values),
            "done": np.stack(self.done),
            "terminated": np.stack(self.terminated),
        }
        if self.stiffness:
            out["stiffness"] = np.stack(self.stiffness)
        return out


def _select(mask, reset, value):
    m = np.asarray(mask)[..., None]
    return ops.where(m, reset, value)


def rollout(
    env,
    params,
    s0,
    H,
    noise_fn,
    value_fn=None,
    stiffness=False,
    stop_threshold=None,
    reset_fn=None,
    log_prob=False,
    detach_obs=False,
):
    """Roll ``params`` (policy arrays or Vars) forward ``H`` steps from ``s0``.

    ``noise_fn(h)`` returns the ``(B, act_dim)`` standard-normal draw for step
    ``h``. ``value_fn(obs)`` is the bootstrap critic. Lanes whose episode ends
    are reset in place with ``reset_fn(mask)`` (default: ``env.reset``), and
    their boundary is recorded so returns and bootstraps do not cross it.
    With ``stop_threshold`` set, the window ends right after the first step
    whose stiffness exceeds it; the closing bootstrap then sees a detached
    state so the stiff step's Jacobian never reaches the critic path.
    """
    from ..nn import policy_sample

    if H < 1:
        raise ValueError("H must be >= 1")
    env.begin_window()
    buf = RolloutBuffer(t_start=int(np.min(np.asarray(s0.t))))
    s = s0
    B = np.shape(value_of(s0.q))[0]
    if reset_fn is None:
        start = env.reset(None, B)

        def reset_fn(mask):
            return start

    for h in range(H):
        obs = env.observe(s)
        pol_obs = ops.stop_gradient(obs) if detach_obs else obs
        a, lp = policy_sample(params, pol_obs, noise_fn(h))
        out = env.step(s, a)
        nxt = out.next
        next_obs = env.observe(nxt)
        terminated = np.asarray(out.terminated, dtype=bool) if out.terminated is not None else np.zeros(B, bool)
        done = np.asarray(out.done, dtype=bool) | terminated
        if stiffness or stop_threshold is not None:
            k = out.contact_stiffness
            if k is None:
                k = env.contact_stiffness(s.values(), a, out.qddot)
            buf.stiffness.append(np.asarray(k, dtype=np.float64))
        stop = stop_threshold is not None and bool(np.any(buf.stiffness[-1] > stop_threshold))
        last = stop or h == H - 1
        boot = None
        if value_fn is not None and (last or np.any(done)):
            v_obs = ops.stop_gradient(next_obs) if stop else next_obs
            v = value_fn(v_obs)
            need = done if not last else np.ones(B, bool)
            boot = ops.where(terminated, 0.0, ops.where(need, v, 0.0))
        buf.obs.append(np.array(value_of(obs)))
        buf.next_obs.append(np.array(value_of(next_obs)))
        buf.actions.append(np.array(value_of(a)))
        buf.rewards.append(out.reward)
        buf.reward_values.append(np.array(value_of(out.reward), dtype=np.float64))
        buf.done.append(done)
        buf.terminated.append(terminated)
        buf.bootstrap.append(boot)
        if log_prob:
            buf.log_probs.append(lp)
        if np.any(done):
            r = reset_fn(done)
            nxt = SimState(
                _select(done, r.q, nxt.q),
                _select(done, r.qdot, nxt.qdot),
                np.where(done, np.asarray(r.t), np.asarray(nxt.t)),
            )
        s = nxt
        if stop:
            buf.truncated = True
            break
    buf.final_state = s
    return buf
