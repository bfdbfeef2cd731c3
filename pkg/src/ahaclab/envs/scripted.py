"""A 1-D point mass whose contact stiffness is scripted by window offset.

The dynamics are smooth (a damped mass pushed towards a goal), and the
stiffness reported for a step depends only on how many steps into the
current rollout window it is. That isolates the horizon machinery from any
real contact model. ``stiff_from`` is the 1-based step at which stiffness
switches on; ``None`` gives a contact-free environment.
"""

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import value_of
from .base import Env, EnvConfig, SimState, StepOutcome

SCRIPTED_CONFIG = EnvConfig(dt=0.05, gravity=0.0, H_max=200)


class ScriptedContactEnv(Env):
    nq = 1
    obs_dim = 2
    act_dim = 1

    def __init__(self, stiff_from=10, stiffness=1e4, cfg=SCRIPTED_CONFIG, goal=1.0, damping=0.5):
        if stiff_from is not None and stiff_from < 1:
            raise ValueError("stiff_from counts steps from 1")
        self.stiff_from = stiff_from
        self.stiffness = float(stiffness)
        self.cfg = cfg
        self.goal = goal
        self.damping = damping
        self.offset = 0

    def begin_window(self):
        self.offset = 0

    def reset(self, rng=None, batch=None):
        shape = (() if batch is None else (batch,)) + (1,)
        t = 0 if batch is None else np.zeros(batch, dtype=np.int64)
        return SimState(np.zeros(shape), np.zeros(shape), t)

    def step(self, s, a):
        dt = self.cfg.dt
        acc = ops.sub(a, ops.mul(self.damping, s.qdot))
        qdot = ops.add(s.qdot, ops.mul(dt, acc))
        q = ops.add(s.q, ops.mul(dt, qdot))
        err = ops.getitem(ops.sub(q, self.goal), (Ellipsis, 0))
        reward = ops.sub(1.0, ops.square(err))
        t = np.asarray(s.t) + 1
        self.offset += 1
        batch = np.shape(value_of(q))[:-1]
        stiff = self.stiff_from is not None and self.offset >= self.stiff_from
        k = np.full(batch, self.stiffness if stiff else 0.0)
        done = np.broadcast_to(t >= self.cfg.H_max, batch).copy()
        return StepOutcome(
            next=SimState(q, qdot, t),
            reward=reward,
            done=done,
            contact_force=np.full(batch + (1,), 1.0 if stiff else 0.0),
            qddot=np.asarray(value_of(acc)),
            terminated=np.zeros(batch, dtype=bool),
            contact_stiffness=k,
        )

    def observe(self, s):
        return ops.concatenate([s.q, s.qdot], -1)

    def contact_delta(self, x, a):
        return np.zeros(np.shape(x))
