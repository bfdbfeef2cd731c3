"""A point ball launched at a vertical wall, aiming to finish on a target.

State is ``q = (x, y)``, ``qdot = (vx, vy)`` with any leading batch axes.
The only decision is the launch angle; after that the ball flies
ballistically, and while it penetrates the wall a spring-damper normal
force and a soft-Coulomb tangential force act on it.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import value_of
from .base import ContactParams, Env, EnvConfig, SimState, StepOutcome, soft_heaviside

BALL_CONFIG = EnvConfig(dt=0.05, gravity=2.0, H_max=40)
BALL_CONTACT = ContactParams(k_n=2000.0, k_d=10.0, mu=0.5, nu=0.1)


@dataclass(frozen=True)
class BallGeometry:
    start: tuple = (0.0, 0.0)
    speed: float = 6.0
    wall_x: float = 3.0
    target: tuple = (1.0, 0.5)
    mass: float = 1.0
    contact: bool = True
    # force per unit action; 0 leaves the ball unactuated after launch
    thrust: float = 0.0


DEFAULT_GEOMETRY = BallGeometry()


def launch(angle, geom=DEFAULT_GEOMETRY):
    """Initial state for a launch angle (radians above horizontal)."""
    direction = ops.stack([ops.cos(angle), ops.sin(angle)], axis=-1)
    qdot = ops.mul(geom.speed, direction)
    q = np.broadcast_to(np.asarray(geom.start, dtype=np.float64), np.shape(value_of(qdot))).copy()
    return SimState(q, qdot, 0)


def wall_force(q, qdot, cp, geom=DEFAULT_GEOMETRY):
    """Contact force on the ball, shape (..., 2); zero when not penetrating."""
    x = ops.getitem(q, (Ellipsis, 0))
    vx = ops.getitem(qdot, (Ellipsis, 0))
    vy = ops.getitem(qdot, (Ellipsis, 1))
    if not geom.contact:
        return np.zeros(np.shape(value_of(q)))
    active = (np.asarray(value_of(x)) - geom.wall_x) > 0
    pen = ops.maximum(ops.sub(x, geom.wall_x), 0.0)
    # damping acts only while moving into the wall
    fn = ops.mul(ops.add(ops.mul(cp.k_n, pen), ops.mul(cp.k_d, ops.maximum(vx, 0.0))), active.astype(np.float64))
    ft = ops.mul(ops.mul(-cp.mu, fn), soft_heaviside(vy, cp.nu))
    return ops.stack([ops.neg(fn), ft], axis=-1)


def ball_step(s, cfg=BALL_CONFIG, cp=BALL_CONTACT, geom=DEFAULT_GEOMETRY, a=None):
    """One semi-implicit Euler step. Reward is ``1 / ||q_H - target||`` on
    the step that reaches ``t == cfg.H_max`` and 0 otherwise."""
    f = wall_force(s.q, s.qdot, cp, geom)
    if a is not None and geom.thrust:
        f = ops.add(f, ops.mul(geom.thrust, a))
    g = np.array([0.0, -cfg.gravity])
    acc = ops.add(ops.div(f, geom.mass), g)
    qdot = ops.add(s.qdot, ops.mul(cfg.dt, acc))
    q = ops.add(s.q, ops.mul(cfg.dt, qdot))
    t = s.t + 1
    final = np.asarray(t) >= cfg.H_max
    if np.any(final):
        dist = ops.norm(ops.sub(q, np.asarray(geom.target)), axis=-1)
        reward = ops.where(final, ops.div(1.0, dist), 0.0)
    else:
        reward = np.zeros(np.shape(value_of(q))[:-1])
    fv = np.asarray(value_of(f))
    return StepOutcome(
        next=SimState(q, qdot, t),
        reward=reward,
        done=np.broadcast_to(final, np.shape(fv)[:-1]).copy(),
        contact_force=fv,
        qddot=np.asarray(value_of(acc)),
        terminated=np.zeros(np.shape(fv)[:-1], dtype=bool),
    )


class BallEnv(Env):
    nq = 2
    obs_dim = 4

    def __init__(self, cfg=BALL_CONFIG, cp=BALL_CONTACT, geom=DEFAULT_GEOMETRY, angle=0.4):
        self.cfg, self.cp, self.geom = cfg, cp, geom
        self.angle = angle
        self.act_dim = 2 if geom.thrust else 0

    def reset(self, rng=None, batch=None):
        angle = np.full(() if batch is None else (batch,), float(self.angle))
        s = launch(angle, self.geom)
        return SimState(s.q, s.qdot, 0 if batch is None else np.zeros(batch, dtype=np.int64))

    def step(self, s, a=None):
        return ball_step(s, self.cfg, self.cp, self.geom, a)

    def observe(self, s):
        return ops.concatenate([s.q, s.qdot], -1)

    def contact_delta(self, x, a=None):
        q = ops.getitem(x, (Ellipsis, slice(0, 2)))
        qdot = ops.getitem(x, (Ellipsis, slice(2, 4)))
        dv = ops.mul(self.cfg.dt / self.geom.mass, wall_force(q, qdot, self.cp, self.geom))
        return ops.concatenate([ops.mul(self.cfg.dt, dv), dv], -1)

    def contact_stiffness(self, s, a=None, qddot=None):
        if qddot is None:
            qddot = np.asarray(value_of(ball_step(s.values(), self.cfg, self.cp, self.geom).qddot))
        return super().contact_stiffness(s, np.zeros(np.shape(value_of(s.q))[:-1] + (0,)), qddot)

    def final_return(self, angle, horizon):
        """Return at truncated horizon ``horizon`` for launch ``angle`` (batched)."""
        cfg = self.cfg.with_(H_max=horizon)
        s = launch(angle, self.geom)
        out = None
        for _ in range(horizon):
            out = ball_step(s, cfg, self.cp, self.geom)
            s = out.next
        return out.reward

    def trajectory(self, angle, horizon):
        """Plain positions, per-step contact flags and stiffness for each step."""
        s = launch(np.asarray(angle, dtype=np.float64), self.geom)
        cfg = self.cfg.with_(H_max=horizon)
        pos, contact, stiff = [], [], []
        for _ in range(horizon):
            out = ball_step(s, cfg, self.cp, self.geom)
            contact.append(np.any(out.contact_force != 0.0, axis=-1))
            stiff.append(self.contact_stiffness(s, None, out.qddot))
            s = out.next
            pos.append(np.asarray(s.q))
        return np.stack(pos, 0), np.stack(contact, 0), np.stack(stiff, 0)
