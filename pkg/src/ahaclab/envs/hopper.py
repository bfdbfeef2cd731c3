"""Planar single-leg hopper: floating torso, thigh, shank and a short foot.

Generalized coordinates ``q = (x, z, phi, q_hip, q_knee, q_ankle)``: ``(x, z)``
is the hip position, ``phi`` the torso pitch and the rest are relative joint
angles. Each body is lumped into a point mass at its centre plus a rotational
inertia ``m l^2 / 12``. The heel and toe touch the ground plane ``z = 0``
through the spring-damper / soft-Coulomb law also used by the ball.

Dynamics are ``M(q) qddot = Q_gravity + Q_bias + Q_contact + Q_joint``, with
the mass matrix and bias terms assembled from point Jacobians, integrated by
semi-implicit Euler over ``cfg.substeps`` sub-steps per control step.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import value_of
from .base import ContactParams, Env, EnvConfig, SimState, StepOutcome, soft_heaviside

# torso, thigh, shank, foot
MASSES = (3.0, 1.0, 0.5, 0.5)
LENGTHS = (0.4, 0.45, 0.5, 0.39)

HOPPER_CONFIG = EnvConfig(
    dt=1.0 / 60.0,
    gravity=9.81,
    H_max=1000,
    h_term=0.9,
    theta_term=1.0,
    reset_noise_scale=0.0,
    action_scale=10.0,
    term_margin=0.1,
    substeps=2,
)
HOPPER_CONTACT = ContactParams(k_n=2000.0, k_d=10.0, mu=0.9, nu=0.1)


@dataclass(frozen=True)
class HopperModel:
    masses: tuple = MASSES
    lengths: tuple = LENGTHS
    joint_damping: float = 0.5
    stance: tuple = (0.3, -0.6, 0.3)

    def tables(self):
        lt, l1, l2, l3 = self.lengths
        # rows: torso, thigh, shank, foot centres, then heel and toe
        coef = np.array(
            [
                [0.5 * lt, 0.0, 0.0, 0.0],
                [0.0, 0.5 * l1, 0.0, 0.0],
                [0.0, l1, 0.5 * l2, 0.0],
                [0.0, l1, l2, l3 / 6.0],
                [0.0, l1, l2, -l3 / 3.0],
                [0.0, l1, l2, 2.0 * l3 / 3.0],
            ]
        )
        # body axis in its own frame: torso up, leg links down, foot forward
        axes = np.array([[0.0, 1.0], [0.0, -1.0], [0.0, -1.0], [1.0, 0.0]])
        m = np.array(self.masses)
        inertia = m * np.array(self.lengths) ** 2 / 12.0
        tril = np.tril(np.ones((4, 4)))
        rot = np.zeros((6, 6))
        rot[2:, 2:] = tril.T @ np.diag(inertia) @ tril
        return coef, axes, np.concatenate([m, [0.0, 0.0]]), tril, rot


class Hopper(Env):
    nq = 6
    obs_dim = 11
    act_dim = 3

    def __init__(self, cfg=HOPPER_CONFIG, cp=HOPPER_CONTACT, model=HopperModel()):
        self.cfg, self.cp, self.model = cfg, cp, model
        self.coef, self.axes, self.point_mass, self.tril, self.rot_inertia = model.tables()
        self.total_mass = float(np.sum(model.masses))

    # ------------------------------------------------------------ kinematics

    def initial_state(self):
        qh, qk, qa = self.model.stance
        _, l1, l2, _ = self.model.lengths
        # place the flat foot exactly on the ground
        z = l1 * np.cos(qh) + l2 * np.cos(qh + qk)
        return SimState(np.array([0.0, z, 0.0, qh, qk, qa]), np.zeros(6), 0)

    def reset(self, rng, batch=None):
        s = self.initial_state()
        shape = (() if batch is None else (batch,)) + (6,)
        q = np.broadcast_to(s.q, shape).copy()
        qdot = np.zeros(shape)
        if self.cfg.reset_noise_scale > 0:
            q[..., 2:] += self.cfg.reset_noise_scale * rng.uniform(-1, 1, shape[:-1] + (4,))
            qdot += self.cfg.reset_noise_scale * rng.uniform(-1, 1, shape)
        t = 0 if batch is None else np.zeros(batch, dtype=np.int64)
        return SimState(q, qdot, t)

    def _points(self, q, qdot):
        """Point positions, velocities, Jacobians and bias accelerations."""
        phi = ops.matvec(self.tril, ops.getitem(q, (Ellipsis, slice(2, 6))))
        phidot = ops.matvec(self.tril, ops.getitem(qdot, (Ellipsis, slice(2, 6))))
        c, s = ops.cos(phi), ops.sin(phi)
        vx, vz = self.axes[:, 0], self.axes[:, 1]
        ux = ops.sub(ops.mul(c, vx), ops.mul(s, vz))
        uz = ops.add(ops.mul(s, vx), ops.mul(c, vz))
        # d(u)/d(phi) is u rotated by +90 degrees
        dux, duz = ops.neg(uz), ux
        base_x = ops.getitem(q, (Ellipsis, slice(0, 1)))
        base_z = ops.getitem(q, (Ellipsis, slice(1, 2)))
        px = ops.add(base_x, ops.matvec(self.coef, ux))
        pz = ops.add(base_z, ops.matvec(self.coef, uz))
        batch = np.shape(value_of(q))[:-1]
        npts = self.coef.shape[0]
        ones = np.broadcast_to(np.ones((npts, 1)), batch + (npts, 1))
        zeros = np.zeros(batch + (npts, 1))
        ang_x = ops.matmul(ops.mul(self.coef, ops.expand_dims(dux, -2)), self.tril)
        ang_z = ops.matmul(ops.mul(self.coef, ops.expand_dims(duz, -2)), self.tril)
        Jx = ops.concatenate([ones, zeros, ang_x], -1)
        Jz = ops.concatenate([zeros, ones, ang_z], -1)
        w2 = ops.square(phidot)
        bias_x = ops.neg(ops.matvec(self.coef, ops.mul(ux, w2)))
        bias_z = ops.neg(ops.matvec(self.coef, ops.mul(uz, w2)))
        vel_x = ops.matvec(Jx, qdot)
        vel_z = ops.matvec(Jz, qdot)
        return px, pz, vel_x, vel_z, Jx, Jz, bias_x, bias_z

    def _contact_forces(self, pz, vel_x, vel_z):
        """Ground forces ``(fx, fz)`` at every point (zero except heel/toe)."""
        cp = self.cp
        sel = (Ellipsis, slice(4, 6))
        z = ops.getitem(pz, sel)
        active = (np.asarray(value_of(z)) < 0.0).astype(np.float64)
        pen = ops.maximum(ops.neg(z), 0.0)
        # damping only while moving into the ground
        fn = ops.mul(ops.add(ops.mul(cp.k_n, pen), ops.mul(cp.k_d, ops.maximum(ops.neg(ops.getitem(vel_z, sel)), 0.0))), active)
        ft = ops.mul(ops.mul(-cp.mu, fn), soft_heaviside(ops.getitem(vel_x, sel), cp.nu))
        pad = np.zeros(np.shape(value_of(pz))[:-1] + (4,))
        return ops.concatenate([pad, ft], -1), ops.concatenate([pad, fn], -1), active

    def _dynamics(self, q, qdot, a):
        """Accelerations and the generalized contact force at ``(q, qdot)``."""
        px, pz, vel_x, vel_z, Jx, Jz, bias_x, bias_z = self._points(q, qdot)
        JxT, JzT = ops.swapaxes(Jx, -1, -2), ops.swapaxes(Jz, -1, -2)
        m = self.point_mass
        M = ops.add(
            ops.add(ops.matmul(ops.mul(JxT, m), Jx), ops.matmul(ops.mul(JzT, m), Jz)),
            self.rot_inertia,
        )
        Q = ops.mul(-self.cfg.gravity, ops.matvec(JzT, m))
        Q = ops.sub(Q, ops.add(ops.matvec(JxT, ops.mul(m, bias_x)), ops.matvec(JzT, ops.mul(m, bias_z))))
        fx, fz, active = self._contact_forces(pz, vel_x, vel_z)
        Qc = ops.add(ops.matvec(JxT, fx), ops.matvec(JzT, fz))
        batch = np.shape(value_of(q))[:-1]
        joint_vel = ops.getitem(qdot, (Ellipsis, slice(3, 6)))
        tau = ops.sub(ops.mul(self.cfg.action_scale, a), ops.mul(self.model.joint_damping, joint_vel))
        Qa = ops.concatenate([np.zeros(batch + (3,)), tau], -1)
        Q = ops.add(ops.add(Q, Qc), Qa)
        return ops.solve(M, Q), M, Qc, active

    # ------------------------------------------------------------ stepping

    def torso_height(self, q):
        lt = self.model.lengths[0]
        z = ops.getitem(q, (Ellipsis, 1))
        phi = ops.getitem(q, (Ellipsis, 2))
        return ops.add(z, ops.mul(0.5 * lt, ops.cos(phi)))

    def reward(self, q, qdot, a):
        return hopper_reward(
            ops.getitem(qdot, (Ellipsis, 0)),
            self.torso_height(q),
            ops.getitem(q, (Ellipsis, 2)),
            a,
            self.cfg,
        )

    def step(self, s, a):
        cfg = self.cfg
        a = a if a is not None else np.zeros(np.shape(value_of(s.q))[:-1] + (3,))
        h = cfg.dt / cfg.substeps
        q, qdot = s.q, s.qdot
        first = None
        for _ in range(cfg.substeps):
            qddot, _, Qc, _ = self._dynamics(q, qdot, a)
            if first is None:
                first = (np.asarray(value_of(qddot)), np.asarray(value_of(Qc)))
            qdot = ops.add(qdot, ops.mul(h, qddot))
            q = ops.add(q, ops.mul(h, qdot))
        t = np.asarray(s.t) + 1
        reward = self.reward(q, qdot, a)
        height = np.asarray(value_of(self.torso_height(q)))
        terminated = height < cfg.h_term - cfg.term_margin
        done = terminated | (t >= cfg.H_max)
        return StepOutcome(
            next=SimState(q, qdot, t),
            reward=reward,
            done=done,
            contact_force=first[1],
            qddot=first[0],
            terminated=terminated,
        )

    def observe(self, s):
        return ops.concatenate([ops.getitem(s.q, (Ellipsis, slice(1, 6))), s.qdot], -1)

    def contact_delta(self, x, a):
        """Velocity and position increments caused by contact over one step."""
        q = ops.getitem(x, (Ellipsis, slice(0, 6)))
        qdot = ops.getitem(x, (Ellipsis, slice(6, 12)))
        _, M, Qc, _ = self._dynamics(q, qdot, a)
        dv = ops.mul(self.cfg.dt, ops.solve(M, Qc))
        return ops.concatenate([ops.mul(self.cfg.dt, dv), dv], -1)


def hopper_reward(vx, height, theta, a, cfg):
    """Forward velocity plus height and posture shaping minus an action cost."""
    dh = ops.sub(height, cfg.h_term)
    above = np.asarray(value_of(dh)) >= 0.0
    r_height = ops.where(above, dh, ops.mul(-200.0, ops.square(dh)))
    r_angle = ops.sub(1.0, ops.square(ops.div(theta, cfg.theta_term)))
    cost = ops.mul(0.1, ops.sum(ops.square(a), axis=-1))
    return ops.sub(ops.add(ops.add(vx, r_height), r_angle), cost)
