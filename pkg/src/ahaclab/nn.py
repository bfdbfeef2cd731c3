"""Small MLPs, a tanh-squashed Gaussian policy, a double critic and Adam.

Parameters are plain numpy arrays. To differentiate, lift them onto a tape
with :func:`lift` and call the forward functions with the resulting Vars;
the same functions run on raw arrays for plain evaluation.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .errors import ArityError, NumericalOverflow

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)


def orthogonal(rng, n_out, n_in, gain=1.0):
    a = rng.standard_normal((max(n_out, n_in), min(n_out, n_in)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_out < n_in:
        q = q.T
    return gain * q[:n_out, :n_in]


@dataclass
class MlpParameters:
    """Layers of ``(W, b)``; ELU between layers, identity on the output."""

    layers: list

    @classmethod
    def init(cls, rng, sizes, out_gain=1.0, hidden_gain=1.0):
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = out_gain if i == len(sizes) - 2 else hidden_gain
            layers.append((orthogonal(rng, n_out, n_in, gain), np.zeros(n_out)))
        return cls(layers)

    @property
    def sizes(self):
        return [self.layers[0][0].shape[-1]] + [W.shape[-2] for W, _ in self.layers]

    def arrays(self):
        return [a for layer in self.layers for a in layer]

    @classmethod
    def from_arrays(cls, arrays):
        return cls([(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)])

    def copy(self):
        return MlpParameters([(W.copy(), b.copy()) for W, b in self.layers])


def mlp_forward(layers, x):
    """Forward pass. ``layers`` holds arrays or Vars; weights may carry
    leading batch dimensions (one network per sample)."""
    n_in = np.shape(layers[0][0])[-1]
    if np.shape(x)[-1] != n_in:
        raise ArityError(f"input width {np.shape(x)[-1]} != first layer width {n_in}")
    h = x
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        h = ops.add(ops.matvec(W, h), b)
        if i < last:
            h = ops.elu(h)
    return h


def lift(tape, arrays):
    return [tape.variable(a) for a in arrays]


# ---------------------------------------------------------------- policy


@dataclass
class PolicyParameters:
    trunk: MlpParameters
    log_std: np.ndarray
    log_std_bounds: tuple = (-5.0, 2.0)

    @classmethod
    def init(cls, rng, obs_dim, act_dim, hidden=(128, 64, 32), init_log_std=-1.0, log_std_bounds=(-5.0, 2.0)):
        trunk = MlpParameters.init(rng, [obs_dim, *hidden, act_dim], out_gain=0.01)
        return cls(trunk, np.full(act_dim, float(init_log_std)), tuple(log_std_bounds))

    def arrays(self):
        return self.trunk.arrays() + [self.log_std]

    def set_arrays(self, arrays):
        self.trunk = MlpParameters.from_arrays(list(arrays[:-1]))
        self.log_std = arrays[-1]
        self.clamp()

    def clamp(self):
        lo, hi = self.log_std_bounds
        self.log_std = np.clip(self.log_std, lo, hi)

    def copy(self):
        return PolicyParameters(self.trunk.copy(), self.log_std.copy(), self.log_std_bounds)


def log1m_tanh_sq(u):
    """``log(1 - tanh(u)^2)`` in the form that stays accurate for large |u|."""
    return ops.mul(2.0, ops.sub(ops.sub(LOG_2, u), ops.softplus(ops.mul(-2.0, u))))


def gaussian_log_density(u, mean, log_std):
    z = ops.div(ops.sub(u, mean), ops.exp(log_std))
    return ops.sub(ops.mul(-0.5, ops.square(z)), ops.add(log_std, 0.5 * LOG_2PI))


def policy_mean(arrays, obs):
    """Pre-squash mean from a flat list ``[W0, b0, ..., log_std]``."""
    trunk = [(arrays[i], arrays[i + 1]) for i in range(0, len(arrays) - 1, 2)]
    return mlp_forward(trunk, obs)


def policy_sample(arrays, obs, noise):
    """Reparameterized action ``tanh(mu + sigma * noise)`` and its log-density.

    The action carries the pathwise gradient. ``log_prob`` is the
    tanh-corrected density of that action seen as a function of the
    parameters (the pre-squash sample is detached), so differentiating it
    gives the score ``grad log pi(a|s)``. Detaching ``obs`` is the caller's
    choice.
    """
    log_std = arrays[-1]
    mu = policy_mean(arrays, obs)
    u = ops.add(mu, ops.mul(ops.exp(log_std), noise))
    action = ops.tanh(u)
    u_fixed = ops.stop_gradient(u)
    per_dim = ops.sub(gaussian_log_density(u_fixed, mu, log_std), log1m_tanh_sq(u_fixed))
    return action, ops.sum(per_dim, axis=-1)


def policy_log_prob(arrays, obs, action):
    """Log-density of a given squashed action."""
    a = np.clip(np.asarray(action, dtype=np.float64), -1 + 1e-12, 1 - 1e-12)
    u = np.arctanh(a)
    mu = policy_mean(arrays, obs)
    per_dim = ops.sub(gaussian_log_density(u, mu, arrays[-1]), log1m_tanh_sq(u))
    return ops.sum(per_dim, axis=-1)


# ---------------------------------------------------------------- critics


@dataclass
class CriticPair:
    """Two independently initialized value heads; downstream value is their
    pointwise minimum. With ``double=False`` only the first head is used."""

    heads: list
    double: bool = True

    @classmethod
    def init(cls, rng, obs_dim, hidden=(64, 64), double=True):
        return cls([MlpParameters.init(rng, [obs_dim, *hidden, 1]) for _ in range(2)], double)

    def active_heads(self):
        return self.heads if self.double else self.heads[:1]

    def arrays(self):
        return [a for h in self.active_heads() for a in h.arrays()]

    def set_arrays(self, arrays):
        k = 0
        for h in self.active_heads():
            n = len(h.layers) * 2
            h.layers = MlpParameters.from_arrays(list(arrays[k : k + n])).layers
            k += n

    def copy(self):
        return CriticPair([h.copy() for h in self.heads], self.double)


def critic_head_values(head_arrays, obs):
    return [ops.getitem(mlp_forward(h, obs), (Ellipsis, 0)) for h in head_arrays]


def split_heads(critic, arrays):
    """Regroup a flat array list (or Vars) into per-head layer lists."""
    heads, k = [], 0
    for h in critic.active_heads():
        n = len(h.layers)
        heads.append([(arrays[k + 2 * i], arrays[k + 2 * i + 1]) for i in range(n)])
        k += 2 * n
    return heads


def critic_value(critic, obs, arrays=None):
    """Double-critic minimum (or the single head) at ``obs``."""
    if arrays is None:
        arrays = critic.arrays()
    vals = critic_head_values(split_heads(critic, arrays), obs)
    v = vals[0]
    for other in vals[1:]:
        v = ops.minimum(v, other)
    return v


# ---------------------------------------------------------------- optimization


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads))


def clip_grad_norm(grads, max_norm):
    """Scale all gradients by ``max_norm / ||g||`` when the global norm exceeds it."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    n = global_norm(grads)
    if n > max_norm:
        scale = max_norm / n
        return [g * scale for g in grads]
    return list(grads)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        """Return bias-corrected Adam-updated copies of ``params``."""
        if len(params) != len(grads):
            raise ArityError("params/grads length mismatch")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NumericalOverflow("non-finite gradient passed to Adam")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if np.shape(p) != np.shape(g):
                raise ArityError(f"param {i} shape {np.shape(p)} != grad shape {np.shape(g)}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def adam_step(state, params, grads):
    return state.step(params, grads)


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"AHCK"
_VERSION = 1


def save_params(path, arrays):
    """Write arrays as: magic, version, count, shape table, then LE float64 data."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(arrays)))
        for a in arrays:
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        for a in arrays:
            fh.write(a.astype("<f8").tobytes(order="C"))


def load_params(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a parameter checkpoint")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shapes.append(struct.unpack_from(f"<{ndim}Q", data, off))
        off += 8 * ndim
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64))
        off += 8 * n
    return arrays
