"""Batch policy-gradient estimators and the diagnostics used to compare them.

Two estimators of ``grad_theta E[R]`` are provided:

* ``zobg``: the likelihood-ratio estimate ``mean((R - R*) * score)`` with the
  noise-free return ``R*`` as baseline. No gradient flows through dynamics.
* ``fobg``: the pathwise estimate, ``mean(grad R)`` taken through the tape.

Both consume a *problem* object with ``dim`` and two batched methods,
``pathwise(theta, noise) -> (R, grads)`` and ``likelihood(theta, noise) ->
(R, R_star, score)``. Rows of ``noise`` are independent samples, so passing
the same noise to both estimators gives common random numbers.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .autodiff import ops
from .autodiff.tape import Tape, value_of
from .envs.base import soft_heaviside
from .errors import ArityError

FOBG = "FOBG"
ZOBG = "ZOBG"


@dataclass
class GradientReport:
    method: str
    N: int
    mean_grad: np.ndarray
    var_grad: np.ndarray
    esnr: float
    samples_retained: int
    samples: np.ndarray = field(default=None, repr=False)

    @property
    def stderr(self):
        """Per-coordinate standard error of ``mean_grad``."""
        return np.sqrt(self.var_grad / max(self.samples_retained, 1))


@dataclass(frozen=True)
class LipschitzConstants:
    B_r: float
    B_pi: float
    B_f: float
    H: int

    def __post_init__(self):
        if min(self.B_r, self.B_pi, self.B_f) < 0:
            raise ValueError("Lipschitz constants must be non-negative")
        if self.H < 1:
            raise ValueError("H must be >= 1")


# ---------------------------------------------------------------- problems


class GaussianActionProblem:
    """Open-loop problem ``a = theta + sigma * w`` with a batched reward.

    ``reward_fn`` maps actions of shape ``(N, dim)`` to returns ``(N,)`` and
    must be written with :mod:`ahaclab.autodiff.ops` so it can be recorded.
    """

    def __init__(self, reward_fn, sigma, dim=1):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.reward_fn = reward_fn
        self.sigma = float(sigma)
        self.dim = dim

    def pathwise(self, theta, noise):
        theta = np.asarray(theta, dtype=np.float64).reshape(self.dim)
        tape = Tape(check_finite=False)
        th = tape.variable(np.broadcast_to(theta, noise.shape))
        R = self.reward_fn(ops.add(th, self.sigma * noise))
        (g,) = tape.gradient(R, [th], np.ones(noise.shape[0]))
        return np.asarray(value_of(R), dtype=np.float64), g

    def likelihood(self, theta, noise):
        theta = np.asarray(theta, dtype=np.float64).reshape(self.dim)
        R = np.asarray(self.reward_fn(theta + self.sigma * noise), dtype=np.float64)
        R_star = float(np.asarray(self.reward_fn(theta[None, :]))[0])
        # score of N(theta, sigma^2) at a = theta + sigma w is w / sigma
        return R, R_star, noise / self.sigma


class PolicyRolloutProblem:
    """Closed-loop rollouts of a tanh-Gaussian policy from a fixed start.

    ``theta`` is the flat concatenation of the policy arrays. The parameters
    are replicated once per sample so each row's gradient comes out of a
    single backward sweep.
    """

    def __init__(self, env, policy, H, s0):
        from .nn import PolicyParameters

        if not isinstance(policy, PolicyParameters):
            raise TypeError("policy must be PolicyParameters")
        self.env, self.policy, self.H, self.s0 = env, policy, H, s0
        self.shapes = [np.shape(a) for a in policy.arrays()]
        self.dim = int(sum(np.prod(s) for s in self.shapes))

    def unflatten(self, theta):
        out, k = [], 0
        for s in self.shapes:
            n = int(np.prod(s))
            out.append(np.asarray(theta[k : k + n]).reshape(s))
            k += n
        return out

    def flatten(self, arrays):
        return np.concatenate([np.reshape(a, (-1,)) for a in arrays])

    def noise_shape(self, N):
        return (N, self.H, self.env.act_dim)

    def _run(self, arrays, noise, detach_obs):
        from .envs.rollout import start_batch
        from .nn import policy_sample

        N = noise.shape[0]
        s = start_batch(self.s0, N)
        ret, logp = 0.0, 0.0
        for h in range(self.H):
            obs = self.env.observe(s)
            if detach_obs:
                obs = ops.stop_gradient(obs)
            a, lp = policy_sample(arrays, obs, noise[:, h])
            out = self.env.step(s, a)
            ret = ops.add(ret, out.reward)
            logp = ops.add(logp, lp)
            s = out.next
        return ret, logp

    def _replicated(self, tape, theta, N):
        arrays = self.unflatten(np.asarray(theta, dtype=np.float64))
        return [tape.variable(np.broadcast_to(a, (N,) + a.shape)) for a in arrays]

    def pathwise(self, theta, noise):
        N = noise.shape[0]
        tape = Tape(check_finite=False)
        params = self._replicated(tape, theta, N)
        ret, _ = self._run(params, noise, detach_obs=False)
        grads = tape.gradient(ret, params, np.ones(N))
        return np.asarray(value_of(ret)), np.concatenate([g.reshape(N, -1) for g in grads], axis=1)

    def likelihood(self, theta, noise):
        N = noise.shape[0]
        arrays = self.unflatten(np.asarray(theta, dtype=np.float64))
        tape = Tape(check_finite=False)
        params = self._replicated(tape, theta, N)
        ret, logp = self._run(params, noise, detach_obs=True)
        grads = tape.gradient(logp, params, np.ones(N))
        star, _ = self._run(arrays, np.zeros((1,) + noise.shape[1:]), detach_obs=True)
        score = np.concatenate([g.reshape(N, -1) for g in grads], axis=1)
        return np.asarray(value_of(ret)), float(np.asarray(star)[0]), score


# ---------------------------------------------------------------- estimators


def draw_noise(rng, shape):
    """Standard-normal noise, drawn row-major so a prefix of rows is stable in N."""
    return rng.standard_normal(shape)


def _noise_for(problem, N, rng, noise):
    if noise is not None:
        return np.asarray(noise, dtype=np.float64)
    if N < 1:
        raise ValueError("N must be >= 1")
    shape = problem.noise_shape(N) if hasattr(problem, "noise_shape") else (N, problem.dim)
    return draw_noise(rng, shape)


def _report(method, samples, N):
    finite = np.all(np.isfinite(samples), axis=1)
    kept = samples[finite]
    n = kept.shape[0]
    mean = kept.mean(axis=0) if n else np.full(samples.shape[1], np.nan)
    var = kept.var(axis=0, ddof=1) if n >= 2 else np.zeros(samples.shape[1])
    return GradientReport(method, N, mean, var, esnr(kept) if n >= 2 else float("nan"), n, kept)


def fobg(problem, theta, N=None, rng=None, noise=None):
    """First-order batch gradient. Non-finite samples are dropped and counted."""
    noise = _noise_for(problem, N, rng, noise)
    with np.errstate(all="ignore"):
        R, g = problem.pathwise(theta, noise)
    g = np.asarray(g, dtype=np.float64).reshape(noise.shape[0], -1)
    g = np.where(np.isfinite(R)[:, None], g, np.nan)
    return _report(FOBG, g, noise.shape[0])


def zobg(problem, theta, N=None, rng=None, noise=None):
    """Zeroth-order batch gradient with the noise-free return as baseline."""
    noise = _noise_for(problem, N, rng, noise)
    with np.errstate(all="ignore"):
        R, R_star, score = problem.likelihood(theta, noise)
    score = np.asarray(score, dtype=np.float64).reshape(noise.shape[0], -1)
    return _report(ZOBG, (np.asarray(R) - R_star)[:, None] * score, noise.shape[0])


def sample_error(a, b):
    """``|| mean_a - mean_b ||_2``."""
    ma, mb = np.asarray(a.mean_grad), np.asarray(b.mean_grad)
    if ma.shape != mb.shape:
        raise ArityError(f"mean gradient shapes differ: {ma.shape} vs {mb.shape}")
    return float(np.linalg.norm(ma - mb))


def _snr(samples):
    total_var = float(np.sum(samples.var(axis=0, ddof=1)))
    signal = float(np.sum(samples.mean(axis=0) ** 2))
    if total_var == 0.0:
        return math.inf
    return signal / total_var


def esnr(samples, groups=10):
    """Expected signal-to-noise ratio ``sum(mean^2) / sum(var)``.

    The outer expectation is estimated by averaging over ``groups`` disjoint
    sub-batches; if those would hold fewer than two samples the whole batch
    is used. Zero variance returns ``inf``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 2:
        raise ArityError("esnr needs at least two samples")
    size = n // groups
    if size < 2:
        return _snr(samples)
    vals = [_snr(samples[i * size : (i + 1) * size]) for i in range(groups)]
    return float(np.mean(vals))


def lemma_bound(c):
    """Sample-error bound ``H * B_r * B_pi * (1/2 + B_f^(H-1))``."""
    return c.H * c.B_r * c.B_pi * (0.5 + c.B_f ** (c.H - 1))


def zobg_variance_bound(sigma, c):
    """ZOBG variance bound ``H * B_r^2 * B_pi^2 / sigma^2``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return c.H * c.B_r**2 * c.B_pi**2 / sigma**2


def heaviside_true_grad(theta, nu, sigma, width=8.0):
    """``d/dtheta E[H(theta + w)]``, ``w ~ N(0, sigma^2)``, by quadrature.

    Differentiates the Gaussian density under the integral:
    ``int H(x) (x - theta) / sigma^2 N(x; theta, sigma^2) dx``. The integrand's
    kinks at ``+-nu/2`` are passed to the integrator as break points.
    """
    if nu <= 0 or sigma <= 0:
        raise ValueError("nu and sigma must be positive")
    lo, hi = theta - width * sigma, theta + width * sigma

    def integrand(x):
        z = (x - theta) / sigma
        dens = math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
        return float(soft_heaviside(x, nu)) * z / sigma * dens

    kinks = [p for p in (-nu / 2, nu / 2) if lo < p < hi]
    val, _ = integrate.quad(integrand, lo, hi, points=kinks or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def heaviside_problem(nu, sigma):
    return GaussianActionProblem(lambda a: soft_heaviside(ops.getitem(a, (Ellipsis, 0)), nu), sigma)
