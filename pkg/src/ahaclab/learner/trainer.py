"""Actor-critic training loops: BPTT, SHAC, AHAC, AHAC-1 and a ZOBG reference.

Every algorithm runs the same outer loop: roll the policy out for a window,
take one actor step, optionally adapt the horizon, then fit the critic on
TD(lambda) targets from that window. They differ only in how the window ends,
in the actor objective, and in the critic recipe, all of which are fields of
:class:`TrainConfig`.
"""

import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..autodiff import ops
from ..autodiff.tape import Tape, value_of
from ..envs.rollout import lane_noise, lane_streams, rollout
from ..errors import ConfigError, NumericalOverflow
from ..nn import AdamState, CriticPair, PolicyParameters, clip_grad_norm, critic_value, policy_sample
from .critic import train_critic_until_converged
from .horizon import HorizonState, constraint_penalty, update_multipliers_and_horizon
from .td import TDConfig, td_lambda_targets

ALGOS = ("BPTT", "SHAC", "AHAC", "AHAC1", "ZOBG_PG")


@dataclass
class TrainConfig:
    algo: str = "SHAC"
    lanes: int = 16
    H: int = 32
    gamma: float = 0.99
    lam: float = 0.95
    actor_lr: float = 2e-3
    critic_lr: float = 4e-3
    grad_norm: float = 1.0
    actor_hidden: tuple = (128, 64, 32)
    critic_hidden: tuple = (64, 64)
    init_log_std: float = -1.0
    log_std_bounds: tuple = (-5.0, 2.0)
    # critic recipe
    double_critic: bool = False
    iterative_critic: bool = False
    critic_batches: int = 8
    critic_epochs: int = 16
    critic_tol: float = 0.2
    critic_window: int = 5
    critic_max_iters: int = 64
    zero_critic: bool = False
    # horizon / contact
    adaptive_objective: bool = False
    adaptive_horizon: bool = False
    C: float = 500.0
    alpha_phi: float = 2e-4
    H_min: int = 8
    H_max: int = 64
    sign: int = -1
    truncate_on_contact: bool = False
    # budget and evaluation
    max_env_steps: int = 2048
    max_windows: int = 0
    eval_steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; expected one of {ALGOS}")
        if self.lanes < 1 or self.H < 1:
            raise ConfigError("lanes and H must be >= 1")
        self.actor_hidden = tuple(self.actor_hidden)
        self.critic_hidden = tuple(self.critic_hidden)
        self.log_std_bounds = tuple(self.log_std_bounds)

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def algo_preset(algo, **overrides):
    """Defaults for each algorithm; explicit overrides win."""
    if algo not in ALGOS:
        raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")
    preset = {
        "SHAC": {},
        "BPTT": {"zero_critic": True},
        "AHAC": {
            "double_critic": True,
            "iterative_critic": True,
            "adaptive_objective": True,
            "adaptive_horizon": True,
        },
        "AHAC1": {"lanes": 1, "double_critic": True, "iterative_critic": True, "truncate_on_contact": True},
        "ZOBG_PG": {},
    }[algo]
    known = {f.name for f in fields(TrainConfig)}
    bad = set(overrides) - known
    if bad:
        raise ConfigError(f"unknown training options: {sorted(bad)}")
    return TrainConfig(algo=algo, **{**preset, **overrides})


@dataclass
class TrainResult:
    seed: int
    records: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    final_reward: float = float("nan")
    failed: bool = False
    error: str = ""
    policy: PolicyParameters = None
    critic: CriticPair = None


def shac_actor_objective(buf, gamma):
    """Discounted window return with critic bootstraps, per lane.

    Discounting restarts at every episode boundary inside the window; a
    boundary closes the running return with ``gamma^k V`` (0 on termination),
    and the window end closes every still-open lane the same way.
    Returns a ``(B,)`` Var.
    """
    B = buf.lanes
    total, acc = 0.0, 0.0
    disc = np.ones(B)
    last = len(buf) - 1
    for h, (r, done) in enumerate(zip(buf.rewards, buf.done)):
        acc = ops.add(acc, ops.mul(disc, r))
        disc = disc * gamma
        end = done | (h == last)
        if np.any(end):
            boot = buf.bootstrap[h] if buf.bootstrap[h] is not None else 0.0
            closed = ops.add(acc, ops.mul(disc, boot))
            total = ops.add(total, ops.where(end, closed, 0.0))
            acc = ops.where(done, 0.0, acc)
            disc = np.where(done, 1.0, disc)
    return total


def ahac1_rollout(env, params, s, H_max, C, noise_fn, value_fn=None):
    """Roll until a step's normalized stiffness exceeds ``C`` or ``H_max`` steps pass."""
    return rollout(env, params, s, H_max, noise_fn, value_fn=value_fn, stop_threshold=C)


class Trainer:
    """State of one training run (one seed)."""

    def __init__(self, env, cfg):
        self.env, self.cfg = env, cfg
        seq = np.random.SeedSequence([cfg.seed, 7])
        init_rng = np.random.Generator(np.random.Philox(seq))
        self.policy = PolicyParameters.init(
            init_rng, env.obs_dim, env.act_dim, cfg.actor_hidden, cfg.init_log_std, cfg.log_std_bounds
        )
        self.critic = CriticPair.init(init_rng, env.obs_dim, cfg.critic_hidden, cfg.double_critic)
        self.actor_opt = AdamState(lr=cfg.actor_lr)
        self.critic_opt = AdamState(lr=cfg.critic_lr)
        self.critic_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 11])))
        self.streams = lane_streams(cfg.seed, cfg.lanes, salt=1)
        self.reset_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 13])))
        self.td = TDConfig(cfg.gamma, cfg.lam)
        self.hs = HorizonState(
            H_cont=float(cfg.H), H_min=cfg.H_min, H_max=cfg.H_max, C=cfg.C, alpha_phi=cfg.alpha_phi, sign=cfg.sign
        )
        self.state = env.reset(self.reset_rng, cfg.lanes)
        self.env_steps = 0
        self.iteration = 0
        self.truncations = 0
        self.running = np.zeros(cfg.lanes)
        self.episode_returns = []

    # ---------------------------------------------------------------- helpers

    def _noise_fn(self):
        act = self.env.act_dim
        return lambda h: lane_noise(self.streams, act)

    def _reset_fn(self):
        env, rng, B = self.env, self.reset_rng, self.cfg.lanes

        def reset(mask):
            return env.reset(rng, B)

        return reset

    def _value_fn(self):
        if self.cfg.zero_critic:
            return None
        critic = self.critic
        return lambda obs: critic_value(critic, obs)

    def _window_length(self):
        cfg = self.cfg
        if cfg.truncate_on_contact:
            return cfg.H_max
        if cfg.adaptive_horizon or cfg.adaptive_objective:
            return self.hs.length
        return cfg.H

    def _track_episodes(self, buf):
        for r, done in zip(buf.reward_values, buf.done):
            self.running += r
            for i in np.flatnonzero(done):
                self.episode_returns.append(float(self.running[i]))
                self.running[i] = 0.0

    def _critic_phase(self, buf):
        cfg = self.cfg
        if cfg.zero_critic:
            return 0.0, 0
        d = buf.arrays()
        Hw, B = d["rewards"].shape
        nv = np.asarray(critic_value(self.critic, d["next_obs"].reshape(Hw * B, -1))).reshape(Hw, B)
        nv = np.where(d["terminated"], 0.0, nv)
        targets = td_lambda_targets(d["rewards"], nv, d["done"], self.td)
        obs = d["obs"].reshape(Hw * B, -1)
        iters, losses = train_critic_until_converged(
            self.critic,
            obs,
            targets.reshape(-1),
            self.critic_opt,
            self.critic_rng,
            batches=cfg.critic_batches,
            tol=cfg.critic_tol,
            window=cfg.critic_window,
            max_iters=cfg.critic_max_iters,
            fixed_iters=None if cfg.iterative_critic else cfg.critic_epochs,
        )
        return losses[-1], iters

    # ---------------------------------------------------------------- one window

    def window(self):
        cfg = self.cfg
        H = self._window_length()
        tape = Tape()
        params = [tape.variable(a) for a in self.policy.arrays()]
        need_k = cfg.adaptive_horizon or cfg.adaptive_objective
        if cfg.algo == "ZOBG_PG":
            buf, loss = self._zobg_window(tape, params, H)
        else:
            buf = rollout(
                self.env,
                params,
                self.state,
                H,
                self._noise_fn(),
                value_fn=self._value_fn(),
                stiffness=need_k,
                stop_threshold=cfg.C if cfg.truncate_on_contact else None,
                reset_fn=self._reset_fn(),
            )
            J = shac_actor_objective(buf, cfg.gamma)
            loss = ops.div(ops.sum(J), -float(len(buf) * buf.lanes))
        grads = tape.gradient(loss, params)
        grads = clip_grad_norm(grads, cfg.grad_norm)
        self.policy.set_arrays(self.actor_opt.step(self.policy.arrays(), grads))
        k = np.mean(np.stack(buf.stiffness), axis=1) if buf.stiffness else None
        lagrangian = -float(value_of(loss))
        if cfg.adaptive_objective and k is not None:
            lagrangian += constraint_penalty(self.hs, k)
        if cfg.adaptive_horizon and k is not None:
            self.hs = update_multipliers_and_horizon(self.hs, k)
        self.truncations += int(buf.truncated)
        self._track_episodes(buf)
        self.state = buf.final_state.values()
        closs, citers = self._critic_phase(buf)
        self.env_steps += len(buf)
        self.iteration += 1
        return buf, {
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "episode_reward": self.episode_returns[-1] if self.episode_returns else float("nan"),
            "H": len(buf),
            "H_cont": self.hs.H_cont,
            "sum_phi": float(np.sum(self.hs.phi)),
            "objective": lagrangian,
            "critic_loss": closs,
            "critic_iters": citers,
            "truncation_count": self.truncations,
        }

    def _zobg_window(self, tape, params, H):
        """Likelihood-ratio surrogate with the noise-free rollout as baseline."""
        drawn = []

        def noise_fn(h):
            drawn.append(lane_noise(self.streams, self.env.act_dim))
            return drawn[-1]

        plain = self.policy.arrays()
        start = self.state
        buf = rollout(self.env, plain, start, H, noise_fn, reset_fn=self._reset_fn())
        base = rollout(self.env, plain, start, len(buf), lambda h: np.zeros_like(drawn[0]), reset_fn=self._reset_fn())
        adv = np.sum(buf.reward_values, axis=0) - np.sum(base.reward_values, axis=0)
        logp = 0.0
        for obs, w in zip(buf.obs, drawn):
            _, lp = policy_sample(params, obs, w)
            logp = ops.add(logp, lp)
        loss = ops.div(ops.sum(ops.mul(adv, logp)), -float(len(buf) * buf.lanes))
        return buf, loss

    # ---------------------------------------------------------------- evaluation

    def evaluate(self, steps=None):
        """Undiscounted return of one deterministic (mean-action) episode."""
        env = self.env
        steps = steps or env.cfg.H_max
        s = env.reset(None, 1)
        arrays = self.policy.arrays()
        total = 0.0
        for _ in range(steps):
            a, _ = policy_sample(arrays, env.observe(s), np.zeros((1, env.act_dim)))
            out = env.step(s, a)
            total += float(np.asarray(out.reward)[0])
            if bool(np.asarray(out.done)[0]):
                break
            s = out.next
        return total


def train_one(env, cfg):
    """Run one seed to its step budget. Divergence marks the result failed."""
    tr = Trainer(env, cfg)
    res = TrainResult(cfg.seed, policy=tr.policy, critic=tr.critic)
    t0 = time.perf_counter()
    try:
        while tr.env_steps < cfg.max_env_steps and (cfg.max_windows <= 0 or tr.iteration < cfg.max_windows):
            buf, rec = tr.window()
            rec["wall_time"] = time.perf_counter() - t0
            rec["seed"] = cfg.seed
            res.records.append(rec)
            res.windows.append(np.mean(np.stack(buf.stiffness), axis=1) if buf.stiffness else None)
        res.final_reward = tr.evaluate(cfg.eval_steps or None)
    except NumericalOverflow as exc:
        res.failed = True
        res.error = str(exc)
    res.policy, res.critic, res.horizon = tr.policy, tr.critic, tr.hs
    return res


def train(algo, env, config=None, seeds=(0,)):
    """Train ``algo`` once per seed; returns a list of :class:`TrainResult`."""
    if isinstance(config, TrainConfig):
        base = config.with_(algo=algo)
    else:
        overrides = dict(config or {})
        if algo == "BPTT":
            # one window spans the whole episode
            overrides.setdefault("H", env.cfg.H_max)
        base = algo_preset(algo, **overrides)
    return [train_one(env, base.with_(seed=int(s))) for s in seeds]
