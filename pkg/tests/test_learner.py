import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahaclab.autodiff import Tape, ops
from ahaclab.envs import ScriptedContactEnv
from ahaclab.envs.rollout import RolloutBuffer
from ahaclab.errors import ConfigError
from ahaclab.learner import (
    HorizonState,
    TDConfig,
    Trainer,
    ahac_lagrangian,
    algo_preset,
    constraint_penalty,
    critic_loss,
    n_step_return,
    shac_actor_objective,
    td_lambda_targets,
    train,
    train_critic_until_converged,
    train_one,
    update_multipliers_and_horizon,
)
from ahaclab.learner.horizon import round_half_up
from ahaclab.nn import AdamState, CriticPair

GRID = (0.0, 0.5, 0.9, 1.0)


# ---------------------------------------------------------------- TD(lambda)


def brute_force_lambda_return(r, nv, done, t, gamma, lam):
    """Lambda-weighted mix of n-step returns, truncated at the episode boundary."""
    H = len(r)
    end = next((i for i in range(t, H) if done[i]), H - 1)
    m = end - t + 1
    G = [sum(gamma**k * r[t + k] for k in range(n)) + gamma**n * nv[t + n - 1] for n in range(1, m + 1)]
    return (1 - lam) * sum(lam ** (n - 1) * G[n - 1] for n in range(1, m)) + lam ** (m - 1) * G[m - 1]


@pytest.mark.parametrize("gamma,lam", list(itertools.product(GRID, GRID)))
def test_td_lambda_matches_brute_force(gamma, lam):
    rng = np.random.default_rng(int(gamma * 10 + lam * 100))
    for _ in range(40):
        H = int(rng.integers(1, 6))
        B = 3
        r = rng.normal(size=(H, B))
        nv = rng.normal(size=(H, B))
        done = rng.uniform(size=(H, B)) < 0.3
        out = td_lambda_targets(r, nv, done, TDConfig(gamma, lam))
        for b in range(B):
            for t in range(H):
                ref = brute_force_lambda_return(r[:, b], nv[:, b], done[:, b], t, gamma, lam)
                assert abs(out[t, b] - ref) < 1e-10


def test_td_lambda_one_is_monte_carlo_with_bootstrap():
    r = np.array([[1.0], [2.0], [3.0]])
    nv = np.array([[10.0], [20.0], [30.0]])
    out = td_lambda_targets(r, nv, np.zeros((3, 1), bool), TDConfig(0.5, 1.0))
    assert out[0, 0] == 1 + 0.5 * 2 + 0.25 * 3 + 0.125 * 30


def test_td_lambda_zero_is_one_step():
    r = np.array([[1.0], [2.0]])
    nv = np.array([[5.0], [7.0]])
    out = td_lambda_targets(r, nv, np.zeros((2, 1), bool), TDConfig(0.9, 0.0))
    np.testing.assert_allclose(out[:, 0], [1 + 0.9 * 5, 2 + 0.9 * 7])


def test_n_step_return():
    r = [1.0, 1.0, 1.0]
    assert n_step_return(r, [0, 0, 8.0], 0, 3, 0.5) == 1 + 0.5 + 0.25 + 0.125 * 8


def test_td_config_validates():
    with pytest.raises(ValueError):
        TDConfig(gamma=1.5)
    with pytest.raises(ValueError):
        TDConfig(lam=-0.1)


# ---------------------------------------------------------------- critic


def test_critic_loss_sums_heads(rng):
    c = CriticPair.init(rng, 2, (4,))
    obs = rng.normal(size=(10, 2))
    y = rng.normal(size=10)
    from ahaclab.nn import critic_head_values, split_heads

    v1, v2 = critic_head_values(split_heads(c, c.arrays()), obs)
    assert critic_loss(c, obs, y) == pytest.approx(np.mean((v1 - y) ** 2 + (v2 - y) ** 2), rel=1e-12)


def test_critic_fit_converges_on_smooth_target(rng):
    c = CriticPair.init(rng, 2, (16,), double=False)
    obs = rng.normal(size=(256, 2))
    y = np.sin(obs[:, 0]) + 0.5 * obs[:, 1]
    before = float(critic_loss(c, obs, y))
    iters, losses = train_critic_until_converged(c, obs, y, AdamState(lr=1e-2), rng, tol=0.005, max_iters=200)
    assert iters < 200
    assert float(critic_loss(c, obs, y)) < 0.2 * before
    assert np.mean(np.abs(np.diff(losses[-6:]))) < 0.005


def test_critic_fixed_iterations(rng):
    c = CriticPair.init(rng, 2, (4,))
    iters, losses = train_critic_until_converged(c, rng.normal(size=(20, 2)), np.zeros(20), AdamState(lr=1e-3), rng, fixed_iters=16)
    assert iters == 16 == len(losses)


# ---------------------------------------------------------------- horizon


def test_round_half_up():
    assert [round_half_up(x) for x in (2.5, 3.5, 2.49, -0.5)] == [3, 4, 2, 0]


def test_multiplier_update_by_hand():
    hs = HorizonState(H_cont=4.0, H_min=2, H_max=8, C=10.0, alpha_phi=0.1, phi=np.array([0.0, 1.0, 0.5, 0.0]))
    k = np.array([5.0, 30.0, 10.0, 12.0])
    new = update_multipliers_and_horizon(hs, k)
    phi = np.maximum(0, hs.phi - 0.1 * (10.0 - k))
    np.testing.assert_allclose(phi, [0.0, 3.0, 0.5, 0.2])
    assert new.H_cont == pytest.approx(4.0 - 0.1 * 3.7)
    assert new.length == 4 and new.phi.size == 4


def test_phi_resized_with_horizon():
    hs = HorizonState(H_cont=8.0, H_min=2, H_max=16, C=0.0, alpha_phi=1.0, sign=1)
    new = update_multipliers_and_horizon(hs, np.ones(8))
    assert new.H_cont == 16.0 and new.phi.size == 16
    np.testing.assert_array_equal(new.phi[8:], 0.0)
    np.testing.assert_array_equal(new.phi[:8], 1.0)


def test_horizon_clamped():
    hs = HorizonState(H_cont=9.0, H_min=8, H_max=64, C=0.0, alpha_phi=1.0)
    new = update_multipliers_and_horizon(hs, np.full(9, 100.0))
    assert new.H_cont == 8.0


@settings(max_examples=60, deadline=None)
@given(st.floats(8, 64), st.floats(0, 1e-2), st.floats(1, 1e3))
def test_fixed_point_below_threshold(H, alpha, C):
    hs = HorizonState(H_cont=H, C=C, alpha_phi=alpha)
    k = np.random.default_rng(0).uniform(0, C, hs.length)
    new = update_multipliers_and_horizon(hs, k)
    assert new.H_cont == hs.H_cont and np.all(new.phi == 0)


def test_stiffness_length_must_match():
    hs = HorizonState(H_cont=10.0)
    with pytest.raises(ValueError):
        update_multipliers_and_horizon(hs, np.zeros(9))


def test_lagrangian_and_penalty():
    hs = HorizonState(H_cont=8.0, C=5.0, phi=np.array([0, 0, 0, 0, 0, 0, 1.0, 2.0]))
    k = np.array([0, 0, 0, 0, 0, 0, 7.0, 1.0])
    assert constraint_penalty(hs, k) == -2.0 + 8.0
    assert ahac_lagrangian(1.5, hs, k) == 7.5


def test_sign_validated():
    with pytest.raises(ValueError):
        HorizonState(sign=0)


# ---------------------------------------------------------------- actor objective


def test_shac_objective_by_hand():
    tape = Tape()
    r = [tape.variable(np.array([1.0, 1.0])) for _ in range(3)]
    buf = RolloutBuffer()
    buf.rewards = r
    buf.reward_values = [np.array([1.0, 1.0])] * 3
    # lane 0 times out after step 1 (bootstrap 4), lane 1 runs to the window end (bootstrap 10)
    buf.done = [np.array([False, False]), np.array([True, False]), np.array([False, False])]
    buf.bootstrap = [None, np.array([4.0, 0.0]), np.array([6.0, 10.0])]
    g = 0.5
    J = shac_actor_objective(buf, g)
    lane0 = (1 + g * 1 + g**2 * 4) + (1 + g * 6)
    lane1 = 1 + g + g**2 + g**3 * 10
    np.testing.assert_allclose(J.value, [lane0, lane1])
    grads = tape.gradient(ops.sum(J), r)
    np.testing.assert_allclose(grads[0], [1.0, 1.0])
    np.testing.assert_allclose(grads[2], [1.0, g**2])


# ---------------------------------------------------------------- trainer


def tiny(algo, **kw):
    base = dict(lanes=2, actor_hidden=(8,), critic_hidden=(8,), max_windows=6, max_env_steps=10**9, H=16, critic_max_iters=8)
    base.update(kw)
    return algo_preset(algo, **base)


def curve(res):
    # repr keeps NaN entries (no finished episode yet) comparable
    return [repr({k: v for k, v in r.items() if k != "wall_time"}) for r in res.records]


def test_unknown_algo_and_option():
    with pytest.raises(ConfigError):
        algo_preset("PPO")
    with pytest.raises(ConfigError):
        algo_preset("SHAC", horizon=3)


def test_training_is_deterministic():
    env = ScriptedContactEnv()
    a = train_one(env, tiny("AHAC"))
    b = train_one(env, tiny("AHAC"))
    assert curve(a) == curve(b)
    assert repr(a.final_reward) == repr(b.final_reward)


def test_env_steps_strictly_increase():
    res = train_one(ScriptedContactEnv(), tiny("AHAC1", lanes=1, H_max=20, C=500.0))
    steps = [r["env_steps"] for r in res.records]
    assert all(b > a for a, b in zip(steps, steps[1:]))


def test_ahac_with_zero_dual_rate_matches_shac():
    env = ScriptedContactEnv()
    shac = train_one(env, tiny("SHAC"))
    ahac = train_one(env, tiny("AHAC", alpha_phi=0.0, double_critic=False, iterative_critic=False))
    assert curve(shac) == curve(ahac)


def test_bptt_is_shac_without_critic():
    env = ScriptedContactEnv(stiff_from=None)
    H = env.cfg.H_max
    bptt = train("BPTT", env, dict(lanes=2, actor_hidden=(8,), max_windows=2, max_env_steps=10**9))[0]
    shac = train_one(env, algo_preset("SHAC", lanes=2, actor_hidden=(8,), max_windows=2, max_env_steps=10**9, H=H, zero_critic=True))
    assert bptt.records[0]["H"] == H
    assert curve(bptt) == curve(shac)


def test_ahac1_stops_at_stiff_step():
    env = ScriptedContactEnv(stiff_from=5)
    res = train_one(env, tiny("AHAC1", H_max=32, C=500.0))
    assert all(r["H"] == 5 for r in res.records)
    for k in res.windows:
        assert np.all(k[:-1] <= 500.0) and k[-1] > 500.0


def test_ahac1_contact_free_runs_full_windows():
    res = train_one(ScriptedContactEnv(stiff_from=None), tiny("AHAC1", H_max=24))
    assert all(r["H"] == 24 for r in res.records)
    assert res.records[-1]["truncation_count"] == 0


def test_zobg_reference_trains():
    res = train_one(ScriptedContactEnv(stiff_from=None), tiny("ZOBG_PG", max_windows=3))
    assert len(res.records) == 3 and np.isfinite(res.final_reward)


def test_overflow_marks_seed_failed():
    class Exploding(ScriptedContactEnv):
        def step(self, s, a):
            out = super().step(s, a)
            if self.offset == 3:
                out.reward = ops.mul(out.reward, np.inf)
            return out

    res = train_one(Exploding(stiff_from=None), tiny("SHAC"))
    assert res.failed and "non-finite" in res.error


def test_horizon_column_varies_for_ahac_not_shac():
    env = ScriptedContactEnv(stiff_from=4)
    shac = train_one(env, tiny("SHAC", max_windows=12))
    ahac = train_one(env, tiny("AHAC", max_windows=12, alpha_phi=5e-3))
    assert len({r["H"] for r in shac.records}) == 1
    assert len({r["H_cont"] for r in ahac.records}) > 1


def test_trainer_window_record_keys():
    tr = Trainer(ScriptedContactEnv(), tiny("AHAC"))
    _, rec = tr.window()
    assert set(rec) == {
        "iteration",
        "env_steps",
        "episode_reward",
        "H",
        "H_cont",
        "sum_phi",
        "objective",
        "critic_loss",
        "critic_iters",
        "truncation_count",
    }
