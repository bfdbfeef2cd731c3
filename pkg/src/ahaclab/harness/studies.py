"""Experiment drivers. Each writes CSVs (and the resolved config) into ``out``."""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..autodiff import ops
from ..envs import BallEnv, BallGeometry, ContactParams, make_env
from ..envs.base import EnvConfig
from ..estimators import GaussianActionProblem, fobg, heaviside_problem, heaviside_true_grad, sample_error, zobg
from ..learner.trainer import algo_preset, train_one
from .stats import summarize

CURVE_COLUMNS = (
    "iteration",
    "env_steps",
    "episode_reward",
    "horizon",
    "H_cont",
    "sum_phi",
    "objective",
    "critic_loss",
    "critic_iters",
    "truncation_count",
    "seed",
)
FINAL_COLUMNS = ("seed", "final_reward", "failed", "windows", "env_steps", "horizon_mean", "horizon_var", "final_H_cont")
SUMMARY_COLUMNS = ("label", "seeds", "failed", "status", "iqm", "ci_low", "ci_high", "var")


# ---------------------------------------------------------------- csv io


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r[k]) for k in header] if isinstance(r, dict) else [fmt(v) for v in r])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _prepare(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.json"), "w") as fh:
        fh.write(cfg.dumps())


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


# ---------------------------------------------------------------- heaviside


def heaviside_rows(theta, nu, sigma, N_grid, reps, seed=0):
    """Absolute estimator errors against the quadrature gradient.

    Each repetition draws one noise vector of the largest N; smaller N use
    its leading rows, and both methods share it.
    """
    truth = heaviside_true_grad(theta, nu, sigma)
    problem = heaviside_problem(nu, sigma)
    n_max = max(N_grid)
    rows = []
    for rep in range(reps):
        noise = _rng(seed, 101, rep).standard_normal((n_max, 1))
        for N in N_grid:
            w = noise[:N]
            for name, est in (("FOBG", fobg), ("ZOBG", zobg)):
                g = est(problem, theta, noise=w).mean_grad[0]
                rows.append({"method": name, "N": N, "rep": rep, "abs_error": abs(float(g) - truth)})
    order = {"FOBG": 0, "ZOBG": 1}
    rows.sort(key=lambda r: (order[r["method"]], r["N"], r["rep"]))
    return rows


def run_heaviside_study(cfg):
    _prepare(cfg)
    rows = heaviside_rows(cfg.theta, cfg.nu, cfg.sigma, list(cfg.N_grid), cfg.reps, cfg.seeds[0])
    path = write_csv(os.path.join(cfg.out, "heaviside.csv"), ("method", "N", "rep", "abs_error"), rows)
    stats = []
    for method in ("FOBG", "ZOBG"):
        for N in cfg.N_grid:
            e = np.array([r["abs_error"] for r in rows if r["method"] == method and r["N"] == N])
            q1, med, q3 = np.quantile(e, [0.25, 0.5, 0.75])
            stats.append({"method": method, "N": N, "mean": e.mean(), "q25": q1, "median": med, "q75": q3})
    write_csv(os.path.join(cfg.out, "heaviside_stats.csv"), ("method", "N", "mean", "q25", "median", "q75"), stats)
    return path


# ---------------------------------------------------------------- ball


def ball_rows_for_seed(env, theta, sigma, N, H, seed):
    """Per-horizon sample error and ESNR for one seed, common noise throughout."""
    noise = _rng(seed, 202).standard_normal((N, 1))
    angles = theta + sigma * noise[:, 0]
    _, contact, _ = env.trajectory(angles, H)
    touched = np.cumsum(contact, axis=0) > 0
    rows = []
    for h in range(1, H + 1):
        problem = GaussianActionProblem(lambda a, h=h: env.final_return(ops.getitem(a, (Ellipsis, 0)), h), sigma)
        f = fobg(problem, theta, noise=noise)
        z = zobg(problem, theta, noise=noise)
        rows.append([h, sample_error(f, z), f.esnr, z.esnr, float(touched[h - 1].mean())])
    return np.array(rows)


def ball_env_from(cfg):
    cp = ContactParams(k_n=cfg.k_n, k_d=cfg.k_d, mu=cfg.mu, nu=cfg.contact_nu)
    return BallEnv(cp=cp, geom=BallGeometry())


def ball_rows(cfg):
    env = ball_env_from(cfg)
    per_seed = np.stack([ball_rows_for_seed(env, cfg.ball_theta, cfg.ball_sigma, cfg.ball_N, cfg.ball_H, s) for s in cfg.ball_seeds])
    med = np.median(per_seed, axis=0)
    cols = ("h", "B", "esnr_fobg", "esnr_zobg", "contact_fraction")
    rows = [dict(zip(cols, r)) for r in med]
    for r in rows:
        r["h"] = int(r["h"])
    return rows


def run_ball_study(cfg):
    _prepare(cfg)
    rows = ball_rows(cfg)
    return write_csv(os.path.join(cfg.out, "ball.csv"), ("h", "B", "esnr_fobg", "esnr_zobg", "contact_fraction"), rows)


def ball_contrast(rows):
    """Pre/post-contact means of B and medians of ESNR from ball-study rows."""
    pre = [r for r in rows if float(r["contact_fraction"]) == 0.0]
    post = [r for r in rows if float(r["contact_fraction"]) == 1.0]

    def col(rs, k, f):
        return float(f([float(r[k]) for r in rs])) if rs else float("nan")

    return {
        "B_pre": col(pre, "B", np.mean),
        "B_post": col(post, "B", np.mean),
        "esnr_fobg_pre": col(pre, "esnr_fobg", np.median),
        "esnr_zobg_pre": col(pre, "esnr_zobg", np.median),
        "esnr_fobg_post": col(post, "esnr_fobg", np.median),
    }


# ---------------------------------------------------------------- training


def build_env(name, env_params=None):
    """Environment by id; ``env_params`` keys matching EnvConfig fields go to its config."""
    params = dict(env_params or {})
    base = make_env(name)
    cfg_keys = {k: params.pop(k) for k in list(params) if k in EnvConfig.__dataclass_fields__}
    if not params and not cfg_keys:
        return base
    if cfg_keys:
        params["cfg"] = base.cfg.with_(**cfg_keys)
    return make_env(name, **params)


def train_config(cfg, algo=None, **extra):
    algo = algo or cfg.algo
    overrides = {**cfg.train, **extra}
    tc = algo_preset(algo, **overrides)
    if algo == "BPTT" and "H" not in overrides:
        tc = tc.with_(H=build_env(cfg.env, cfg.env_params).cfg.H_max)
    return tc


def _train_job(job):
    env_name, env_params, tc = job
    res = train_one(build_env(env_name, env_params), tc)
    curve = [
        {
            "iteration": r["iteration"],
            "env_steps": r["env_steps"],
            "episode_reward": r["episode_reward"],
            "horizon": r["H"],
            "H_cont": r["H_cont"],
            "sum_phi": r["sum_phi"],
            "objective": r["objective"],
            "critic_loss": r["critic_loss"],
            "critic_iters": r["critic_iters"],
            "truncation_count": r["truncation_count"],
            "seed": r["seed"],
        }
        for r in res.records
    ]
    timing = [{"iteration": r["iteration"], "wall_time_s": r["wall_time"]} for r in res.records]
    Hs = np.array([r["H"] for r in res.records], dtype=float)
    final = {
        "seed": tc.seed,
        "final_reward": float("nan") if res.failed else res.final_reward,
        "failed": res.failed,
        "windows": len(res.records),
        "env_steps": res.records[-1]["env_steps"] if res.records else 0,
        "horizon_mean": float(Hs.mean()) if Hs.size else float("nan"),
        "horizon_var": float(Hs.var()) if Hs.size else float("nan"),
        "final_H_cont": float(res.horizon.H_cont),
    }
    return curve, timing, final, res.error


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def train_seeds(cfg, tc, out, workers=None):
    """Train ``tc`` on every seed, writing per-seed curves, timings and finals."""
    os.makedirs(out, exist_ok=True)
    jobs = [(cfg.env, cfg.env_params, tc.with_(seed=int(s))) for s in cfg.seeds]
    results = _map(_train_job, jobs, workers or cfg.workers)
    finals = []
    for (curve, timing, final, err), job in zip(results, jobs):
        seed = job[2].seed
        write_csv(os.path.join(out, f"curve_seed{seed}.csv"), CURVE_COLUMNS, curve)
        write_csv(os.path.join(out, f"timing_seed{seed}.csv"), ("iteration", "wall_time_s"), timing)
        finals.append(final)
    write_csv(os.path.join(out, "finals.csv"), FINAL_COLUMNS, finals)
    return finals


def summary_row(label, finals):
    values = [float(f["final_reward"]) for f in finals]
    failed = sum(int(f["failed"]) for f in finals)
    s = summarize(values)
    status = "ok" if failed == 0 else ("aborted" if failed == len(finals) else "partial")
    return {"label": label, "seeds": len(finals), "failed": failed, "status": status, **s}


def run_training(cfg):
    _prepare(cfg)
    tc = train_config(cfg)
    finals = train_seeds(cfg, tc, cfg.out)
    row = summary_row(tc.algo, finals)
    write_csv(os.path.join(cfg.out, "summary.csv"), SUMMARY_COLUMNS, [row])
    return finals


def summarize_dir(out):
    """Recompute the summary row of a training output directory from its CSVs."""
    finals = read_csv(os.path.join(out, "finals.csv"))
    label = read_csv(os.path.join(out, "summary.csv"))[0]["label"] if os.path.exists(os.path.join(out, "summary.csv")) else "run"
    return summary_row(label, finals)


# ---------------------------------------------------------------- ablations


def run_horizon_ablation(cfg):
    _prepare(cfg)
    rows = []
    for H in cfg.H_grid:
        tc = train_config(cfg, "SHAC", H=int(H))
        finals = train_seeds(cfg, tc, os.path.join(cfg.out, f"H{int(H)}"))
        row = summary_row(f"H={int(H)}", finals)
        rows.append({"H": int(H), **row})
    write_csv(os.path.join(cfg.out, "horizon_ablation.csv"), ("H",) + SUMMARY_COLUMNS, rows)
    return rows


# name -> (algo, overrides); "H" of the converged variant is filled in at run time
COMPONENT_VARIANTS = (
    ("shac_h32", "SHAC", {"H": 32}),
    ("shac_converged_h", "SHAC", {}),
    ("adaptive_objective", "SHAC", {"H": 32, "adaptive_objective": True}),
    ("adaptive_horizon", "SHAC", {"H": 32, "adaptive_objective": True, "adaptive_horizon": True}),
    ("iterative_critic", "SHAC", {"H": 32, "iterative_critic": True}),
    ("double_critic", "SHAC", {"H": 32, "double_critic": True}),
    ("ahac", "AHAC", {"H": 32}),
)


def component_configs(cfg, converged_H=32):
    out = []
    for name, algo, kw in COMPONENT_VARIANTS:
        kw = dict(kw)
        if name == "shac_converged_h":
            kw["H"] = int(converged_H)
        out.append((name, train_config(cfg, algo, **kw)))
    return out


def config_diff(a, b):
    """Fields whose values differ between two TrainConfigs (``algo`` and ``seed`` ignored)."""
    da, db = a.to_dict(), b.to_dict()
    return {k for k in da if k not in ("algo", "seed") and da[k] != db[k]}


def run_component_ablation(cfg):
    _prepare(cfg)
    variants = dict(component_configs(cfg))
    # full AHAC first: its converged horizon parameterizes the second variant
    ahac_finals = train_seeds(cfg, variants["ahac"], os.path.join(cfg.out, "ahac"))
    conv = [f["final_H_cont"] for f in ahac_finals if not f["failed"]]
    converged_H = int(math.floor(float(np.median(conv)) + 0.5)) if conv else 32
    rows = []
    for name, tc in component_configs(cfg, converged_H):
        finals = ahac_finals if name == "ahac" else train_seeds(cfg, tc, os.path.join(cfg.out, name))
        rows.append({"variant": name, "H": tc.H, **summary_row(name, finals)})
    write_csv(os.path.join(cfg.out, "component_ablation.csv"), ("variant", "H") + SUMMARY_COLUMNS, rows)
    return rows


STUDIES = {
    "heaviside": run_heaviside_study,
    "ball": run_ball_study,
    "train": run_training,
    "ablate-horizon": run_horizon_ablation,
    "ablate-components": run_component_ablation,
}
