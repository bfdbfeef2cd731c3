"""Experiment configuration: one JSON document per run, strict keys."""

import json
import os
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError
from ..learner.trainer import TrainConfig

ENV_PREFIX = "AHACLAB_"
EXPERIMENTS = ("heaviside", "ball", "train", "ablate-horizon", "ablate-components")

# training options that belong to the experiment rather than the trainer
_TRAIN_OWNED = {"algo", "seed"}


@dataclass
class ExperimentConfig:
    experiment: str = "train"
    env: str = "hopper"
    algo: str = "SHAC"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out: str = "runs"
    workers: int = 1
    # heaviside study
    theta: float = 0.0
    nu: float = 0.1
    sigma: float = 0.1
    N_grid: list = field(default_factory=lambda: [10, 100, 1000, 10000])
    reps: int = 20
    # ball study
    ball_theta: float = 0.4
    ball_sigma: float = 0.1
    ball_N: int = 1024
    ball_H: int = 40
    ball_seeds: list = field(default_factory=lambda: list(range(10)))
    k_n: float = 2000.0
    k_d: float = 10.0
    mu: float = 0.5
    contact_nu: float = 0.1
    # training studies
    H_grid: list = field(default_factory=lambda: [8, 16, 32, 48])
    train: dict = field(default_factory=dict)
    env_params: dict = field(default_factory=dict)
    # AHACLAB_* variables that were applied, as given
    overrides_applied: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        allowed = {f.name for f in fields(TrainConfig)} - _TRAIN_OWNED
        bad = set(self.train) - allowed
        if bad:
            raise ConfigError(f"unknown training options: {sorted(bad)}")

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        if "," in text:
            return [_parse_value(t) for t in text.split(",")]
        return text


def from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    bad = set(data) - known
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def apply_env_overrides(data, environ=None):
    """Apply ``AHACLAB_<KEY>=VALUE`` variables; training keys go under ``train``.

    Returns the updated dict; each applied override is logged in
    ``overrides_applied`` so the echoed config shows where values came from.
    """
    environ = os.environ if environ is None else environ
    data = dict(data)
    data["train"] = dict(data.get("train", {}))
    log = dict(data.get("overrides_applied", {}))
    top = {f.name for f in fields(ExperimentConfig)} - {"train", "overrides_applied"}
    trainer = {f.name for f in fields(TrainConfig)} - _TRAIN_OWNED
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower()
        value = _parse_value(environ[name])
        if key in top:
            data[key] = value
        elif key in trainer:
            data["train"][key] = value
        else:
            raise ConfigError(f"unknown override {name}")
        log[key] = environ[name]
    data["overrides_applied"] = log
    return data


def load_config(path=None, overrides=None, environ=None):
    """File config, then environment overrides, then explicit (CLI) overrides."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    from_dict(data)  # reject unknown keys before merging anything else
    data = apply_env_overrides(data, environ)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return from_dict(data)
