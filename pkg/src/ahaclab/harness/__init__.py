"""Configuration, experiment drivers, statistics and chart output."""

from .config import ExperimentConfig, load_config
from .plotting import Series, emit_svg_chart
from .stats import bootstrap_ci, iqm, summarize
from .studies import (
    run_ball_study,
    run_component_ablation,
    run_heaviside_study,
    run_horizon_ablation,
    run_training,
    summarize_dir,
)

__all__ = [
    "ExperimentConfig",
    "Series",
    "bootstrap_ci",
    "emit_svg_chart",
    "iqm",
    "load_config",
    "run_ball_study",
    "run_component_ablation",
    "run_heaviside_study",
    "run_horizon_ablation",
    "run_training",
    "summarize",
    "summarize_dir",
]
