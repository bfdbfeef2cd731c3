"""Command-line entry point: ``ahaclab <subcommand> [flags]``."""

import argparse
import os
import sys

from ..errors import ConfigError
from .config import load_config
from .plotting import emit_svg_chart, series_from_rows
from .studies import STUDIES, SUMMARY_COLUMNS, read_csv, summarize_dir, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3

# default chart for each study CSV: (x, y, group, logx)
CHARTS = {
    "heaviside.csv": ("N", "abs_error", "method", True),
    "ball.csv": ("h", "B", None, False),
    "horizon_ablation.csv": ("H", "iqm", None, False),
}


def _seed_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc


STUDY_HELP = {
    "heaviside": "FOBG vs ZOBG error on the one-step soft-Heaviside problem",
    "ball": "sample error and ESNR per horizon on the ball-vs-wall task",
    "train": "train one algorithm over the configured seeds",
    "ablate-horizon": "SHAC final reward over a grid of fixed horizons",
    "ablate-components": "AHAC with its components switched on one at a time",
}


def build_parser():
    p = argparse.ArgumentParser(prog="ahaclab", description="Gradient-estimator studies and contact-aware actor-critic training.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in STUDIES:
        s = sub.add_parser(name, help=STUDY_HELP[name])
        s.add_argument("--config")
        s.add_argument("--seed", type=int)
        s.add_argument("--seeds", type=_seed_list)
        s.add_argument("--out")
        s.add_argument("--algo")
        s.add_argument("--env")
        s.add_argument("--workers", type=int)
        s.add_argument("--no-plot", action="store_true", help="skip the SVG next to the CSV")
    s = sub.add_parser("plot", help="render a study CSV as SVG")
    s.add_argument("csv")
    s.add_argument("--out")
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--group")
    s.add_argument("--logx", action="store_true")
    s = sub.add_parser("summarize", help="recompute a training summary from its per-seed CSVs")
    s.add_argument("--out", required=True)
    return p


def plot_csv(path, out=None, x=None, y=None, group=None, logx=None):
    dx, dy, dg, dlog = CHARTS.get(os.path.basename(path), (None, None, None, False))
    rows = read_csv(path)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    cols = list(rows[0])
    x, y = x or dx or cols[0], y or dy or cols[1]
    group = group if group is not None else dg
    for c in (x, y) + ((group,) if group else ()):
        if c not in cols:
            raise ConfigError(f"{path}: no column {c!r}")
    out = out or os.path.splitext(path)[0] + ".svg"
    emit_svg_chart(series_from_rows(rows, x, y, group), out, xlabel=x, ylabel=y, logx=bool(logx or dlog))
    return out


def _run_study(args):
    overrides = {"experiment": args.command, "out": args.out, "algo": args.algo, "env": args.env, "workers": args.workers}
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    elif args.seed is not None:
        overrides["seeds"] = [args.seed]
    cfg = load_config(args.config, overrides)
    sys.stdout.write(cfg.dumps())
    result = STUDIES[cfg.experiment](cfg)
    if not args.no_plot:
        for name in CHARTS:
            path = os.path.join(cfg.out, name)
            if os.path.exists(path):
                plot_csv(path)
    if cfg.experiment == "train" and result and all(f["failed"] for f in result):
        print("all seeds aborted on numerical overflow", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            print(plot_csv(args.csv, args.out, args.x, args.y, args.group, args.logx))
            return EXIT_OK
        if args.command == "summarize":
            row = summarize_dir(args.out)
            write_csv(os.path.join(args.out, "summary.csv"), SUMMARY_COLUMNS, [row])
            print(",".join(SUMMARY_COLUMNS))
            print(",".join(str(row[k]) for k in SUMMARY_COLUMNS))
            return EXIT_ABORT if row["status"] == "aborted" else EXIT_OK
        return _run_study(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
