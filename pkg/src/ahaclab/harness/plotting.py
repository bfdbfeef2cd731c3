"""Deterministic SVG line charts."""

from dataclasses import dataclass

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SVG_SALT = "ahaclab"


@dataclass
class Series:
    label: str
    x: object
    y: object


def emit_svg_chart(series, path, xlabel="x", ylabel="y", logx=False, title=None):
    """Write a line chart of ``series`` to ``path`` as a standalone SVG.

    Each series becomes one path element with id ``series-<i>``. Output bytes
    depend only on the inputs: the SVG id salt is fixed and no date is stored.
    """
    series = list(series)
    if not series:
        raise ValueError("at least one series is required")
    rc = {"svg.hashsalt": SVG_SALT, "svg.fonttype": "none", "figure.figsize": (6.0, 4.0)}
    with matplotlib.rc_context(rc):
        fig, ax = plt.subplots()
        try:
            for i, s in enumerate(series):
                ax.plot(np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float), label=s.label, gid=f"series-{i}")
            if logx:
                ax.set_xscale("log")
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if title:
                ax.set_title(title)
            if len(series) > 1 or series[0].label:
                ax.legend()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path


def series_from_rows(rows, x, y, group=None, reduce=np.median):
    """Group parsed CSV rows into series; repeated x values are reduced."""
    groups = {}
    for r in rows:
        groups.setdefault(r[group] if group else "", []).append(r)
    out = []
    for label in sorted(groups):
        pts = {}
        for r in groups[label]:
            pts.setdefault(float(r[x]), []).append(float(r[y]))
        xs = sorted(pts)
        out.append(Series(label, xs, [float(reduce(pts[v])) for v in xs]))
    return out
