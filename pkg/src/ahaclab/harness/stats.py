"""Aggregate statistics over seeds."""

import math

import numpy as np

from ..errors import ArityError


def iqm(values, fraction=0.5):
    """Mean of the central ``fraction`` of the sorted values.

    The trimmed window has width ``fraction * n`` in rank space; samples cut
    by its edges count with the fraction of their unit cell that lies inside.
    """
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ArityError("iqm of an empty sequence")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    lo = (1.0 - fraction) / 2.0 * n
    hi = n - lo
    # sample i occupies [i, i+1) in rank space
    idx = np.arange(n)
    w = np.clip(np.minimum(idx + 1, hi) - np.maximum(idx, lo), 0.0, 1.0)
    return float(np.dot(w, x) / np.sum(w))


def bootstrap_ci(values, stat=iqm, level=0.95, resamples=2000, seed=0):
    """Percentile bootstrap interval of ``stat``; a fixed seed keeps it reproducible."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ArityError("bootstrap of an empty sequence")
    rng = np.random.Generator(np.random.Philox(seed))
    draws = np.array([stat(x[rng.integers(0, x.size, x.size)]) for _ in range(resamples)])
    a = (1.0 - level) / 2.0
    return float(np.quantile(draws, a)), float(np.quantile(draws, 1.0 - a))


def summarize(values):
    """IQM with its bootstrap interval; NaN entries (failed seeds) are skipped."""
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
    if x.size == 0:
        return {"iqm": float("nan"), "ci_low": float("nan"), "ci_high": float("nan"), "var": float("nan")}
    lo, hi = bootstrap_ci(x)
    return {"iqm": iqm(x), "ci_low": lo, "ci_high": hi, "var": float(np.var(x))}
