"""Empirical distribution helpers for campaign post-processing."""

from __future__ import annotations

import math

import numpy as np


def cdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF: sorted values paired with cumulative probabilities i/n."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("cdf of an empty sample is undefined")
    probs = np.arange(1, arr.size + 1) / arr.size
    return arr, probs


def percentile(values, q: float) -> float:
    """Nearest-rank percentile: the value at rank ceil(q/100 * n)."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("percentile of an empty sample is undefined")
    if not 0 <= q <= 100:
        raise ValueError("q must lie in [0, 100]")
    rank = max(1, math.ceil(q / 100.0 * arr.size))
    return float(arr[rank - 1])


def bootstrap_mean_ci(
    samples, n_boot: int = 2000, seed: int = 0, confidence: float = 0.95
) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for the mean of `samples`."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(n_boot, arr.size))
    means = arr[idx].mean(axis=1)
    lo = (1.0 - confidence) / 2.0
    return (
        float(np.quantile(means, lo)),
        float(np.quantile(means, 1.0 - lo)),
    )
