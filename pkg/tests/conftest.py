"""Shared helpers for the test suite."""

import numpy as np

from hllkit.sketch import RegisterHistogram, SketchConfig


def register_value_probs(config: SketchConfig, lam: float) -> np.ndarray:
    """Per-register value distribution under the independent-rate model."""
    m, q = config.m, config.q
    probs = np.empty(q + 2)
    cdf_prev = np.exp(-lam / m)
    probs[0] = cdf_prev
    for k in range(1, q + 1):
        cdf = np.exp(-lam / (m * 2.0**k))
        probs[k] = cdf - cdf_prev
        cdf_prev = cdf
    probs[q + 1] = 1.0 - cdf_prev
    return probs


def random_histogram(rng: np.random.Generator, config: SketchConfig, lam: float):
    """Random histogram with register values drawn from the rate-lam model."""
    counts = rng.multinomial(config.m, register_value_probs(config, lam))
    return RegisterHistogram(counts)
