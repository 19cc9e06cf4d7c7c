"""Classic estimation chain: raw harmonic-mean estimator, linear counting,
large-range correction, and the composite original method.

The raw estimator alpha_inf * m^2 / sum_k C_k 2^-k is only usable in a
middle band of cardinalities: it overestimates badly while most registers
are still zero and runs into hash-collision distortion near saturation.
The original composite method patches both ends, switching to linear
counting below (5/2)m and to a logarithmic correction above 2^32/30.  The
switchover constants are tied to 32 relevant hash bits, so the composite
is restricted to p + q = 32 here.

Uses the limit constant alpha_inf = 1/(2 ln 2) throughout; the small
finite-m bias of that choice is dwarfed by the estimation error itself.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    OutOfDomainError,
    RangeError,
    UnsupportedConfigError,
    ZeroRegistersExhaustedError,
)
from .sketch import RegisterHistogram, SketchConfig

ALPHA_INF = 1.0 / (2.0 * math.log(2.0))


def raw_estimate(h: RegisterHistogram, config: SketchConfig) -> float:
    """Harmonic-mean estimate alpha_inf * m^2 / sum_{k=0}^{q+1} C_k 2^-k."""
    h.check(config)
    m = config.m
    weights = np.exp2(-np.arange(config.q + 2, dtype=float))
    denom = float(h.counts @ weights)
    return ALPHA_INF * m * m / denom


def linear_counting_estimate(c0: int, m: int) -> float:
    """Occupancy-based estimate m * ln(m / C0) from the zero-register count."""
    if c0 == 0:
        raise ZeroRegistersExhaustedError("no zero registers left; linear counting undefined")
    if not 1 <= c0 <= m:
        raise RangeError(f"c0={c0} outside 1..{m}")
    return m * math.log(m / c0)


def large_range_correction(raw: float, bits: int) -> float:
    """Collision correction -2^bits * ln(1 - raw / 2^bits) near hash-space saturation."""
    space = 2.0**bits
    if raw < 0:
        raise OutOfDomainError(f"raw estimate {raw} is negative")
    if raw >= space:
        raise OutOfDomainError(
            f"raw estimate {raw} is at or beyond the 2^{bits} hash space; correction undefined"
        )
    return -space * math.log1p(-raw / space)


def original_estimate(h: RegisterHistogram, config: SketchConfig) -> float:
    """Composite estimator with the empirical switchovers (requires p + q = 32).

    Low range (raw <= 2.5m with zero registers left): linear counting.
    High range (raw > 2^32/30): large-range correction.  Otherwise: raw.
    """
    if config.p + config.q != 32:
        raise UnsupportedConfigError(
            f"composite switchover constants assume p+q=32, got {config.p + config.q}"
        )
    raw = raw_estimate(h, config)
    if raw <= 2.5 * config.m and h.c0 > 0:
        return linear_counting_estimate(h.c0, config.m)
    if raw > 2.0**32 / 30.0:
        return large_range_correction(raw, 32)
    return raw
