"""Maximum-likelihood cardinality estimation from the register histogram.

Under the small-rate approximation, the registers are independent and the
log-likelihood of rate lambda given histogram C is

    sum_{k=1}^{q+1} C_k ln(1 - exp(-lambda/(m 2^min(k,q))))
        - (lambda/m) sum_{k=0}^{q} C_k 2^-k.

Its stationary condition reduces to the root of a monotone decreasing
convex function f with f(0) = m - C0, so the maximum is unique and can be
bracketed in closed form.  The bracket bounds differ by at most 3/2, and a
secant iteration started at zero and the lower bound walks up to the root
without overshooting.  Iteration stops once the relative increment
|l_{t+1} - l_t| / l_{t+1} falls below delta = epsilon/sqrt(m); a Newton
step variant is kept privately for cross-validation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateHistogramError,
    DomainError,
    NoConvergenceError,
    RangeError,
)
from .sketch import RegisterHistogram, SketchConfig


@dataclass(frozen=True)
class SolverConfig:
    """Stop constant epsilon (threshold delta = epsilon/sqrt(m)) and iteration cap."""

    epsilon: float = 1e-2
    max_iterations: int = 64

    def __post_init__(self):
        if self.epsilon <= 0:
            raise RangeError(f"epsilon={self.epsilon} must be positive")
        if self.max_iterations < 1:
            raise RangeError("max_iterations must be >= 1")

    def delta(self, m: int) -> float:
        return self.epsilon / math.sqrt(m)


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise RangeError(f"invalid bracket [{self.lower}, {self.upper}]")


def _u_over_expm1(u):
    """u / (e^u - 1) elementwise, stable at both ends of the range."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-4
    out = np.empty_like(u)
    # series 1 - u/2 + u^2/12 has error O(u^4/720)
    us = u[small]
    out[small] = 1.0 - us / 2.0 + us * us / 12.0
    with np.errstate(over="ignore"):
        ub = u[~small]
        eb = np.expm1(ub)
        out[~small] = np.where(np.isfinite(eb), ub / np.where(eb > 0, eb, 1.0), 0.0)
    return out


def _u_over_expm1_deriv(u):
    """d/du of u/(e^u - 1), used only by the Newton cross-check."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 1e-4
    us = u[small]
    out[small] = -0.5 + us / 6.0
    mid = ~small & (u <= 50.0)
    um = u[mid]
    em = np.expm1(um)
    out[mid] = (em - um * (em + 1.0)) / (em * em)
    big = u > 50.0
    out[big] = (1.0 - u[big]) * np.exp(-u[big])
    return out


def _weights(h: RegisterHistogram, config: SketchConfig):
    """Per-histogram constants: nonzero value levels, their rate scales, linear weight."""
    q = config.q
    m = config.m
    counts = h.counts
    ks = np.nonzero(counts[1:])[0] + 1  # value levels 1..q+1 with C_k > 0
    c = counts[ks].astype(float)
    scale = np.exp2(-np.minimum(ks, q).astype(float)) / m  # 1/(m 2^min(k,q))
    # linear term weight: sum_{k=0}^q C_k 2^-k
    w = float(counts[: q + 1] @ np.exp2(-np.arange(q + 1, dtype=float)))
    return ks, c, scale, w


def log_likelihood(lam: float, h: RegisterHistogram, config: SketchConfig) -> float:
    """Poisson-model log-likelihood of rate lam for this histogram."""
    if lam <= 0:
        raise DomainError(f"rate {lam} must be positive")
    h.check(config)
    _, c, scale, w = _weights(h, config)
    u = lam * scale
    with np.errstate(divide="ignore"):
        logs = np.log(-np.expm1(-u))
    return float(c @ logs - lam * w / config.m)


def ml_root_function(lam: float, h: RegisterHistogram, config: SketchConfig) -> float:
    """Monotone decreasing f whose unique root is the ML estimate; f(0) = m - C0."""
    if lam < 0:
        raise DomainError(f"rate {lam} must be non-negative")
    h.check(config)
    if lam == 0:
        return float(config.m - h.c0)
    _, c, scale, w = _weights(h, config)
    return float(c @ _u_over_expm1(lam * scale) - lam * w / config.m)


def _root_derivative(lam: float, h: RegisterHistogram, config: SketchConfig) -> float:
    _, c, scale, w = _weights(h, config)
    return float(c @ (scale * _u_over_expm1_deriv(lam * scale)) - w / config.m)


def ml_bracket(h: RegisterHistogram, config: SketchConfig) -> Bracket:
    """Closed-form bounds enclosing the ML rate (ratio at most 3/2 apart)."""
    h.check(config)
    m, q = config.m, config.q
    counts = h.counts
    c0 = h.c0
    if c0 == m:
        raise DegenerateHistogramError("zero")
    if h.saturated == m:
        raise DegenerateHistogramError("saturated")
    mid = float(counts[1 : q + 1] @ np.exp2(-np.arange(1, q + 1, dtype=float)))
    sat_w = float(counts[q + 1]) * 2.0 ** -(q + 1)
    lower = m * (m - c0) / (c0 + 1.5 * mid + sat_w)
    upper = m * (m - c0) / (c0 + mid)
    return Bracket(float(lower), float(upper))


def _secant_solve(f, x1, f0_at_zero, delta, max_iterations):
    """Secant from (0, f(0)) and the lower bound; returns (root, iterates)."""
    x0, f0 = 0.0, f0_at_zero
    f1 = f(x1)
    iterates = [x1]
    for _ in range(max_iterations):
        if f1 == 0.0 or f1 == f0:
            return x1, iterates
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if x2 <= x1:  # step stalled at float resolution
            return x1, iterates
        iterates.append(x2)
        if x2 - x1 < delta * x2:
            return x2, iterates
        x0, f0 = x1, f1
        x1 = x2
        f1 = f(x1)
    raise NoConvergenceError(
        f"secant did not meet the stop rule in {max_iterations} iterations"
    )


def _newton_solve(f, fprime, x1, delta, max_iterations):
    """Newton from the lower bound; test-only cross-check for the secant path."""
    x = x1
    for _ in range(max_iterations):
        fx = f(x)
        if fx == 0.0:
            return x
        d = fprime(x)
        if d >= 0:
            return x
        x_new = x - fx / d
        if x_new <= x:
            return x
        if x_new - x < delta * x_new:
            return x_new
        x = x_new
    raise NoConvergenceError(
        f"newton did not meet the stop rule in {max_iterations} iterations"
    )


def ml_estimate(
    h: RegisterHistogram,
    config: SketchConfig,
    solver: SolverConfig | None = None,
    _method: str = "secant",
) -> float:
    """ML cardinality estimate: 0 for all-zero, +inf for all-saturated registers."""
    h.check(config)
    solver = solver or SolverConfig()
    m = config.m
    if h.c0 == m:
        return 0.0
    if h.saturated == m:
        return math.inf
    bracket = ml_bracket(h, config)
    delta = solver.delta(m)
    _, c, scale, w = _weights(h, config)
    lin = w / m

    def f(lam):
        return float(c @ _u_over_expm1(lam * scale) - lam * lin)

    if _method == "newton":
        def fp(lam):
            return float(c @ (scale * _u_over_expm1_deriv(lam * scale)) - lin)

        return _newton_solve(f, fp, bracket.lower, delta, solver.max_iterations)
    root, _ = _secant_solve(
        f, bracket.lower, float(m - h.c0), delta, solver.max_iterations
    )
    return root
