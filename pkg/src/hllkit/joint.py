"""Two-sketch estimation of set overlap from paired registers.

Registers of two mergeable sketches are compared position by position and
reduced to five count arrays (partner-smaller / partner-larger counts for
each sketch plus equal counts).  These are a sufficient statistic for the
three rates (a, b, x) = (|S1 \\ S2|, |S2 \\ S1|, |S1 ∩ S2|) under the
independent-rate register model, because a register pair shares its
intersection component: position i holds K1 = max(Ka, Kx) and
K2 = max(Kb, Kx) with latent values driven by the three rates.

Estimators provided:

* inclusion-exclusion over three single-sketch estimates (fast baseline,
  can go negative for small intersections), and
* joint maximum likelihood, maximizing the exact joint log-likelihood over
  log-rates with a self-contained BFGS quasi-Newton iteration.

The equal-value cell probability factorizes as z(S) * D with
D = (1 - X) + X(1-A)(1-B) where A, B, X are the per-rate register CDF
factors; that grouping is a sum of non-negative terms and is used
throughout to avoid cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classic import ALPHA_INF
from .errors import (
    ConfigMismatchError,
    DegenerateHistogramError,
    DomainError,
    NoConvergenceError,
)
from .improved import improved_estimate
from .ml import SolverConfig
from .sketch import Sketch, SketchConfig

JOINT_MAX_ITERATIONS = 500
FREEZE_RATE = 1e-6  # a rate this small with persistently negative gradient is zero
FREEZE_RUN = 5


@dataclass(frozen=True)
class JointStatistic:
    """Five histograms over paired registers, each indexed by value 0..q+1.

    ``c1_less[k]``: sketch-1 registers equal to k and smaller than their partner;
    ``c1_greater[k]``: equal to k and larger; ``c2_less``/``c2_greater`` the same for
    sketch 2; ``c_equal[k]``: register pairs equal at value k.
    """

    c1_less: np.ndarray
    c1_greater: np.ndarray
    c2_less: np.ndarray
    c2_greater: np.ndarray
    c_equal: np.ndarray

    def total_pairs(self) -> int:
        return int(self.c_equal.sum() + self.c1_less.sum() + self.c1_greater.sum())


@dataclass(frozen=True)
class JointEstimate:
    """Estimated exclusive cardinalities ``a``, ``b`` and intersection ``x``.

    Joint-ML results are always non-negative (the optimizer works on
    log-rates); inclusion-exclusion results may carry negative components,
    reported unclamped and flagged by ``has_negative``.
    """

    a: float
    b: float
    x: float

    @property
    def union(self) -> float:
        return self.a + self.b + self.x

    @property
    def has_negative(self) -> bool:
        return self.a < 0 or self.b < 0 or self.x < 0


def joint_statistic(s1: Sketch, s2: Sketch) -> JointStatistic:
    """One pass over register pairs, binned by value and order relation."""
    if s1.config != s2.config:
        raise ConfigMismatchError(f"cannot pair {s1.config} with {s2.config}")
    bins = s1.config.q + 2
    r1, r2 = s1.registers, s2.registers
    less = r1 < r2
    greater = r1 > r2
    equal = ~less & ~greater
    return JointStatistic(
        c1_less=np.bincount(r1[less], minlength=bins).astype(np.int64),
        c1_greater=np.bincount(r1[greater], minlength=bins).astype(np.int64),
        c2_less=np.bincount(r2[greater], minlength=bins).astype(np.int64),
        c2_greater=np.bincount(r2[less], minlength=bins).astype(np.int64),
        c_equal=np.bincount(r1[equal], minlength=bins).astype(np.int64),
    )


def inclusion_exclusion_estimate(
    s1: Sketch, s2: Sketch, estimator=None
) -> JointEstimate:
    """Overlap from three single-sketch estimates; components may be negative.

    ``estimator(histogram, config) -> float`` defaults to the bias-corrected
    single-sketch estimator.
    """
    if s1.config != s2.config:
        raise ConfigMismatchError(f"cannot pair {s1.config} with {s2.config}")
    est = estimator or improved_estimate
    config = s1.config
    n1 = est(s1.histogram(), config)
    n2 = est(s2.histogram(), config)
    nu = est(s1.merge(s2).histogram(), config)
    return JointEstimate(a=nu - n2, b=nu - n1, x=n1 + n2 - nu)


class _JointTerms:
    """Precomputed arrays for fast likelihood/gradient evaluation."""

    __slots__ = (
        "m", "lt1_c", "lt1_s", "lt2_c", "lt2_s", "gt1_c", "gt1_s",
        "gt2_c", "gt2_s", "eq_c", "eq_s", "w",
    )

    def __init__(self, stat: JointStatistic, config: SketchConfig):
        m, q = config.m, config.q
        self.m = m

        def pick(counts, upto_q_only):
            hi = q + 1 if upto_q_only else q + 2
            ks = np.nonzero(counts[1:hi])[0] + 1
            scale = np.exp2(-np.minimum(ks, q).astype(float)) / m
            return counts[ks].astype(float), scale

        # strictly-smaller registers can only hold values 1..q
        self.lt1_c, self.lt1_s = pick(stat.c1_less, True)
        self.lt2_c, self.lt2_s = pick(stat.c2_less, True)
        self.gt1_c, self.gt1_s = pick(stat.c1_greater, False)
        self.gt2_c, self.gt2_s = pick(stat.c2_greater, False)
        self.eq_c, self.eq_s = pick(stat.c_equal, False)
        # linear weights (1/m) sum_{k<=q} counts_k 2^-k per rate
        pow2 = np.exp2(-np.arange(q + 1, dtype=float))
        wa = float((stat.c1_less + stat.c_equal + stat.c1_greater)[: q + 1] @ pow2) / m
        wb = float((stat.c2_less + stat.c_equal + stat.c2_greater)[: q + 1] @ pow2) / m
        wx = float((stat.c1_less + stat.c_equal + stat.c2_less)[: q + 1] @ pow2) / m
        self.w = np.array([wa, wb, wx])


def _log1mexp(u):
    """ln(1 - e^-u) for u > 0 arrays; -inf at u = 0."""
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-u))


def _loglik(lam: np.ndarray, t: _JointTerms) -> float:
    la, lb, lx = lam
    total = -float(lam @ t.w)
    if t.lt1_c.size:
        total += float(t.lt1_c @ _log1mexp((la + lx) * t.lt1_s))
    if t.lt2_c.size:
        total += float(t.lt2_c @ _log1mexp((lb + lx) * t.lt2_s))
    if t.gt1_c.size:
        total += float(t.gt1_c @ _log1mexp(la * t.gt1_s))
    if t.gt2_c.size:
        total += float(t.gt2_c @ _log1mexp(lb * t.gt2_s))
    if t.eq_c.size:
        ua, ub, ux = la * t.eq_s, lb * t.eq_s, lx * t.eq_s
        d = -np.expm1(-ux) + np.exp(-ux) * np.expm1(-ua) * np.expm1(-ub)
        with np.errstate(divide="ignore"):
            total += float(t.eq_c @ np.log(d))
    return total


def _grad_phi(lam: np.ndarray, t: _JointTerms) -> np.ndarray:
    """Ascent gradient with respect to (phi_a, phi_b, phi_x), lam = e^phi."""
    la, lb, lx = lam
    ga, gb, gx = -t.w
    with np.errstate(divide="ignore", over="ignore"):
        if t.lt1_c.size:
            r = float(t.lt1_c @ (t.lt1_s / np.expm1((la + lx) * t.lt1_s)))
            ga += r
            gx += r
        if t.lt2_c.size:
            r = float(t.lt2_c @ (t.lt2_s / np.expm1((lb + lx) * t.lt2_s)))
            gb += r
            gx += r
        if t.gt1_c.size:
            ga += float(t.gt1_c @ (t.gt1_s / np.expm1(la * t.gt1_s)))
        if t.gt2_c.size:
            gb += float(t.gt2_c @ (t.gt2_s / np.expm1(lb * t.gt2_s)))
        if t.eq_c.size:
            ua, ub, ux = la * t.eq_s, lb * t.eq_s, lx * t.eq_s
            one_ma = -np.expm1(-ua)  # 1 - A
            one_mb = -np.expm1(-ub)
            x_fac = np.exp(-ux)
            d = -np.expm1(-ux) + x_fac * one_ma * one_mb
            ga += float(t.eq_c @ (t.eq_s * x_fac * np.exp(-ua) * one_mb / d))
            gb += float(t.eq_c @ (t.eq_s * x_fac * np.exp(-ub) * one_ma / d))
            gx += float(t.eq_c @ (t.eq_s * x_fac * (1.0 - one_ma * one_mb) / d))
    return lam * np.array([ga, gb, gx])


def _check_rates(est: JointEstimate):
    if not (est.a > 0 and est.b > 0 and est.x > 0):
        raise DomainError(
            f"rates ({est.a}, {est.b}, {est.x}) must all be positive"
        )


def joint_log_likelihood(
    est: JointEstimate, stat: JointStatistic, config: SketchConfig
) -> float:
    """Joint log-likelihood of the three rates given the paired-register counts."""
    _check_rates(est)
    return _loglik(np.array([est.a, est.b, est.x]), _JointTerms(stat, config))


def joint_gradient(
    est: JointEstimate, stat: JointStatistic, config: SketchConfig
) -> np.ndarray:
    """Gradient of the joint log-likelihood in log-rate coordinates."""
    _check_rates(est)
    return _grad_phi(np.array([est.a, est.b, est.x]), _JointTerms(stat, config))


def _bfgs_update(h, s, y):
    sy = float(s @ y)
    if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        return h, False
    rho = 1.0 / sy
    n = s.size
    v = np.eye(n) - rho * np.outer(s, y)
    return v @ h @ v.T + rho * np.outer(s, s), True


def _maximize(terms: _JointTerms, m: int, lam0, solver: SolverConfig):
    """BFGS ascent on the log-likelihood over free log-rate coordinates."""
    delta = solver.delta(m)
    phi = np.log(np.maximum(np.asarray(lam0, dtype=float), 1.0))
    frozen = np.zeros(3, dtype=bool)
    neg_run = np.zeros(3, dtype=int)

    def lam_of(p):
        with np.errstate(over="ignore"):
            return np.where(frozen, 0.0, np.exp(p))

    def objective(p):
        return -_loglik(lam_of(p), terms)

    def gradient(p):
        return np.where(frozen, 0.0, -_grad_phi(lam_of(p), terms))

    f = objective(phi)
    g = gradient(phi)
    h = np.eye(3)
    rescale_pending = True

    for _ in range(solver.max_iterations):
        free = ~frozen
        if not free.any():
            break
        d = np.zeros(3)
        d[free] = -(h[np.ix_(free, free)] @ g[free])
        gd = float(g @ d)
        if gd >= 0.0:
            h = np.eye(3)
            rescale_pending = True
            d = np.where(free, -g, 0.0)
            gd = float(g @ d)
            if gd >= 0.0:
                break  # gradient vanished on the free coordinates

        def backtrack(direction, slope):
            dinf = float(np.max(np.abs(direction)))
            if dinf == 0.0:
                return None
            alpha = min(1.0, 4.0 / dinf)  # cap raw first steps in log space
            for _ in range(60):
                trial = phi + alpha * direction
                f_trial = objective(trial)
                if np.isfinite(f_trial) and f_trial <= f + 1e-4 * alpha * slope:
                    return trial, f_trial, alpha * dinf
                alpha *= 0.5
            return None

        hit = backtrack(d, gd)
        if hit is None:
            # steepest-descent fallback with fresh curvature
            h = np.eye(3)
            rescale_pending = True
            d = np.where(free, -g, 0.0)
            hit = backtrack(d, float(g @ d))
            if hit is None:
                # no representable improving step: if every candidate move was
                # already below the stop threshold, that is convergence
                if float(np.max(np.abs(d))) * 1.0 <= delta or \
                        float(np.max(np.abs(g[free]))) <= 1e-9 * (1.0 + abs(f)):
                    break
                raise NoConvergenceError("line search failed off the optimum")

        phi_new, f_new, _ = hit
        s = phi_new - phi
        g_new = gradient(phi_new)
        lam_new = lam_of(phi_new)

        # rates collapsing to zero: persistent negative ascent gradient near 0
        for i in range(3):
            if free[i] and lam_new[i] < FREEZE_RATE and -g_new[i] < 0.0:
                neg_run[i] += 1
            else:
                neg_run[i] = 0

        step_ok = float(np.max(np.abs(s[free]))) < delta
        y = g_new - g
        phi, f, g = phi_new, f_new, g_new

        to_freeze = (neg_run >= FREEZE_RUN) & free
        if to_freeze.any():
            frozen |= to_freeze
            neg_run[:] = 0
            f = objective(phi)
            g = gradient(phi)
            h = np.eye(3)
            rescale_pending = True
            continue
        if step_ok:
            break
        sf, yf = s[free], y[free]
        if rescale_pending:
            yy = float(yf @ yf)
            sy = float(sf @ yf)
            if sy > 0 and yy > 0:
                h = np.eye(3) * (sy / yy)
        hf, updated = _bfgs_update(h[np.ix_(free, free)], sf, yf)
        if updated:
            h[np.ix_(free, free)] = hf
            rescale_pending = False
    else:
        raise NoConvergenceError(
            f"no convergence in {solver.max_iterations} iterations"
        )
    return lam_of(phi)


def joint_ml_estimate(
    s1: Sketch, s2: Sketch, solver: SolverConfig | None = None
) -> JointEstimate:
    """Maximum-likelihood overlap estimate from the paired-register statistic."""
    if s1.config != s2.config:
        raise ConfigMismatchError(f"cannot pair {s1.config} with {s2.config}")
    solver = solver or SolverConfig(max_iterations=JOINT_MAX_ITERATIONS)
    config = s1.config
    m, q = config.m, config.q
    stat = joint_statistic(s1, s2)
    if stat.c_equal[0] == m:
        return JointEstimate(0.0, 0.0, 0.0)  # both sketches untouched
    if stat.c_equal[q + 1] == m:
        return JointEstimate(0.0, 0.0, math.inf)  # nothing but saturation
    h1 = s1.histogram()
    h2 = s2.histogram()
    if h1.saturated == m or h2.saturated == m:
        # one side fully saturated: its exclusive rate is unbounded
        raise DegenerateHistogramError("saturated")
    terms = _JointTerms(stat, config)
    ie = inclusion_exclusion_estimate(s1, s2)
    lam0 = np.maximum(np.array([ie.a, ie.b, ie.x]), 1.0)
    lam = _maximize(terms, m, lam0, solver)
    return JointEstimate(a=float(lam[0]), b=float(lam[1]), x=float(lam[2]))


def equal_register_probability_bounds(jaccard_distance: float):
    """Bounds on the equal-register probability at a given relative difference.

    The input is D = (|S1 \\ S2| + |S2 \\ S1|) / |S1 ∪ S2| in [0, 1]; the
    probability of a register pair agreeing is squeezed between the two
    returned values (identical sets give (1, 1), disjoint sets drive the
    lower bound to exactly 0).
    """
    d = jaccard_distance
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"relative difference {d} outside [0, 1]")
    lower = 1.0 + 2.0 * ALPHA_INF * math.log(1.0 - d / 2.0)
    upper = 1.0 + 2.0 * ALPHA_INF * math.log(1.0 - d / 2.0 + d * d / 16.0)
    return lower, upper
