"""Tests for two-sketch overlap estimation.

Gradient checks use central finite differences in log-rate space as the
independent oracle; optimizer quality is checked against likelihood
monotonicity, stationarity, and small Monte-Carlo runs with known overlap.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hllkit.classic import ALPHA_INF
from hllkit.errors import (
    ConfigMismatchError,
    DegenerateHistogramError,
    DomainError,
)
from hllkit.improved import improved_estimate
from hllkit.joint import (
    JointEstimate,
    JointStatistic,
    equal_register_probability_bounds,
    inclusion_exclusion_estimate,
    joint_gradient,
    joint_log_likelihood,
    joint_ml_estimate,
    joint_statistic,
)
from hllkit.ml import SolverConfig, log_likelihood
from hllkit.sketch import Sketch, SketchConfig

CFG = SketchConfig(p=8, q=16)


def sketch_of(cfg, hashes):
    s = Sketch(cfg)
    s.insert_many(np.asarray(hashes, dtype=np.uint64))
    return s


def random_hashes(rng, n):
    return rng.integers(0, 2**64, size=n, dtype=np.uint64)


def overlapping_pair(rng, cfg, na, nb, nx):
    ha = random_hashes(rng, na)
    hb = random_hashes(rng, nb)
    hx = random_hashes(rng, nx)
    s1 = sketch_of(cfg, np.concatenate([ha, hx]))
    s2 = sketch_of(cfg, np.concatenate([hb, hx]))
    return s1, s2


def swapped(stat: JointStatistic) -> JointStatistic:
    return JointStatistic(
        c1_less=stat.c2_less,
        c1_greater=stat.c2_greater,
        c2_less=stat.c1_less,
        c2_greater=stat.c1_greater,
        c_equal=stat.c_equal,
    )


class TestJointStatistic:
    def test_identical_sketches_all_equal(self):
        rng = np.random.default_rng(0)
        s = sketch_of(CFG, random_hashes(rng, 500))
        stat = joint_statistic(s, s)
        assert np.array_equal(stat.c_equal, s.histogram().counts)
        for arr in (stat.c1_less, stat.c1_greater, stat.c2_less, stat.c2_greater):
            assert not arr.any()

    def test_fresh_against_all_ones(self):
        s1 = Sketch(CFG)
        s2 = Sketch.from_registers(CFG, np.ones(CFG.m, dtype=np.uint8))
        stat = joint_statistic(s1, s2)
        assert stat.c1_less[0] == CFG.m
        assert stat.c2_greater[1] == CFG.m
        assert stat.c1_less.sum() == CFG.m and stat.c2_greater.sum() == CFG.m
        assert not stat.c1_greater.any() and not stat.c2_less.any()
        assert not stat.c_equal.any()

    @given(seed=st.integers(0, 2**32 - 1), na=st.integers(0, 3000),
           nb=st.integers(0, 3000), nx=st.integers(0, 3000))
    @settings(max_examples=25, deadline=None)
    def test_totals_consistent(self, seed, na, nb, nx):
        rng = np.random.default_rng(seed)
        s1, s2 = overlapping_pair(rng, CFG, na, nb, nx)
        stat = joint_statistic(s1, s2)
        m = CFG.m
        assert stat.total_pairs() == m
        assert (stat.c2_less + stat.c_equal + stat.c2_greater).sum() == m
        # strict inequalities pair up across orientations
        assert stat.c1_less.sum() == stat.c2_greater.sum()
        assert stat.c2_less.sum() == stat.c1_greater.sum()
        total = sum(
            int(a.sum())
            for a in (stat.c1_less, stat.c1_greater, stat.c2_less,
                      stat.c2_greater, stat.c_equal)
        )
        assert total == 2 * m - stat.c_equal.sum()
        # a register cannot be below its partner while at the ceiling,
        # nor above its partner while at zero
        assert stat.c1_less[CFG.q + 1] == 0 and stat.c2_less[CFG.q + 1] == 0
        assert stat.c1_greater[0] == 0 and stat.c2_greater[0] == 0

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatchError):
            joint_statistic(Sketch(CFG), Sketch(SketchConfig(p=9, q=16)))


class TestInclusionExclusion:
    def test_exact_arithmetic(self):
        # stub estimator keyed on which sketch it sees
        rng = np.random.default_rng(1)
        s1, s2 = overlapping_pair(rng, CFG, 400, 400, 200)
        u = s1.merge(s2)
        table = {
            s1.histogram().counts.tobytes(): 100.0,
            s2.histogram().counts.tobytes(): 100.0,
            u.histogram().counts.tobytes(): 150.0,
        }

        def stub(hist, config):
            return table[hist.counts.tobytes()]

        est = inclusion_exclusion_estimate(s1, s2, estimator=stub)
        assert est.a == 50.0 and est.b == 50.0 and est.x == 50.0
        assert est.union == 150.0
        assert not est.has_negative

    def test_identical_sketches_zero_exclusive(self):
        rng = np.random.default_rng(2)
        s = sketch_of(CFG, random_hashes(rng, 2000))
        est = inclusion_exclusion_estimate(s, s)
        assert est.a == 0.0 and est.b == 0.0
        assert est.x == pytest.approx(improved_estimate(s.histogram(), CFG))

    def test_negative_component_flagged(self):
        est = JointEstimate(a=10.0, b=5.0, x=-1.0)
        assert est.has_negative
        assert est.union == 14.0

    def test_default_estimator_is_bias_corrected(self):
        rng = np.random.default_rng(3)
        s1, s2 = overlapping_pair(rng, CFG, 1000, 1000, 500)
        got = inclusion_exclusion_estimate(s1, s2)
        explicit = inclusion_exclusion_estimate(s1, s2, estimator=improved_estimate)
        assert (got.a, got.b, got.x) == (explicit.a, explicit.b, explicit.x)


class TestJointLikelihood:
    def test_positive_rates_required(self):
        rng = np.random.default_rng(4)
        s1, s2 = overlapping_pair(rng, CFG, 100, 100, 100)
        stat = joint_statistic(s1, s2)
        for bad in (JointEstimate(0.0, 1.0, 1.0), JointEstimate(1.0, -2.0, 1.0),
                    JointEstimate(1.0, 1.0, 0.0)):
            with pytest.raises(DomainError):
                joint_log_likelihood(bad, stat, CFG)
            with pytest.raises(DomainError):
                joint_gradient(bad, stat, CFG)

    def test_role_swap_symmetry(self):
        rng = np.random.default_rng(5)
        s1, s2 = overlapping_pair(rng, CFG, 1500, 700, 900)
        stat = joint_statistic(s1, s2)
        est = JointEstimate(a=1400.0, b=800.0, x=950.0)
        mirrored = JointEstimate(a=est.b, b=est.a, x=est.x)
        ll = joint_log_likelihood(est, stat, CFG)
        ll_sw = joint_log_likelihood(mirrored, swapped(stat), CFG)
        assert ll == pytest.approx(ll_sw, rel=1e-12)
        g = joint_gradient(est, stat, CFG)
        g_sw = joint_gradient(mirrored, swapped(stat), CFG)
        assert g[0] == pytest.approx(g_sw[1], rel=1e-12)
        assert g[1] == pytest.approx(g_sw[0], rel=1e-12)
        assert g[2] == pytest.approx(g_sw[2], rel=1e-12)

    def test_reduces_to_single_sketch_when_partner_fresh(self):
        # with sketch 2 untouched and vanishing partner/shared rates, the
        # remaining rate's profile matches the single-sketch log-likelihood
        rng = np.random.default_rng(6)
        s1 = sketch_of(CFG, random_hashes(rng, 3000))
        s2 = Sketch(CFG)
        stat = joint_statistic(s1, s2)
        hist = s1.histogram()
        tiny = 1e-12
        lams = [500.0, 1500.0, 3000.0, 6000.0]
        joint_vals = [
            joint_log_likelihood(JointEstimate(lam, tiny, tiny), stat, CFG)
            for lam in lams
        ]
        single_vals = [log_likelihood(lam, hist, CFG) for lam in lams]
        # equal up to a lambda-independent constant: compare differences
        base_j, base_s = joint_vals[0], single_vals[0]
        for jv, sv in zip(joint_vals[1:], single_vals[1:]):
            assert (jv - base_j) == pytest.approx(sv - base_s, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        na, nb, nx = rng.integers(200, 5000, size=3)
        s1, s2 = overlapping_pair(rng, CFG, int(na), int(nb), int(nx))
        stat = joint_statistic(s1, s2)
        for _ in range(4):
            lam = np.exp(rng.uniform(np.log(50.0), np.log(20000.0), size=3))
            est = JointEstimate(*lam)
            g = joint_gradient(est, stat, CFG)
            phi = np.log(lam)
            h = 1e-6
            for i in range(3):
                up, dn = phi.copy(), phi.copy()
                up[i] += h
                dn[i] -= h
                fd = (
                    joint_log_likelihood(JointEstimate(*np.exp(up)), stat, CFG)
                    - joint_log_likelihood(JointEstimate(*np.exp(dn)), stat, CFG)
                ) / (2 * h)
                assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-7)

    def test_disjoint_mass_disfavored_at_large_shared_rate(self):
        # with identical sketches, raising the exclusive-a rate from an
        # already-large shared rate can only hurt the likelihood
        rng = np.random.default_rng(7)
        s = sketch_of(CFG, random_hashes(rng, 10_000))
        stat = joint_statistic(s, s)
        est = JointEstimate(a=500.0, b=500.0, x=12_000.0)
        g = joint_gradient(est, stat, CFG)
        assert g[0] < 0 and g[1] < 0
        # agree with a one-sided numerical slope
        h = 1e-5
        up = joint_log_likelihood(
            JointEstimate(est.a * math.exp(h), est.b, est.x), stat, CFG
        )
        dn = joint_log_likelihood(
            JointEstimate(est.a * math.exp(-h), est.b, est.x), stat, CFG
        )
        assert up < dn


class TestJointMl:
    def test_both_fresh(self):
        est = joint_ml_estimate(Sketch(CFG), Sketch(CFG))
        assert (est.a, est.b, est.x) == (0.0, 0.0, 0.0)

    def test_both_saturated(self):
        regs = np.full(CFG.m, CFG.q + 1, dtype=np.uint8)
        est = joint_ml_estimate(
            Sketch.from_registers(CFG, regs), Sketch.from_registers(CFG, regs)
        )
        assert (est.a, est.b) == (0.0, 0.0)
        assert math.isinf(est.x)

    def test_one_side_saturated_rejected(self):
        rng = np.random.default_rng(8)
        regs = np.full(CFG.m, CFG.q + 1, dtype=np.uint8)
        sat = Sketch.from_registers(CFG, regs)
        other = sketch_of(CFG, random_hashes(rng, 1000))
        with pytest.raises(DegenerateHistogramError):
            joint_ml_estimate(sat, other)

    def test_optimum_beats_initial_point(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            na, nb, nx = (int(v) for v in rng.integers(100, 8000, size=3))
            s1, s2 = overlapping_pair(rng, CFG, na, nb, nx)
            stat = joint_statistic(s1, s2)
            ie = inclusion_exclusion_estimate(s1, s2)
            init = JointEstimate(
                max(ie.a, 1.0), max(ie.b, 1.0), max(ie.x, 1.0)
            )
            ml = joint_ml_estimate(s1, s2)
            safe = JointEstimate(max(ml.a, 1e-9), max(ml.b, 1e-9), max(ml.x, 1e-9))
            assert joint_log_likelihood(safe, stat, CFG) >= joint_log_likelihood(
                init, stat, CFG
            ) - 1e-9

    def test_gradient_small_at_optimum(self):
        rng = np.random.default_rng(10)
        s1, s2 = overlapping_pair(rng, CFG, 3000, 2500, 2000)
        stat = joint_statistic(s1, s2)
        ml = joint_ml_estimate(s1, s2)
        g = joint_gradient(ml, stat, CFG)
        # scale of a stationarity residual: curvature ~ m times step tolerance
        tol = 5.0 * CFG.m * SolverConfig().delta(CFG.m)
        assert np.max(np.abs(g)) < tol

    def test_role_symmetry(self):
        rng = np.random.default_rng(11)
        s1, s2 = overlapping_pair(rng, CFG, 2000, 400, 1000)
        ab = joint_ml_estimate(s1, s2)
        ba = joint_ml_estimate(s2, s1)
        delta = SolverConfig().delta(CFG.m)
        assert ab.a == pytest.approx(ba.b, rel=20 * delta, abs=1.0)
        assert ab.b == pytest.approx(ba.a, rel=20 * delta, abs=1.0)
        assert ab.x == pytest.approx(ba.x, rel=20 * delta, abs=1.0)

    def test_all_components_non_negative(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            na, nb, nx = (int(v) for v in rng.integers(0, 4000, size=3))
            s1, s2 = overlapping_pair(rng, CFG, na, nb, max(nx, 1))
            ml = joint_ml_estimate(s1, s2)
            assert ml.a >= 0 and ml.b >= 0 and ml.x >= 0
            assert not ml.has_negative

    def test_identical_sketches_monte_carlo(self):
        # shared mass should absorb nearly everything
        rng = np.random.default_rng(13)
        n = 10_000
        rel_x = []
        for _ in range(30):
            s = sketch_of(CFG, random_hashes(rng, n))
            ml = joint_ml_estimate(s, s)
            assert ml.a < 0.02 * ml.x
            assert ml.b < 0.02 * ml.x
            rel_x.append(ml.x / n - 1.0)
        assert abs(np.mean(rel_x)) < 0.03

    def test_intersection_tracks_truth(self):
        rng = np.random.default_rng(14)
        n = 5000
        rel = []
        for _ in range(40):
            s1, s2 = overlapping_pair(rng, CFG, n, n, n)
            ml = joint_ml_estimate(s1, s2)
            rel.append(ml.x / n - 1.0)
        # mean over 40 trials: noise ~ 2/sqrt(m * 40) per component
        assert abs(np.mean(rel)) < 4.0 / math.sqrt(CFG.m * 40) + 0.02


class TestEqualRegisterBounds:
    def test_identical_sets(self):
        lo, hi = equal_register_probability_bounds(0.0)
        assert lo == 1.0 and hi == 1.0

    def test_disjoint_sets_lower_bound_zero(self):
        lo, hi = equal_register_probability_bounds(1.0)
        assert abs(lo) < 1e-15
        assert hi == pytest.approx(1.0 + 2 * ALPHA_INF * math.log(0.5 + 1 / 16))

    def test_ordering_on_grid(self):
        for d in np.linspace(0.0, 1.0, 101):
            lo, hi = equal_register_probability_bounds(float(d))
            assert lo <= hi <= 1.0

    def test_domain_check(self):
        for bad in (-0.1, 1.1, math.nan):
            with pytest.raises(DomainError):
                equal_register_probability_bounds(bad)
