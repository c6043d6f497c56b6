import numpy as np
import pytest

from conformal_kit import (
    build_ecdf,
    check_quantile_inequality,
    gauge_upper_bounds,
    levy_gauge,
    levy_metric,
    quantile,
    sup_distance,
)


def gauge_oracle(F, G, delta, num=100_001):
    """Smallest eps with F(t - delta) - eps <= G(t) <= F(t + delta) + eps, on a dense grid.

    Breakpoints of both functions and their delta-shifts are added, evaluated
    exactly and just to the left, so step functions are resolved.
    """
    pts = np.concatenate([F.breakpoints, G.breakpoints])
    lo, hi = pts.min() - 2 * delta - 1, pts.max() + 2 * delta + 1
    keys = np.concatenate([pts, pts - delta, pts + delta])
    ts = np.concatenate([np.linspace(lo, hi, num), keys, np.nextafter(keys, -np.inf)])
    upper = np.max(F(ts - delta) - G(ts))
    lower = np.max(G(ts) - F(ts + delta))
    return max(upper, lower, 0.0)


def metric_oracle(F, G, grid=np.linspace(0, 1, 2001)):
    for eps in grid:
        if gauge_oracle(F, G, eps, num=2001) <= eps + 1e-12:
            return eps
    return 1.0


class TestGaugeExamples:
    def test_identical_functions(self):
        F = build_ecdf([0.3, 1.0, 2.5])
        for delta in (0.0, 0.1, 5.0):
            assert levy_gauge(F, F, delta).epsilon == 0.0

    def test_unit_steps_sup_norm(self):
        assert levy_gauge(build_ecdf([0.0]), build_ecdf([1.0]), 0.0).epsilon == 1.0

    def test_unit_steps_shift_absorbs(self):
        assert levy_gauge(build_ecdf([0.0]), build_ecdf([1.0]), 1.0).epsilon == 0.0

    def test_negative_delta_rejected(self):
        F = build_ecdf([0.0])
        with pytest.raises(ValueError):
            levy_gauge(F, F, -0.1)

    def test_sup_distance_is_zero_shift(self):
        F, G = build_ecdf([0, 1, 2]), build_ecdf([0.5, 1, 3])
        assert sup_distance(F, G) == levy_gauge(F, G, 0.0).epsilon


class TestGaugeOracle:
    def test_matches_dense_grid(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            F = build_ecdf(rng.normal(0, 1, rng.integers(1, 12)))
            G = build_ecdf(rng.normal(0.3, 1.2, rng.integers(1, 12)))
            delta = float(rng.choice([0.0, rng.uniform(0, 1)]))
            assert levy_gauge(F, G, delta).epsilon == pytest.approx(gauge_oracle(F, G, delta), abs=1e-12)

    def test_with_ties(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            F = build_ecdf(rng.integers(0, 4, rng.integers(1, 10)).astype(float))
            G = build_ecdf(rng.integers(0, 4, rng.integers(1, 10)).astype(float))
            delta = float(rng.integers(0, 3))
            assert levy_gauge(F, G, delta).epsilon == pytest.approx(gauge_oracle(F, G, delta), abs=1e-12)


class TestLevyMetric:
    def test_identical(self):
        F = build_ecdf([1.0, 2.0])
        assert levy_metric(F, F) == 0.0

    def test_dirac_steps(self):
        assert levy_metric(build_ecdf([0.0]), build_ecdf([0.3])) == pytest.approx(0.3, abs=1e-8)
        assert levy_metric(build_ecdf([0.0]), build_ecdf([1.0])) == pytest.approx(1.0, abs=1e-8)

    def test_matches_scan_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            F = build_ecdf(rng.uniform(0, 1, 4))
            G = build_ecdf(rng.uniform(0, 1, 4))
            assert levy_metric(F, G) == pytest.approx(metric_oracle(F, G), abs=5e-4 + 1e-8)

    def test_symmetric(self):
        rng = np.random.default_rng(14)
        F = build_ecdf(rng.standard_normal(7))
        G = build_ecdf(rng.standard_normal(9))
        assert levy_metric(F, G) == pytest.approx(levy_metric(G, F), abs=2e-9)


class TestGaugeUpperBounds:
    def test_equal_functions(self):
        F = build_ecdf([0.0, 1.0])
        windowed, full = gauge_upper_bounds(F, F, 0.5, 3.0, 0.0)
        assert full == 0.0

    def test_unit_steps(self):
        _, full = gauge_upper_bounds(build_ecdf([0.0]), build_ecdf([1.0]), 1.0, 2.0, 0.0)
        assert full == pytest.approx(1.0)

    def test_window_terms(self):
        F = build_ecdf([0.0])
        # 1 - F(1) + F(-1) + 0: the whole mass sits inside the window
        windowed, _ = gauge_upper_bounds(F, F, 1.0, 1.0, 0.0)
        assert windowed == 0.0
        # F is right-continuous, so a window edge on the atom counts its mass
        windowed, _ = gauge_upper_bounds(F, F, 1.0, 0.0, 0.0)
        assert windowed == 1.0

    def test_nonpositive_delta_rejected(self):
        F = build_ecdf([0.0])
        with pytest.raises(ValueError):
            gauge_upper_bounds(F, F, 0.0, 1.0, 0.0)

    def test_global_bound_matches_riemann_sum(self):
        rng = np.random.default_rng(15)
        ts = np.linspace(-8, 8, 400_001)
        h = ts[1] - ts[0]
        for _ in range(5):
            F = build_ecdf(rng.standard_normal(6))
            G = build_ecdf(rng.standard_normal(6))
            _, full = gauge_upper_bounds(F, G, 0.5, 1.0, 0.0)
            integral = np.sum((F(ts) - G(ts)) ** 2) * h
            assert full == pytest.approx(np.sqrt(integral / 0.5), rel=1e-3)

    def test_dominate_gauge(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            F = build_ecdf(rng.standard_normal(rng.integers(1, 10)))
            G = build_ecdf(rng.standard_normal(rng.integers(1, 10)))
            delta, K, mu = rng.uniform(0.05, 1), rng.uniform(0, 3), rng.uniform(-1, 1)
            ld = levy_gauge(F, G, delta).epsilon
            windowed, full = gauge_upper_bounds(F, G, delta, K, mu)
            assert ld <= windowed + 1e-12
            assert ld <= full + 1e-12


class TestQuantileInequality:
    def test_identical_pair(self):
        F = build_ecdf([0.0, 1.0, 2.0])
        for alpha in (0.1, 0.5, 1.0):
            assert check_quantile_inequality(F, F, 0.0, alpha)

    def test_random_pair(self):
        rng = np.random.default_rng(17)
        F = build_ecdf(rng.standard_normal(10))
        G = build_ecdf(rng.standard_normal(12))
        assert check_quantile_inequality(F, G, 0.1, 0.5)

    def test_level_above_one(self):
        F, G = build_ecdf([0.0]), build_ecdf([3.0])
        assert quantile(G, 1.5) == np.inf
        assert check_quantile_inequality(F, G, 0.0, 1.5)

    def test_many_random_pairs(self):
        rng = np.random.default_rng(18)
        for _ in range(300):
            F = build_ecdf(rng.integers(0, 5, rng.integers(1, 8)).astype(float))
            G = build_ecdf(rng.integers(0, 5, rng.integers(1, 8)).astype(float))
            assert check_quantile_inequality(F, G, float(rng.uniform(0, 2)), float(rng.uniform(-0.2, 1.2)))
