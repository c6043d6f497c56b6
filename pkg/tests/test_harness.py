import json
import math

import numpy as np
import pytest

from conformal_kit import ConfigurationError, RngSeed
from conformal_kit.harness import (
    THREADS_ENV,
    GeneratorSpec,
    draw,
    finite_sample_terms,
    generate,
    run_conditional_coverage,
    run_equivalence,
    run_finite_sample_bound,
    run_from_config,
    run_marginal_coverage,
    run_refit_benchmark,
    thread_count,
)


class TestGenerators:
    def test_invalid_specs(self):
        with pytest.raises(ConfigurationError):
            GeneratorSpec("banana", 10)
        with pytest.raises(ConfigurationError):
            GeneratorSpec("linear_gaussian", 0)
        with pytest.raises(ConfigurationError):
            GeneratorSpec("linear_gaussian", 10, noise_sd=0.0)
        with pytest.raises(ConfigurationError):
            GeneratorSpec.from_dict({"kind": "linear_gaussian", "n": 5, "colour": "red"})

    def test_fixed_seed_identical(self):
        spec = GeneratorSpec("linear_heavy_tail", 25, p=3)
        T1, t1 = generate(spec, RngSeed(9).child(4))
        T2, t2 = generate(spec, RngSeed(9).child(4))
        assert T1 == T2
        assert t1.response == t2.response

    def test_shapes(self):
        for kind in ("linear_gaussian", "linear_heavy_tail", "bounded_uniform"):
            T, t = generate(GeneratorSpec(kind, 12, p=2), RngSeed(1))
            assert len(T) == 12 and T.dimension == 2 and t.features.shape == (2,)

    def test_bounded_range(self):
        D = draw(GeneratorSpec("bounded_uniform", 1, p=2), 20000, np.random.default_rng(2))
        assert D.y.min() >= -1.0 and D.y.max() <= 1.0

    def test_gaussian_moments(self):
        spec = GeneratorSpec("linear_gaussian", 1, p=2, theta_scale=0.6, noise_sd=0.8)
        D = draw(spec, 200_000, np.random.default_rng(3))
        assert D.y.var() == pytest.approx(0.36 + 0.64, rel=0.02)
        resid = D.y - spec.regression_function(D.X)
        assert resid.std() == pytest.approx(0.8, rel=0.01)

    @pytest.mark.parametrize("kind", ["linear_gaussian", "bounded_uniform"])
    def test_conditional_density_bound(self, kind):
        spec = GeneratorSpec(kind, 1, p=2)
        D = draw(spec, 100_000, np.random.default_rng(4))
        resid = D.y - spec.regression_function(D.X)
        width = 0.05
        hist, _ = np.histogram(resid, bins=np.arange(-3, 3 + width, width))
        density = hist / (resid.size * width)
        assert density.max() <= 1.2 * spec.cc_density_bound


class TestThreads:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert thread_count() == 3

    def test_env_invalid(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "zero")
        with pytest.raises(ConfigurationError):
            thread_count()


class TestMarginal:
    def test_alpha_zero_covers_everything(self):
        spec = GeneratorSpec("bounded_uniform", 15)
        report = run_marginal_coverage("full", spec, 0.0, 0.0, 100, RngSeed(1))
        assert report.summary["coverage"] == 1.0

    def test_reps_floor(self):
        with pytest.raises(ConfigurationError):
            run_marginal_coverage("full", GeneratorSpec("linear_gaussian", 10), 0.1, 0.0, 10, RngSeed(1))

    def test_unknown_method(self):
        with pytest.raises(ConfigurationError):
            run_marginal_coverage("magic", GeneratorSpec("linear_gaussian", 10), 0.1, 0.0, 100, RngSeed(1))

    def test_thread_invariance(self, monkeypatch):
        spec = GeneratorSpec("linear_gaussian", 12, p=2)
        monkeypatch.setenv(THREADS_ENV, "1")
        one = run_marginal_coverage("shortcut", spec, 0.2, 0.0, 120, RngSeed(5))
        monkeypatch.setenv(THREADS_ENV, "2")
        two = run_marginal_coverage("shortcut", spec, 0.2, 0.0, 120, RngSeed(5))
        assert one.to_json() == two.to_json()
        assert one.to_csv() == two.to_csv()


class TestConditional:
    def test_rows_and_checks(self):
        spec = GeneratorSpec("linear_gaussian", 10, p=2, theta_scale=0.6, noise_sd=0.8)
        report = run_conditional_coverage("shortcut", spec, 0.1, 0.1, 100, 100, RngSeed(2), ns=[10, 20])
        assert len(report.rows) == 4
        fractions = report.summary["exceed_fraction"]["0.05"]
        assert len(fractions) == 2 and all(0 <= f <= 1 for f in fractions)
        assert "exceedance_nonincreasing_eps_0.05" in report.checks

    def test_residual_spread_rule(self):
        spec = GeneratorSpec("linear_gaussian", 10)
        report = run_conditional_coverage(
            "shortcut", spec, 0.1, 0.1, 100, 100, RngSeed(3), ns=[10], alpha_rule="residual_spread"
        )
        assert 0.01 <= report.rows[0]["mean_alpha"] <= 0.5


class TestEquivalence:
    def test_identical_pairs_vanish(self):
        spec = GeneratorSpec("bounded_uniform", 10)
        pairs = [("full", "full"), ("shortcut", "jackknife")]
        report = run_equivalence(spec, 0.1, [0.0], pairs, reps=3, rng=RngSeed(4), ns=[10], grid_num=401, directed=None)
        for row in report.rows:
            assert row["length_mean"] == 0.0

    def test_requires_bounded_generator(self):
        with pytest.raises(ConfigurationError):
            run_equivalence(GeneratorSpec("linear_gaussian", 10), 0.1, [0.0], reps=2, rng=RngSeed(1))


class TestFiniteSample:
    def test_terms_formula(self):
        swap = np.array([0.1, 0.3])
        abs_first = np.array([1.0, 2.0])
        abs_new = np.array([0.5, 0.5])
        terms = finite_sample_terms(swap, abs_first, abs_new, 10, 0.2, 0.1, 0.1, [1.0])
        # delta eps1^2 eps2 = 2e-4; hand arithmetic for the first replication
        assert terms["first_form"][0] == pytest.approx(3 * 0.1 / 2e-4 + 1.0 / (11 * 2e-4))
        assert terms["K=1"][0] == pytest.approx(3 * 0.1 / 2e-4 + 2.6 / (22 * 2e-4))
        big = finite_sample_terms([0.0], [0.0], [5.0], 10, 0.2, 0.1, 0.1, [1.0])
        assert big["K=1"][0] == pytest.approx(1 / (0.2 * 0.1 * 0.1) + 2.6 / (22 * 2e-4))

    def test_bound_holds_small(self):
        spec = GeneratorSpec("linear_gaussian", 20)
        report = run_finite_sample_bound(spec, None, 0.2, 0.1, 0.1, 100, RngSeed(6), inner_reps=100)
        assert report.passed
        for row in report.rows:
            assert row["rhs"] >= 0.0


class TestRefitBenchmark:
    def test_within_bound(self):
        spec = GeneratorSpec("linear_gaussian", 15)
        report = run_refit_benchmark(spec, 0.1, 0.0, [2.0**-4, 2.0**-10], 10, 5, RngSeed(1))
        assert report.passed
        assert report.rows[1]["bound"] == 82
        assert all(row["closed_form_refits_max"] == 3 for row in report.rows)

    def test_rejects_out_sample(self):
        with pytest.raises(ConfigurationError):
            run_refit_benchmark(GeneratorSpec("linear_gaussian", 15), 0.1, 0.0, [0.1], 10, 5, RngSeed(1), "out-sample:mean")


class TestReports:
    def test_config_dispatch_and_files(self, tmp_path):
        cfg = {"generator": {"kind": "bounded_uniform", "n": 10}, "reps": 100, "method": "shortcut"}
        report = run_from_config("marginal", cfg, seed=7)
        paths = report.write(tmp_path / "out" / "m")
        data = json.loads(open(paths[0]).read())
        assert data["experiment"] == "marginal_coverage"
        assert "wall_clock_seconds" not in data
        assert "wall_clock_seconds" in json.loads(open(paths[2]).read())
        again = run_from_config("marginal", cfg, seed=7)
        assert again.to_json() == report.to_json()

    def test_bad_configs(self):
        with pytest.raises(ConfigurationError):
            run_from_config("marginal", {"reps": 100}, seed=1)
        with pytest.raises(ConfigurationError):
            run_from_config("nonsense", {"generator": {"kind": "bounded_uniform", "n": 10}}, seed=1)
        with pytest.raises(ConfigurationError):
            run_from_config("marginal", {"generator": {"kind": "bounded_uniform", "n": 10}, "bogus": 1}, seed=1)

    def test_no_nan_in_json(self):
        report = run_marginal_coverage("full", GeneratorSpec("bounded_uniform", 8), 0.1, 0.0, 100, RngSeed(2))
        text = report.to_json()
        assert "NaN" not in text
        assert math.isfinite(json.loads(text)["summary"]["coverage"])
