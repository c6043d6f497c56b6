import math

import numpy as np
import pytest

from conformal_kit import (
    ConfigurationError,
    DataSet,
    GridSpec,
    Interval,
    IntervalUnion,
    Observation,
    RngSeed,
    interval_union_from_predicate,
    symmetric_difference_length,
)


class TestDataSet:
    def test_shapes_and_rows(self):
        T = DataSet([1.0, 2.0, 3.0], [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
        assert len(T) == 3
        assert T.dimension == 2
        assert T[1].response == 2.0
        np.testing.assert_array_equal(T[1].features, [1.0, 0.0])

    def test_mismatched_rows_rejected(self):
        with pytest.raises(ValueError):
            DataSet([1.0, 2.0], [[0.0], [1.0], [2.0]])

    def test_nonfinite_response_rejected(self):
        with pytest.raises(ValueError):
            DataSet([1.0, math.nan], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            Observation(math.inf, [0.0])

    def test_immutable_storage(self):
        T = DataSet([1.0, 2.0], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            T.y[0] = 5.0

    def test_without_with_replaced(self):
        T = DataSet([1.0, 2.0, 3.0], [[0.0], [1.0], [2.0]])
        np.testing.assert_array_equal(T.without(1).y, [1.0, 3.0])
        grown = T.with_observation(Observation(4.0, [3.0]))
        np.testing.assert_array_equal(grown.y, [1.0, 2.0, 3.0, 4.0])
        swapped = T.replaced(0, Observation(9.0, [9.0]))
        np.testing.assert_array_equal(swapped.X[:, 0], [9.0, 1.0, 2.0])

    def test_round_trip_observations(self):
        T = DataSet([1.0, 2.0], [[0.5, 1.5], [2.5, 3.5]])
        assert DataSet.from_observations(list(T)) == T


class TestRngSeed:
    def test_same_seed_same_draws(self):
        a = RngSeed(7).child(3).generator().standard_normal(5)
        b = RngSeed(7).child(3).generator().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_children_are_distinct(self):
        a = RngSeed(7).child(0).generator().standard_normal(5)
        b = RngSeed(7).child(1).generator().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_negative_seed_rejected(self):
        with pytest.raises(ConfigurationError):
            RngSeed(-1)


class TestIntervalUnion:
    def test_normalization_merges_overlaps(self):
        u = IntervalUnion([(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)])
        assert len(u) == 2
        assert u.length == pytest.approx(3.0)

    def test_membership_respects_closedness(self):
        u = IntervalUnion([Interval(0.0, 1.0, lower_closed=False, upper_closed=True)])
        assert 0.0 not in u
        assert 1.0 in u
        assert 0.5 in u

    def test_contains_many_matches_scalar(self):
        u = IntervalUnion([(0.0, 1.0), (2.0, 3.0)])
        ys = np.linspace(-1, 4, 51)
        np.testing.assert_array_equal(u.contains_many(ys), [y in u for y in ys])

    def test_infinite_endpoints_open(self):
        line = IntervalUnion.real_line()
        assert line.length == math.inf
        assert 1e300 in line

    def test_subset(self):
        assert IntervalUnion.closed(0, 1).is_subset_of(IntervalUnion.closed(-1, 2))
        assert not IntervalUnion.closed(0, 3).is_subset_of(IntervalUnion.closed(-1, 2))
        assert IntervalUnion.empty().is_subset_of(IntervalUnion.closed(0, 1))

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValueError):
            Interval(2.0, 1.0)


class TestSymmetricDifference:
    def test_identical_sets(self):
        a = IntervalUnion([(0.0, 1.0), (2.0, 5.0)])
        assert symmetric_difference_length(a, a) == 0.0

    def test_two_slivers(self):
        assert symmetric_difference_length(IntervalUnion.closed(0, 2), IntervalUnion.closed(1, 3)) == pytest.approx(2.0)

    def test_unbounded_difference(self):
        a = IntervalUnion([Interval(0.0, math.inf)])
        assert symmetric_difference_length(a, IntervalUnion.closed(0, 1)) == math.inf

    def test_symmetric_and_matches_grid_oracle(self):
        rng = np.random.default_rng(3)
        ys = np.linspace(-5, 5, 200001)
        h = ys[1] - ys[0]
        for _ in range(20):
            a = IntervalUnion([tuple(sorted(rng.uniform(-4, 4, 2))) for _ in range(3)])
            b = IntervalUnion([tuple(sorted(rng.uniform(-4, 4, 2))) for _ in range(3)])
            exact = symmetric_difference_length(a, b)
            assert exact == pytest.approx(symmetric_difference_length(b, a))
            oracle = np.sum(a.contains_many(ys) != b.contains_many(ys)) * h
            assert exact == pytest.approx(oracle, abs=20 * h)


class TestGrid:
    def test_invalid_grids(self):
        with pytest.raises(ConfigurationError):
            GridSpec(1.0, 1.0)
        with pytest.raises(ConfigurationError):
            GridSpec.from_step(-1.0, 1.0, 0.0)

    def test_from_step(self):
        g = GridSpec.from_step(-1.0, 1.0, 0.5)
        np.testing.assert_allclose(g.points(), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_predicate_false_is_empty(self):
        assert not interval_union_from_predicate(lambda y: False, GridSpec.from_step(-1, 1, 0.5))

    def test_predicate_true_is_whole_range(self):
        u = interval_union_from_predicate(lambda y: True, GridSpec.from_step(-1, 1, 0.5))
        assert u == IntervalUnion.closed(-1.0, 1.0)

    def test_predicate_widened_by_half_step(self):
        # grid points -0.5, 0, 0.5 satisfy |y| <= 0.6; each run is widened by h/2
        u = interval_union_from_predicate(lambda y: abs(y) <= 0.6, GridSpec.from_step(-1, 1, 0.5))
        assert u == IntervalUnion.closed(-0.75, 0.75)

    def test_two_runs_stay_separate(self):
        u = interval_union_from_predicate(lambda y: abs(y) >= 0.9, GridSpec(-1, 1, 21))
        assert len(u) == 2
