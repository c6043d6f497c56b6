"""Full conformal, shortcut, cross-conformal and Jackknife prediction sets,
with stability diagnostics and a Monte Carlo harness."""

from .core import (
    ConfigurationError,
    ContractError,
    DataSet,
    GridSpec,
    Interval,
    IntervalUnion,
    Observation,
    RngSeed,
    UnsupportedError,
    default_grid,
    interval_union_from_predicate,
    symmetric_difference_length,
    union_from_mask,
)
from .ecdf import StepFunction, build_ecdf, left_limit, quantile
from .levy import GaugeResult, check_quantile_inequality, gauge_upper_bounds, levy_gauge, levy_metric, sup_distance
from .predictors import (
    KNN,
    OLS,
    AffineCoefficients,
    BlackBox,
    ConstantZero,
    InSampleConsistent,
    MeanOnly,
    OutSampleConsistent,
    Predictor,
    Ridge,
    affine_coefficients,
    augment_unique_id,
    estimate_oos_instability,
    make_in_sample_consistent,
    make_out_sample_consistent,
    predict,
    predictor_from_name,
)
from .scores import (
    ConformityScore,
    custom,
    estimate_score_instability,
    in_sample,
    loo_scores,
    out_sample,
    score,
    score_from_name,
)
from .sets import (
    ConformalConfig,
    check_gauge_hat_bound,
    check_sandwich,
    cross_conformal_set,
    full_conformal_contains,
    full_conformal_set,
    jackknife_plus_symmetric,
    jackknife_symmetric,
    shortcut_affine,
    shortcut_closed_form,
    shortcut_knn,
    shortcut_set,
)
from .unimodal import bisection, golden_minimizer, refit_bound, shortcut_unimodal

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
