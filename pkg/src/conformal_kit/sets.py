"""Prediction sets: full conformal, shortcut, cross-conformal, Jackknife.

Grid-based sets share one vectorized membership kernel per method, so the
same code answers "is y in the set" exactly at a single response and builds
the grid realization.  Closed forms are exact and never touch a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    INF,
    ContractError,
    DataSet,
    GridSpec,
    Interval,
    IntervalUnion,
    default_grid,
    union_from_mask,
)
from .ecdf import StepFunction, build_ecdf, quantile, sorted_quantiles
from .levy import levy_gauge
from .predictors import KNN, AffineCoefficients, Predictor, affine_coefficients, predict
from .scores import ConformityScore, in_sample, loo_scores

# Gauges and lemma bounds are rationals with denominators n and n + 1; this
# slack only absorbs the last-bit rounding of their float differences.
RATIONAL_SLACK = 1e-12


@dataclass(frozen=True)
class ConformalConfig:
    alpha: float
    delta: float = 0.0
    grid: GridSpec | None = None


def _xvec(x_new) -> np.ndarray:
    return np.asarray(x_new, dtype=float).reshape(-1)


def resolve_grid(C: ConformityScore, T: DataSet, x_new, grid: GridSpec | None, num: int = 4001) -> GridSpec:
    """Explicit grid, or ``prediction ± 10 sd(responses)`` when none is given."""
    if grid is not None:
        return grid
    center = predict(C.predictor, _xvec(x_new), T) if C.predictor is not None else float(np.mean(T.y))
    return default_grid(center, T.y, num=num)


# -- membership kernels -------------------------------------------------------


def augmented_scores(C: ConformityScore, T: DataSet, x_new, ys) -> np.ndarray:
    """Scores of the augmented data for every candidate response.

    Returns ``(len(ys), n + 1)``; column ``i < n`` is ``score(t_i, D^y without t_i)``
    and the last column is the candidate's own score against ``T``.
    """
    x = _xvec(x_new)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    X_full = np.vstack([T.X, x])
    Y_full = np.hstack([np.broadcast_to(T.y, (ys.size, len(T))), ys[:, None]])
    return C.member_scores(X_full, Y_full)


def full_conformal_mask_from_scores(aug: np.ndarray, alphas, delta: float = 0.0, sorted_aug: np.ndarray | None = None) -> np.ndarray:
    """Membership from precomputed augmented scores (last column = candidate)."""
    sorted_aug = np.sort(aug, axis=1) if sorted_aug is None else sorted_aug
    q = sorted_quantiles(sorted_aug, 1.0 - np.atleast_1d(np.asarray(alphas, dtype=float)))
    return (aug[:, -1][:, None] <= q + delta).T


def full_conformal_mask(C: ConformityScore, T: DataSet, x_new, ys, alphas, delta: float = 0.0) -> np.ndarray:
    """``(len(alphas), len(ys))`` membership of the full conformal set."""
    return full_conformal_mask_from_scores(augmented_scores(C, T, x_new, ys), alphas, delta)


def shortcut_threshold(C: ConformityScore, T: DataSet, alpha: float, delta: float = 0.0, loo=None) -> float:
    loo = loo_scores(C, T) if loo is None else loo
    return quantile(build_ecdf(loo), 1.0 - alpha) + delta


def shortcut_mask(C: ConformityScore, T: DataSet, x_new, ys, alphas, delta: float = 0.0, loo=None) -> np.ndarray:
    loo = loo_scores(C, T) if loo is None else loo
    G = build_ecdf(loo)
    cand = C.evaluate(np.atleast_1d(ys), _xvec(x_new), T.X, T.y)
    thresholds = np.array([quantile(G, 1.0 - a) for a in np.atleast_1d(alphas)]) + delta
    return cand[None, :] <= thresholds[:, None]


def loo_candidate_scores(C: ConformityScore, T: DataSet, x_new, ys) -> np.ndarray:
    """``(len(ys), n)`` matrix of ``score((y, x_new), T without t_i)``."""
    x = _xvec(x_new)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    n = len(T)
    out = np.empty((ys.size, n))
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        out[:, i] = C.evaluate(ys, x, T.X[keep], T.y[keep])
        keep[i] = True
    return out


def cross_conformal_mask(C: ConformityScore, T: DataSet, x_new, ys, alphas, delta: float = 0.0, loo=None) -> np.ndarray:
    if len(T) < 2:
        raise ValueError("cross-conformal sets need at least two observations")
    ref = loo_scores(C, T) if loo is None else loo
    cand = loo_candidate_scores(C, T, x_new, ys)
    counts = 1 + np.sum(cand <= ref[None, :] + delta, axis=1)
    n = len(T)
    return counts[None, :] > np.atleast_1d(alphas)[:, None] * (n + 1)


# -- many query points, one candidate response each ------------------------------
#
# Monte Carlo experiments ask "is y_j in the set built for x_j" for many fresh
# pairs against one training set.  These kernels batch over the pairs and
# return ``(len(alphas), J)`` masks.


def _pairs(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if xs.shape[0] != ys.shape[0]:
        raise ValueError(f"{xs.shape[0]} query points for {ys.shape[0]} responses")
    return xs, ys


def candidate_scores_many(C: ConformityScore, T: DataSet, xs, ys) -> np.ndarray:
    """``score((y_j, x_j), T)`` for every pair."""
    xs, ys = _pairs(xs, ys)
    J = ys.size
    if C.kind == "out_sample":
        C.evaluations += J
        return np.abs(ys - C.predictor.fit_predict_points(T.X, T.y, xs))
    return C.evaluate_designs(ys, xs, np.broadcast_to(T.X, (J, *T.X.shape)), np.broadcast_to(T.y, (J, len(T))))


def augmented_scores_many(C: ConformityScore, T: DataSet, xs, ys) -> np.ndarray:
    """``(J, n + 1)`` augmented scores; row ``j`` augments ``T`` with ``(y_j, x_j)``."""
    xs, ys = _pairs(xs, ys)
    J, n = ys.size, len(T)
    out = np.empty((J, n + 1))
    if C.kind == "in_sample":
        X3 = np.concatenate([np.broadcast_to(T.X, (J, *T.X.shape)), xs[:, None, :]], axis=1)
        Y = np.concatenate([np.broadcast_to(T.y, (J, n)), ys[:, None]], axis=1)
        C.evaluations += J * (n + 1)
        for i in range(n + 1):
            xq = xs if i == n else np.broadcast_to(T.X[i], xs.shape)
            out[:, i] = np.abs(Y[:, i] - C.predictor.fit_predict_designs(X3, Y, xq))
        return out
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        X3 = np.concatenate([np.broadcast_to(T.X[keep], (J, n - 1, T.dimension)), xs[:, None, :]], axis=1)
        Y = np.concatenate([np.broadcast_to(T.y[keep], (J, n - 1)), ys[:, None]], axis=1)
        out[:, i] = C.evaluate_designs(np.full(J, T.y[i]), np.broadcast_to(T.X[i], xs.shape), X3, Y)
        keep[i] = True
    out[:, n] = candidate_scores_many(C, T, xs, ys)
    return out


def full_conformal_mask_many(C: ConformityScore, T: DataSet, xs, ys, alphas, delta: float = 0.0) -> np.ndarray:
    return full_conformal_mask_from_scores(augmented_scores_many(C, T, xs, ys), alphas, delta)


def shortcut_mask_many(C: ConformityScore, T: DataSet, xs, ys, alphas, delta: float = 0.0, loo=None) -> np.ndarray:
    loo = loo_scores(C, T) if loo is None else loo
    G = build_ecdf(loo)
    cand = candidate_scores_many(C, T, xs, ys)
    thresholds = np.array([quantile(G, 1.0 - a) for a in np.atleast_1d(alphas)]) + delta
    return cand[None, :] <= thresholds[:, None]


def cross_conformal_mask_many(C: ConformityScore, T: DataSet, xs, ys, alphas, delta: float = 0.0, loo=None) -> np.ndarray:
    xs, ys = _pairs(xs, ys)
    n = len(T)
    if n < 2:
        raise ValueError("cross-conformal sets need at least two observations")
    ref = loo_scores(C, T) if loo is None else loo
    counts = np.ones(ys.size, dtype=int)
    for i in range(n):
        counts += candidate_scores_many(C, T.without(i), xs, ys) <= ref[i] + delta
    return counts[None, :] > np.atleast_1d(alphas)[:, None] * (n + 1)


def jackknife_mask_many(P: Predictor, T: DataSet, xs, ys, alphas, delta: float = 0.0, plus: bool = False) -> np.ndarray:
    """Membership in the symmetric Jackknife (or Jackknife+) interval per pair."""
    xs, ys = _pairs(xs, ys)
    n = len(T)
    if n < 2:
        raise ValueError("the Jackknife needs at least two observations")
    r = np.abs(loo_residuals(P, T))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if not plus:
        center = P.fit_predict_points(T.X, T.y, xs)
        q = sorted_quantiles(np.sort(r), 1.0 - alphas)
        return np.abs(ys - center)[None, :] <= (q + delta)[:, None]
    mu = np.stack([P.fit_predict_points(T.X[np.arange(n) != i], T.y[np.arange(n) != i], xs) for i in range(n)], axis=1)
    lows = np.sort(mu - r, axis=1)
    highs = np.sort(mu + r, axis=1)
    out = np.empty((alphas.size, ys.size), dtype=bool)
    for a, alpha in enumerate(alphas):
        k_lo = math.floor(alpha * (n + 1))
        k_hi = math.ceil((1 - alpha) * (n + 1))
        lo = lows[:, k_lo - 1] if 1 <= k_lo <= n else np.full(ys.size, -INF if k_lo < 1 else INF)
        hi = highs[:, k_hi - 1] if 1 <= k_hi <= n else np.full(ys.size, INF if k_hi > n else -INF)
        out[a] = (lo - delta <= ys) & (ys <= hi + delta)
    return out


METHODS = ("full", "shortcut", "cross", "jackknife", "jackknife_plus")


def method_mask_many(method: str, C: ConformityScore, T: DataSet, xs, ys, alphas, delta: float = 0.0, loo=None) -> np.ndarray:
    """Dispatch on a method name; Jackknife methods need an out-of-sample score."""
    if method == "full":
        return full_conformal_mask_many(C, T, xs, ys, alphas, delta)
    if method == "shortcut":
        return shortcut_mask_many(C, T, xs, ys, alphas, delta, loo)
    if method == "cross":
        return cross_conformal_mask_many(C, T, xs, ys, alphas, delta, loo)
    if method in ("jackknife", "jackknife_plus"):
        if C.kind != "out_sample":
            raise ContractError(f"{method} is defined for out-of-sample scores, got {C!r}")
        return jackknife_mask_many(C.predictor, T, xs, ys, alphas, delta, plus=method == "jackknife_plus")
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# -- grid realizations ----------------------------------------------------------


def _grid_union(mask_fn, C, T, x_new, cfg: ConformalConfig) -> IntervalUnion:
    grid = resolve_grid(C, T, x_new, cfg.grid)
    pts = grid.points()
    return union_from_mask(pts, mask_fn(pts)[0], grid)


def augmented_ecdf(C: ConformityScore, T: DataSet, x_new, y: float) -> StepFunction:
    if len(T) < 1:
        raise ValueError("training set must be nonempty")
    return build_ecdf(augmented_scores(C, T, x_new, [y])[0])


def _require_nonnegative_delta(cfg: ConformalConfig, what: str) -> None:
    if cfg.delta < 0:
        raise ValueError(f"{what} sets are inflated, delta must be >= 0 (got {cfg.delta})")


def full_conformal_set(C: ConformityScore, T: DataSet, x_new, cfg: ConformalConfig) -> IntervalUnion:
    _require_nonnegative_delta(cfg, "full conformal")
    return _grid_union(lambda ys: full_conformal_mask(C, T, x_new, ys, [cfg.alpha], cfg.delta), C, T, x_new, cfg)


def shortcut_set(C: ConformityScore, T: DataSet, x_new, cfg: ConformalConfig) -> IntervalUnion:
    if len(T) < 2:
        raise ValueError("shortcut sets need at least two observations")
    loo = loo_scores(C, T)
    return _grid_union(lambda ys: shortcut_mask(C, T, x_new, ys, [cfg.alpha], cfg.delta, loo), C, T, x_new, cfg)


def cross_conformal_set(C: ConformityScore, T: DataSet, x_new, cfg: ConformalConfig) -> IntervalUnion:
    _require_nonnegative_delta(cfg, "cross-conformal")
    if len(T) < 2:
        raise ValueError("cross-conformal sets need at least two observations")
    loo = loo_scores(C, T)
    return _grid_union(lambda ys: cross_conformal_mask(C, T, x_new, ys, [cfg.alpha], cfg.delta, loo), C, T, x_new, cfg)


def full_conformal_contains(C: ConformityScore, T: DataSet, x_new, y: float, alpha: float, delta: float = 0.0) -> bool:
    return bool(full_conformal_mask(C, T, x_new, [y], [alpha], delta)[0, 0])


# -- closed forms -------------------------------------------------------------------


def _symmetric_interval(center: float, half: float, scale: float = 1.0) -> IntervalUnion:
    if math.isnan(half) or half < 0:
        return IntervalUnion.empty()
    if math.isinf(half):
        return IntervalUnion.real_line()
    return IntervalUnion.closed(center - scale * half, center + scale * half)


def shortcut_affine(coeffs: AffineCoefficients, q: float, delta: float) -> IntervalUnion:
    """Exact ``{y : |a y - b| <= q + delta}``."""
    t = q + delta
    if math.isnan(t) or t < 0:
        return IntervalUnion.empty()
    a, b = coeffs.a, coeffs.b
    if a == 0:
        return IntervalUnion.real_line() if abs(b) <= t else IntervalUnion.empty()
    if math.isinf(t):
        return IntervalUnion.real_line()
    lo, hi = (b - t) / a, (b + t) / a
    return IntervalUnion.closed(min(lo, hi), max(lo, hi))


def _require_unique_features(T: DataSet) -> None:
    if np.unique(T.X, axis=0).shape[0] != len(T):
        raise ContractError("training features must be unique; see augment_unique_id")


def shortcut_knn(k: int, T: DataSet, x_new, alpha: float, delta: float) -> IntervalUnion:
    """Exact shortcut interval for the in-sample kNN score, ``k >= 2``."""
    if not 2 <= k <= len(T):
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={len(T)}")
    _require_unique_features(T)
    x = _xvec(x_new)
    center = predict(KNN(k - 1), x, T)
    q = quantile(build_ecdf(loo_scores(in_sample(KNN(k)), T)), 1.0 - alpha)
    return _symmetric_interval(center, q + delta, k / (k - 1))


def shortcut_closed_form(C: ConformityScore, T: DataSet, x_new, alpha: float, delta: float) -> IntervalUnion:
    """Exact shortcut set where one exists: out-of-sample scores, affine or kNN in-sample scores."""
    if len(T) < 2:
        raise ValueError("shortcut sets need at least two observations")
    x = _xvec(x_new)
    if C.kind == "out_sample":
        coeffs = AffineCoefficients(1.0, predict(C.predictor, x, T))
        return shortcut_affine(coeffs, quantile(build_ecdf(loo_scores(C, T)), 1.0 - alpha), delta)
    if C.kind == "in_sample" and isinstance(C.predictor, KNN) and C.predictor.k >= 2:
        return shortcut_knn(C.predictor.k, T, x, alpha, delta)
    if C.kind == "in_sample" and C.predictor.affine:
        coeffs = affine_coefficients(C.predictor, x, T)
        return shortcut_affine(coeffs, quantile(build_ecdf(loo_scores(C, T)), 1.0 - alpha), delta)
    raise ContractError(f"no closed form for {C!r}")


def loo_predictions(P: Predictor, T: DataSet, x) -> np.ndarray:
    """``P(x, T without t_i)`` for every ``i``."""
    x = _xvec(x)
    return np.array([predict(P, x, T.without(i)) for i in range(len(T))])


def loo_residuals(P: Predictor, T: DataSet) -> np.ndarray:
    return np.array([T.y[i] - predict(P, T.X[i], T.without(i)) for i in range(len(T))])


def jackknife_symmetric(P: Predictor, T: DataSet, x_new, alpha: float, delta: float) -> IntervalUnion:
    """``P(x_new, T) ± (Q_{1-alpha}(|LOO residuals|) + delta)``."""
    if len(T) < 2:
        raise ValueError("the Jackknife needs at least two observations")
    center = predict(P, _xvec(x_new), T)
    q = quantile(build_ecdf(np.abs(loo_residuals(P, T))), 1.0 - alpha)
    return _symmetric_interval(center, q + delta)


def jackknife_plus_symmetric(P: Predictor, T: DataSet, x_new, alpha: float, delta: float) -> IntervalUnion:
    """Jackknife+ with the usual order-statistic ranks, then widened by ``delta``.

    Lower end: the ``floor(alpha (n+1))``-th smallest of ``mu_{-i} - |u_i|``;
    upper end: the ``ceil((1-alpha)(n+1))``-th smallest of ``mu_{-i} + |u_i|``.
    Ranks outside ``1..n`` give infinite ends.
    """
    n = len(T)
    if n < 2:
        raise ValueError("the Jackknife+ needs at least two observations")
    x = _xvec(x_new)
    mu = loo_predictions(P, T, x)
    r = np.abs(loo_residuals(P, T))
    lows = np.sort(mu - r)
    highs = np.sort(mu + r)
    k_lo = math.floor(alpha * (n + 1))
    k_hi = math.ceil((1 - alpha) * (n + 1))
    lo = lows[k_lo - 1] if 1 <= k_lo <= n else (-INF if k_lo < 1 else INF)
    hi = highs[k_hi - 1] if 1 <= k_hi <= n else (INF if k_hi > n else -INF)
    lo, hi = lo - delta, hi + delta
    if lo > hi:
        return IntervalUnion.empty()
    return IntervalUnion([Interval(lo, hi, True, True)])


# -- deterministic diagnostics ----------------------------------------------------


def gauge_hat_sides(C: ConformityScore, T: DataSet, x_new, y: float, delta: float) -> tuple[float, float]:
    """Gauge between the augmented and leave-one-out score ECDFs, and its bound."""
    n = len(T)
    if n < 2:
        raise ValueError("need at least two observations")
    aug = augmented_scores(C, T, x_new, [y])[0]
    loo = loo_scores(C, T)
    lhs = levy_gauge(build_ecdf(aug), build_ecdf(loo), delta).epsilon
    rhs = (1 + int(np.sum(np.abs(aug[:n] - loo) > delta))) / (n + 1)
    return lhs, rhs


def check_gauge_hat_bound(C: ConformityScore, T: DataSet, x_new, y: float, delta: float) -> bool:
    lhs, rhs = gauge_hat_sides(C, T, x_new, y, delta)
    return lhs <= rhs + RATIONAL_SLACK


def sandwich_masks(C, T, x_new, alpha, eps, delta1, delta2, grid: GridSpec) -> dict[str, np.ndarray]:
    ys = grid.points()
    n = len(T)
    loo = loo_scores(C, T)
    cand_full = C.evaluate(ys, _xvec(x_new), T.X, T.y)
    cand_loo = loo_candidate_scores(C, T, x_new, ys)
    unstable = np.sum(np.abs(cand_full[:, None] - cand_loo) >= delta2, axis=1) > n * eps - 1
    return {
        "cc_hi": cross_conformal_mask(C, T, x_new, ys, [alpha + eps], delta1, loo)[0],
        "sc_lo": shortcut_mask(C, T, x_new, ys, [alpha], delta1 + delta2, loo)[0],
        "sc_hi": shortcut_mask(C, T, x_new, ys, [alpha + eps], delta1, loo)[0],
        "cc_lo": cross_conformal_mask(C, T, x_new, ys, [alpha], delta1 + delta2, loo)[0],
        "unstable": unstable,
    }


def check_sandwich(C, T, x_new, alpha, eps, delta1, delta2, grid: GridSpec) -> bool:
    """Grid check that cross-conformal and shortcut sets nest up to the unstable region."""
    m = sandwich_masks(C, T, x_new, alpha, eps, delta1, delta2, grid)
    first = np.all(~m["cc_hi"] | m["sc_lo"] | m["unstable"])
    second = np.all(~m["sc_hi"] | m["cc_lo"] | m["unstable"])
    return bool(first and second)
