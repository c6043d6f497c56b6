"""Lévy gauge between step functions, the Lévy metric, and related bounds.

All suprema are evaluated exactly.  For right-continuous step functions the
difference ``F(t) - G(t + delta)`` is itself a right-continuous step function
of ``t`` whose pieces start at the jumps of ``F`` or at the jumps of ``G``
shifted left by ``delta``, so evaluating it there is enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ecdf import StepFunction, quantile

METRIC_TOL = 1e-9
# Gauge values are rationals k/n; sums of them are compared with this slack.
LEVEL_SLACK = 1e-12


@dataclass(frozen=True)
class GaugeResult:
    epsilon: float
    delta: float

    def __float__(self):
        return self.epsilon


def _one_sided(F: StepFunction, G: StepFunction, delta: float) -> float:
    """``sup_t F(t) - G(t + delta)``, using G's breakpoints shifted by ``-delta``."""
    shifted = G.breakpoints - delta
    ts = np.concatenate([F.breakpoints, shifted])
    if ts.size == 0:
        return 0.0
    f_idx = np.searchsorted(F.breakpoints, ts, side="right") - 1
    g_idx = np.searchsorted(shifted, ts, side="right") - 1
    fv = np.where(f_idx >= 0, F.values[np.maximum(f_idx, 0)] if F.values.size else 0.0, 0.0)
    gv = np.where(g_idx >= 0, G.values[np.maximum(g_idx, 0)] if G.values.size else 0.0, 0.0)
    return float(np.max(fv - gv))


def levy_gauge(F: StepFunction, G: StepFunction, delta: float) -> GaugeResult:
    if delta < 0 or math.isnan(delta):
        raise ValueError(f"delta must be nonnegative, got {delta}")
    eps = max(_one_sided(F, G, delta), _one_sided(G, F, delta), 0.0)
    return GaugeResult(min(eps, 1.0), float(delta))


def sup_distance(F: StepFunction, G: StepFunction) -> float:
    return levy_gauge(F, G, 0.0).epsilon


def levy_metric(F: StepFunction, G: StepFunction, tol: float = METRIC_TOL) -> float:
    """Lévy metric by bisection on ``eps``: feasible iff ``gauge(F, G, eps) <= eps``."""
    if levy_gauge(F, G, 0.0).epsilon == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if levy_gauge(F, G, mid).epsilon <= mid:
            hi = mid
        else:
            lo = mid
    return hi


def _squared_gap_integral(F: StepFunction, G: StepFunction, lower: float, upper: float) -> float:
    """Exact integral of ``|F - G|**2`` over ``[lower, upper]`` (bounds may be infinite)."""
    cuts = np.union1d(F.breakpoints, G.breakpoints)
    if cuts.size == 0:
        return 0.0
    if math.isinf(lower) or math.isinf(upper):
        # outside the breakpoint hull both functions are constant: 0 on the left,
        # sup on the right, so only a sup mismatch makes the integral diverge
        if math.isinf(upper) and F.sup != G.sup:
            return math.inf
    lo = max(lower, cuts[0])
    hi = min(upper, cuts[-1])
    if lo >= hi:
        return 0.0
    inner = cuts[(cuts > lo) & (cuts < hi)]
    edges = np.concatenate([[lo], inner, [hi]])
    left = edges[:-1]
    gap = F(left) - G(left)
    total = float(np.sum(gap**2 * np.diff(edges)))
    if upper > cuts[-1] and F.sup != G.sup:
        total += (F.sup - G.sup) ** 2 * (upper - max(lower, cuts[-1]))
    return total


def gauge_upper_bounds(F: StepFunction, G: StepFunction, delta: float, K: float, mu: float) -> tuple[float, float]:
    """Windowed and global upper bounds on the gauge from the squared L2 gap."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if K < 0:
        raise ValueError("K must be nonnegative")
    window = _squared_gap_integral(F, G, -K + mu - delta, K + mu + 2 * delta)
    windowed = 1.0 - F(K + mu) + F(-K + mu) + math.sqrt(window / delta)
    full = _squared_gap_integral(F, G, -math.inf, math.inf)
    return windowed, math.sqrt(full / delta)


def check_quantile_inequality(F: StepFunction, G: StepFunction, delta: float, alpha: float, slack: float = LEVEL_SLACK) -> bool:
    """Quantiles of G are bracketed by gauge-shifted quantiles of F, up to ``delta``.

    The shifted levels ``alpha -/+ gauge`` are rational; ``slack`` keeps their
    floating-point rounding from stepping over an ECDF level they equal exactly.
    """
    ld = levy_gauge(F, G, delta).epsilon
    lower = quantile(F, alpha - ld - slack) - delta
    upper = quantile(F, alpha + ld + slack) + delta
    q = quantile(G, alpha)
    return lower <= q <= upper
