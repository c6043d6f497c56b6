"""Right-continuous step functions, empirical CDFs and extended quantiles."""

from __future__ import annotations

import math

import numpy as np

INF = math.inf


class StepFunction:
    """Right-continuous nondecreasing step function with values in [0, 1].

    ``values[k]`` is attained on ``[breakpoints[k], breakpoints[k+1])`` and the
    function is 0 left of the first breakpoint.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values):
        bp = np.asarray(breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float).reshape(-1)
        if bp.shape != vals.shape:
            raise ValueError("breakpoints and values must have the same length")
        if bp.size and (np.any(np.diff(bp) <= 0) or not np.all(np.isfinite(bp))):
            raise ValueError("breakpoints must be finite and strictly increasing")
        if vals.size and (np.any(np.diff(vals) < 0) or vals[0] < 0 or vals[-1] > 1):
            raise ValueError("values must be nondecreasing within [0, 1]")
        bp.setflags(write=False)
        vals.setflags(write=False)
        self.breakpoints = bp
        self.values = vals

    def __call__(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)] if self.values.size else 0.0, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="left") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)] if self.values.size else 0.0, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sup(self) -> float:
        return float(self.values[-1]) if self.values.size else 0.0

    def rescaled(self, c: float) -> StepFunction:
        """The function ``t -> F(c t)`` for ``c > 0``."""
        if not c > 0:
            raise ValueError("scale must be positive")
        return StepFunction(self.breakpoints / c, self.values)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"StepFunction({len(self.breakpoints)} jumps, sup={self.sup:g})"


def build_ecdf(values) -> StepFunction:
    """ECDF with mass 1/n per value; tied values stack into one jump."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("cannot build an ECDF from an empty sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("ECDF values must be finite")
    uniq, counts = np.unique(v, return_counts=True)
    return StepFunction(uniq, np.cumsum(counts) / v.size)


def quantile(F: StepFunction, alpha: float) -> float:
    """``inf{x : F(x) >= alpha}`` extended to every real ``alpha``."""
    if alpha <= 0:
        return -INF
    k = int(np.searchsorted(F.values, alpha, side="left"))
    if k >= F.values.size:
        return INF
    return float(F.breakpoints[k])


def left_limit(F: StepFunction, t: float) -> float:
    return F.left_limit(t)


def order_rank(level, size: int):
    """Smallest ``k`` in ``1..size`` with ``k/size >= level``.

    Returns 0 for ``level <= 0`` and ``size + 1`` when no rank qualifies.  The
    comparison uses the same ``k/size`` floats as :func:`build_ecdf`, so
    ``sorted(v)[k-1]`` is the ECDF quantile whenever ``1 <= k <= size``.
    """
    levels = np.arange(1, size + 1) / size
    lv = np.asarray(level, dtype=float)
    k = np.searchsorted(levels, lv, side="left") + 1
    k = np.where(lv <= 0, 0, k)
    return int(k) if np.ndim(k) == 0 else k


def sorted_quantiles(sorted_values: np.ndarray, levels) -> np.ndarray:
    """ECDF quantiles read off presorted samples along the last axis."""
    sv = np.asarray(sorted_values, dtype=float)
    size = sv.shape[-1]
    ranks = np.atleast_1d(order_rank(levels, size))
    padded = np.concatenate(
        [np.full(sv.shape[:-1] + (1,), -INF), sv, np.full(sv.shape[:-1] + (1,), INF)], axis=-1
    )
    return padded[..., ranks]
