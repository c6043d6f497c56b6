"""Shortcut sets for unimodal scores by bisection and golden-section search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import INF, ContractError, DataSet, Interval, IntervalUnion
from .ecdf import build_ecdf, quantile
from .scores import ConformityScore, loo_scores

GOLDEN_G = (math.sqrt(5) - 1) / 2
PHI = (math.sqrt(5) + 1) / 2


class CountingScore:
    """``y -> score((y, x_new), T)`` with an evaluation counter."""

    def __init__(self, C: ConformityScore, x_new, T: DataSet):
        self.C = C
        self.x = np.asarray(x_new, dtype=float).reshape(-1)
        self.T = T
        self.calls = 0

    def __call__(self, y: float) -> float:
        self.calls += 1
        return float(self.C.evaluate(y, self.x, self.T.X, self.T.y)[0])


def _as_counting(C, x_new, T) -> CountingScore:
    return C if isinstance(C, CountingScore) else CountingScore(C, x_new, T)


def bisection_on(f: Callable[[float], float], b: float, L: float, U: float, eps: float) -> tuple[float, float]:
    """Shrink ``[L, U]`` (either orientation) keeping ``f(u) > b >= f(l)``.

    Endpoint values are not re-evaluated; the caller vouches for them.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    l, u = L, U
    while abs(l - u) > eps:
        m = (l + u) / 2
        if f(m) > b:
            u = m
        else:
            l = m
    return l, u


def bisection(C, x_new, T: DataSet, b: float, L: float, U: float, eps: float) -> tuple[float, float]:
    """Bisection for the threshold crossing, with an entry check of ``score(U) > b >= score(L)``.

    The two entry evaluations are bookkeeping only and are not counted on a
    :class:`CountingScore` passed in as ``C``.
    """
    f = _as_counting(C, x_new, T)
    before = f.calls
    ok = f(U) > b >= f(L)
    f.calls = before
    if not ok:
        raise ContractError("bisection needs score(U) > b >= score(L)")
    return bisection_on(f, b, L, U, eps)


def bisection_iteration_bound(L: float, U: float, eps: float) -> int:
    return max(0, math.ceil(math.log2(abs(L - U)) - math.log2(eps))) if abs(L - U) > 0 else 0


def golden_minimizer_on(f: Callable[[float], float], L: float, U: float, eps: float) -> tuple[float, float]:
    """Golden-section search returning ``(m, M)`` with ``f(m) <= f(M)``."""
    if not L < U:
        raise ValueError("golden_minimizer needs L < U")
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = GOLDEN_G
    c_L, c_U = f(L), f(U)
    s, t = L + (1 - g) * (U - L), L + g * (U - L)
    c_s, c_t = f(s), f(t)
    while U - L > eps:
        if c_s > c_t:
            L, c_L, s = s, c_s, t
            t = L + g * (U - L)
            c_s, c_t = c_t, f(t)
        else:
            U, c_U, t = t, c_t, s
            s = L + (1 - g) * (U - L)
            c_t, c_s = c_s, f(s)
    if c_L < c_U:
        return L, U
    return U, L


def golden_minimizer(C, x_new, T: DataSet, L: float, U: float, eps: float) -> tuple[float, float]:
    return golden_minimizer_on(_as_counting(C, x_new, T), L, U, eps)


def golden_refit_bound(L: float, U: float, eps: float) -> int:
    return 4 + max(0, math.ceil((math.log2(U - L) - math.log2(eps)) / -math.log2(GOLDEN_G)))


def refit_bound(K: int, eps: float) -> int:
    """``floor(10 + (K + 1 + log2(1/eps)) (2 + 1/log2(phi)))``."""
    return math.floor(10 + (K + 1 + math.log2(1 / eps)) * (2 + 1 / math.log2(PHI)))


@dataclass(frozen=True)
class UnimodalRunReport:
    interval: IntervalUnion
    refits: int
    bound: int
    epsilon: float
    K: int
    branch: str = ""


def threshold_refits(C: ConformityScore, n: int) -> int:
    """Fits needed for the leave-one-out quantile: one for in-sample or model-free scores."""
    return n if C.kind == "out_sample" else 1


def shortcut_unimodal(
    C: ConformityScore,
    T: DataSet,
    x_new,
    alpha: float,
    delta: float,
    eps: float,
    K: int,
    threshold: float | None = None,
) -> UnimodalRunReport:
    """Interval containing the shortcut set of a unimodal score.

    ``threshold`` overrides ``Q_{1-alpha}(G) + delta`` when the caller already
    has it.  ``refits`` counts the threshold fits plus one per score evaluation.
    """
    if not C.unimodal_hint:
        raise ContractError(f"{C!r} is not flagged unimodal")
    if not (0 < eps <= 2.0**K):
        raise ValueError(f"eps must lie in (0, 2**K], got eps={eps}, K={K}")
    if threshold is None:
        b = quantile(build_ecdf(loo_scores(C, T)), 1.0 - alpha) + delta
    else:
        b = threshold
    f = CountingScore(C, x_new, T)
    edge = 2.0**K

    def report(interval: IntervalUnion, branch: str) -> UnimodalRunReport:
        return UnimodalRunReport(interval, threshold_refits(C, len(T)) + f.calls, refit_bound(K, eps), eps, K, branch)

    c1, c2 = f(-edge), f(edge)
    if max(c1, c2) <= b:
        return report(IntervalUnion.real_line(), "full_line")
    if c1 <= b < c2:
        _, u = bisection_on(f, b, -edge, edge, eps)
        return report(IntervalUnion([Interval(-INF, u, False, True)]), "left_half_line")
    if c2 <= b < c1:
        _, u = bisection_on(f, b, edge, -edge, eps)
        return report(IntervalUnion([Interval(u, INF, True, False)]), "right_half_line")
    m, M = golden_minimizer_on(f, -edge, edge, eps)
    if m == -edge:
        return report(IntervalUnion([Interval(-INF, -edge + eps, False, False)]), "minimum_left")
    if m == edge:
        return report(IntervalUnion([Interval(edge - eps, INF, False, False)]), "minimum_right")
    if f(m) > b:
        lo, hi = min(m, M), max(m, M)
        return report(IntervalUnion([Interval(lo, hi, False, False)]), "minimum_outside")
    _, l1 = bisection_on(f, b, m, -edge, eps)
    _, u1 = bisection_on(f, b, m, edge, eps)
    return report(IntervalUnion([Interval(l1, u1, True, True)]), "bracketed")
