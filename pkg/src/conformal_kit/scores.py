"""Conformity scores and their stability diagnostics.

A score is evaluated as ``score((y, x), T)``, always against a training set
that excludes the scored point.  The batched entry points take responses of
shape ``(B, m)`` so that grids of candidate responses share one design.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DataSet, Observation, RngSeed
from .predictors import InstabilitySummary, Predictor, predictor_from_name


@dataclass(eq=False)
class ConformityScore:
    """``kind`` is ``in_sample``, ``out_sample`` or ``custom``.

    ``custom`` scores call ``handle(y, x, X, Y) -> float`` with the training
    features ``X`` and responses ``Y`` of the set the candidate is scored against.
    """

    kind: str
    predictor: Predictor | None = None
    handle: Callable[[float, np.ndarray, np.ndarray, np.ndarray], float] | None = None
    unimodal_hint: bool = False
    evaluations: int = field(default=0, init=False)

    def __post_init__(self):
        if self.kind not in ("in_sample", "out_sample", "custom"):
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind == "custom" and self.handle is None:
            raise ValueError("custom scores need a handle")
        if self.kind != "custom" and self.predictor is None:
            raise ValueError(f"{self.kind} scores need a predictor")

    def __repr__(self):
        inner = repr(self.predictor) if self.predictor is not None else "custom"
        return f"ConformityScore({self.kind}, {inner})"

    def evaluate(self, y, x, X, Y) -> np.ndarray:
        """Score candidates ``(y_b, x)`` against training sets ``(X, Y_b)``.

        ``y`` is scalar or ``(B,)``; ``Y`` is ``(m,)`` or ``(B, m)``.  Returns ``(B,)``.
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        X = np.asarray(X, dtype=float)
        yv = np.atleast_1d(np.asarray(y, dtype=float))
        Yb = np.asarray(Y, dtype=float)
        B = max(yv.shape[0], Yb.shape[0] if Yb.ndim == 2 else 1)
        yv = np.broadcast_to(yv, (B,))
        self.evaluations += B
        if self.kind == "out_sample":
            return np.abs(yv - self.predictor.fit_predict(X, Yb, x))
        if self.kind == "in_sample":
            X_aug = np.vstack([X, x])
            Y_rows = np.broadcast_to(Yb, (B, X.shape[0])) if Yb.ndim == 1 else Yb
            Y_aug = np.hstack([Y_rows, yv[:, None]])
            return np.abs(yv - self.predictor.fit_predict(X_aug, Y_aug, x))
        Y_rows = np.broadcast_to(Yb, (B, X.shape[0])) if Yb.ndim == 1 else Yb
        return np.array([float(self.handle(float(yy), x, X, row)) for yy, row in zip(yv, Y_rows)])

    def evaluate_designs(self, y, xq, X3, Y) -> np.ndarray:
        """Score ``(y_b, xq_b)`` against its own training set ``(X3[b], Y[b])``.

        ``y`` is ``(B,)``, ``xq`` is ``(B, p)``, ``X3`` is ``(B, m, p)`` and ``Y``
        is ``(B, m)``; broadcast views are fine.  Returns ``(B,)``.
        """
        yv = np.asarray(y, dtype=float)
        xq = np.asarray(xq, dtype=float)
        X3 = np.asarray(X3, dtype=float)
        Y = np.asarray(Y, dtype=float)
        B = yv.shape[0]
        self.evaluations += B
        if self.kind == "out_sample":
            return np.abs(yv - self.predictor.fit_predict_designs(X3, Y, xq))
        if self.kind == "in_sample":
            X_aug = np.concatenate([X3, xq[:, None, :]], axis=1)
            Y_aug = np.concatenate([Y, yv[:, None]], axis=1)
            return np.abs(yv - self.predictor.fit_predict_designs(X_aug, Y_aug, xq))
        return np.array([float(self.handle(float(yv[b]), xq[b], X3[b], Y[b])) for b in range(B)])

    def member_scores(self, X, Y) -> np.ndarray:
        """``score(t_i, D without t_i)`` for every row ``i`` of ``D = (X, Y)``.

        ``Y`` is ``(N,)`` or ``(B, N)``; returns the matching shape.  In-sample
        scores refit once on ``D`` because ``(D without t_i) + t_i`` is ``D``
        for a symmetric predictor.
        """
        X = np.asarray(X, dtype=float)
        Yb = np.asarray(Y, dtype=float)
        single = Yb.ndim == 1
        Yb = Yb[None, :] if single else Yb
        B, N = Yb.shape
        if self.kind == "in_sample":
            self.evaluations += B * N
            fitted = self.predictor.fit_predict_points(X, Yb, X)
            out = np.abs(Yb - fitted)
        else:
            out = np.empty((B, N))
            keep = np.ones(N, dtype=bool)
            for i in range(N):
                keep[i] = False
                out[:, i] = self.evaluate(Yb[:, i], X[i], X[keep], Yb[:, keep])
                keep[i] = True
        return out[0] if single else out


def score(C: ConformityScore, candidate: Observation, T: DataSet) -> float:
    if len(T) == 0:
        raise ValueError("training set must be nonempty")
    return float(C.evaluate(candidate.response, candidate.features, T.X, T.y)[0])


def loo_scores(C: ConformityScore, T: DataSet) -> np.ndarray:
    """Leave-one-out scores ``score(t_i, T without t_i)``."""
    if len(T) < 2:
        raise ValueError("leave-one-out scores need at least two observations")
    return C.member_scores(T.X, T.y)


def in_sample(P: Predictor, unimodal_hint: bool = True) -> ConformityScore:
    return ConformityScore("in_sample", predictor=P, unimodal_hint=unimodal_hint)


def out_sample(P: Predictor) -> ConformityScore:
    return ConformityScore("out_sample", predictor=P, unimodal_hint=True)


def custom(handle, unimodal_hint: bool = False) -> ConformityScore:
    return ConformityScore("custom", handle=handle, unimodal_hint=unimodal_hint)


def score_from_name(name: str) -> ConformityScore:
    """Parse ``in-sample:<predictor>`` or ``out-sample:<predictor>``."""
    head, _, rest = name.strip().lower().partition(":")
    if not rest:
        raise ValueError(f"score {name!r} needs a predictor, e.g. out-sample:mean")
    P = predictor_from_name(rest)
    if head in ("in-sample", "in_sample", "in"):
        return in_sample(P)
    if head in ("out-sample", "out_sample", "out"):
        return out_sample(P)
    raise ValueError(f"unknown score kind {head!r}")


@dataclass(frozen=True)
class ScoreInstability:
    deletion: InstabilitySummary
    swap: InstabilitySummary
    mean_score: float

    @property
    def mean_abs(self) -> float:
        return self.deletion.mean_abs

    @property
    def q95(self) -> float:
        return self.deletion.q95

    def exceed_prob(self, delta: float) -> float:
        return self.deletion.exceed_prob(delta)


def estimate_score_instability(C: ConformityScore, gen, n: int, reps: int, rng: RngSeed) -> ScoreInstability:
    """Monte Carlo of the deletion and swap instability coefficients.

    Deletion: ``|C(t_new, T) - C(t_new, T without t_n)|``.  Swap: ``t_1`` is
    replaced by an independent copy.  ``gen(n, rng)`` returns ``(T, t_new)``;
    the swap copy is the first observation of a fresh one-point draw.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    dele = np.empty(reps)
    swap = np.empty(reps)
    base = np.empty(reps)
    for r in range(reps):
        T, t_new = gen(n, rng.child(r))
        copy, _ = gen(1, rng.child(r).child(1))
        s_full = score(C, t_new, T)
        dele[r] = abs(s_full - score(C, t_new, T.without(len(T) - 1)))
        swap[r] = abs(s_full - score(C, t_new, T.replaced(0, copy[0])))
        base[r] = s_full
    summ = lambda v: InstabilitySummary(float(v.mean()), float(np.quantile(v, 0.95)), v)  # noqa: E731
    return ScoreInstability(summ(dele), summ(swap), float(base.mean()))
