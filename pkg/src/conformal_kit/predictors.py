"""Symmetric point predictors with an exact refit ledger.

Every predictor is fitted on a feature matrix ``X`` of shape ``(m, p)`` and a
response array ``Y`` of shape ``(m,)`` or ``(B, m)``.  A batch of ``B``
response vectors sharing one design counts as ``B`` refits: each row is a
distinct training set, the batch only shares the design-dependent algebra.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DataSet, RngSeed, UnsupportedError


class RefitLedger:
    """Thread-safe refit counter."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._count += int(k)

    @property
    def count(self) -> int:
        return self._count


def _as_batch(Y) -> tuple[np.ndarray, bool]:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        return Y[None, :], True
    return Y, False


def _check_inputs(X, Y, x):
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    Yb, single = _as_batch(Y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set must be nonempty")
    if Yb.shape[1] != X.shape[0]:
        raise ValueError(f"{Yb.shape[1]} responses for {X.shape[0]} feature rows")
    if x.shape[0] != X.shape[1]:
        raise ValueError(f"query dimension {x.shape[0]} != training dimension {X.shape[1]}")
    return X, Yb, x, single


class Predictor:
    """Base class.  Subclasses implement :meth:`_predict_batch`."""

    kind = "abstract"
    #: prediction is affine in the training responses for fixed features
    affine = False

    def __init__(self):
        self.ledger = RefitLedger()

    @property
    def refit_counter(self) -> int:
        return self.ledger.count

    def fit_predict(self, X, Y, x):
        """Train on ``(X, Y)`` and predict at ``x``; batched over rows of ``Y``."""
        X, Yb, x, single = _check_inputs(X, Y, x)
        self._validate(X)
        self.ledger.add(Yb.shape[0])
        out = self._predict_batch(X, Yb, x)
        return float(out[0]) if single else out

    def fit_predict_points(self, X, Y, Xq):
        """One training set, several query points.  Counts a single refit.

        Only meaningful for predictors whose fit does not depend on the query;
        the black-box adapter counts one refit per query instead.
        """
        X = np.asarray(X, dtype=float)
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        Yb, single = _as_batch(Y)
        self._validate(X)
        self.ledger.add(Yb.shape[0])
        out = np.stack([self._predict_batch(X, Yb, xq) for xq in Xq], axis=-1)
        return out[0] if single else out

    def fit_predict_designs(self, X3, Y, xq):
        """Row-wise fits: design ``X3[b]`` with responses ``Y[b]``, queried at ``xq[b]``.

        ``X3`` is ``(B, m, p)``, ``Y`` is ``(B, m)``, ``xq`` is ``(B, p)``.  Counts
        ``B`` refits.  Results agree with :meth:`fit_predict` up to rounding.
        """
        X3 = np.asarray(X3, dtype=float)
        Y = np.asarray(Y, dtype=float)
        xq = np.asarray(xq, dtype=float)
        if X3.ndim != 3 or Y.shape != X3.shape[:2] or xq.shape != (X3.shape[0], X3.shape[2]):
            raise ValueError(f"inconsistent design batch shapes {X3.shape}, {Y.shape}, {xq.shape}")
        if X3.shape[1] == 0:
            raise ValueError("training set must be nonempty")
        self._validate(X3[0])
        self.ledger.add(X3.shape[0])
        return self._predict_designs(X3, Y, xq)

    def _predict_designs(self, X3, Y, xq):
        return np.array([self._predict_batch(X3[b], Y[b : b + 1], xq[b])[0] for b in range(X3.shape[0])])

    def _validate(self, X):
        pass

    def _predict_batch(self, X: np.ndarray, Y: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class ConstantZero(Predictor):
    kind = "constant_zero"
    affine = True

    def _predict_batch(self, X, Y, x):
        return np.zeros(Y.shape[0])

    def _predict_designs(self, X3, Y, xq):
        return np.zeros(Y.shape[0])


class MeanOnly(Predictor):
    kind = "mean_only"
    affine = True

    def _predict_batch(self, X, Y, x):
        return Y.mean(axis=1)

    def _predict_designs(self, X3, Y, xq):
        return Y.mean(axis=1)


class Ridge(Predictor):
    """Penalized least squares with an intercept column.

    ``lam = 0`` is ordinary least squares.  Singular systems use the
    minimum-norm solution so that ``p >= n`` designs still predict.
    """

    kind = "ridge"
    affine = True

    def __init__(self, lam: float = 1.0, penalize_intercept: bool = False):
        super().__init__()
        if lam < 0:
            raise ValueError("ridge penalty must be nonnegative")
        self.lam = float(lam)
        self.penalize_intercept = penalize_intercept

    def weights(self, X: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Linear weights ``w`` with prediction ``w @ y``."""
        Z = np.hstack([np.ones((X.shape[0], 1)), X])
        z = np.concatenate([[1.0], x])
        if self.lam == 0.0:
            return z @ np.linalg.pinv(Z)
        D = np.full(Z.shape[1], self.lam)
        if not self.penalize_intercept:
            D[0] = 0.0
        gram = Z.T @ Z + np.diag(D)
        try:
            coef = np.linalg.solve(gram, Z.T)
        except np.linalg.LinAlgError:
            coef = np.linalg.pinv(gram) @ Z.T
        return z @ coef

    def _predict_batch(self, X, Y, x):
        return Y @ self.weights(X, x)

    def _predict_designs(self, X3, Y, xq):
        B, m, _ = X3.shape
        Z = np.concatenate([np.ones((B, m, 1)), X3], axis=2)
        z = np.concatenate([np.ones((B, 1)), xq], axis=1)
        if self.lam == 0.0:
            coef = np.linalg.pinv(Z)
        else:
            D = np.full(Z.shape[2], self.lam)
            if not self.penalize_intercept:
                D[0] = 0.0
            gram = np.einsum("bmi,bmj->bij", Z, Z) + np.diag(D)
            coef = np.linalg.solve(gram, np.swapaxes(Z, 1, 2))
        w = np.einsum("bi,bim->bm", z, coef)
        return np.einsum("bm,bm->b", w, Y)

    def __repr__(self):
        return f"Ridge(lam={self.lam:g})"


class OLS(Ridge):
    kind = "ols"

    def __init__(self):
        super().__init__(0.0)

    def __repr__(self):
        return "OLS()"


class KNN(Predictor):
    """Average of the ``k`` nearest training responses (Euclidean, ties to lower index)."""

    kind = "knn"

    def __init__(self, k: int):
        super().__init__()
        if int(k) < 1:
            raise ValueError("k must be a positive integer")
        self.k = int(k)

    def neighbors(self, X, x) -> np.ndarray:
        d = np.sum((X - x) ** 2, axis=1)
        return np.argsort(d, kind="stable")[: self.k]

    def _validate(self, X):
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds training size {X.shape[0]}")

    def _predict_batch(self, X, Y, x):
        return Y[:, self.neighbors(X, x)].mean(axis=1)

    def _predict_designs(self, X3, Y, xq):
        d = np.sum((X3 - xq[:, None, :]) ** 2, axis=2)
        idx = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        return np.take_along_axis(Y, idx, axis=1).mean(axis=1)

    def __repr__(self):
        return f"KNN(k={self.k})"


class BlackBox(Predictor):
    """In-process adapter for ``handle(X, y, x) -> float`` fit-and-predict callbacks."""

    kind = "blackbox"

    def __init__(self, handle: Callable[[np.ndarray, np.ndarray, np.ndarray], float], affine: bool = False):
        super().__init__()
        self.handle = handle
        self.affine = affine

    def _predict_batch(self, X, Y, x):
        return np.array([float(self.handle(X, row, x)) for row in Y])

    def fit_predict_points(self, X, Y, Xq):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        outs = [self.fit_predict(X, Y, xq) for xq in Xq]
        return np.stack(outs, axis=-1) if np.ndim(outs[0]) else np.array(outs)


def _match_rows(X: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.all(X == x, axis=1))


class InSampleConsistent(Predictor):
    """Wrapper whose in-sample predictions are the base's leave-one-out predictions.

    ``B(x, T)`` averages ``A(x, T without i)`` over training rows ``i`` whose
    features equal ``x`` exactly, and is ``A(x, T)`` when there is no match.
    """

    kind = "in_sample_consistent"

    def __init__(self, base: Predictor):
        super().__init__()
        self.base = base
        self.affine = base.affine

    def _predict_batch(self, X, Y, x):
        rows = _match_rows(X, x)
        if rows.size == 0:
            return np.atleast_1d(self.base.fit_predict(X, Y, x))
        keep = np.ones(X.shape[0], dtype=bool)
        acc = np.zeros(Y.shape[0])
        for i in rows:
            keep[i] = False
            acc += np.atleast_1d(self.base.fit_predict(X[keep], Y[:, keep], x))
            keep[i] = True
        return acc / rows.size

    def __repr__(self):
        return f"InSampleConsistent({self.base!r})"


class OutSampleConsistent(Predictor):
    """Wrapper that keeps in-sample predictions and answers fresh queries with
    the average in-sample prediction of the base."""

    kind = "out_sample_consistent"

    def __init__(self, base: Predictor):
        super().__init__()
        self.base = base
        self.affine = base.affine

    def _predict_batch(self, X, Y, x):
        rows = _match_rows(X, x)
        if rows.size:
            # every matching row queries the same point on the same data
            return np.atleast_1d(self.base.fit_predict(X, Y, x))
        preds = np.atleast_2d(self.base.fit_predict_points(X, Y, X))
        return preds.mean(axis=1)

    def __repr__(self):
        return f"OutSampleConsistent({self.base!r})"


def make_in_sample_consistent(A: Predictor) -> InSampleConsistent:
    return InSampleConsistent(A)


def make_out_sample_consistent(A: Predictor) -> OutSampleConsistent:
    return OutSampleConsistent(A)


def predict(P: Predictor, x, T: DataSet) -> float:
    if len(T) == 0:
        raise ValueError("training set must be nonempty")
    return P.fit_predict(T.X, T.y, x)


@dataclass(frozen=True)
class AffineCoefficients:
    a: float
    b: float


def affine_coefficients(P: Predictor, x_new, T: DataSet) -> AffineCoefficients:
    """Slope and offset with ``|y - P(x_new, T + (y, x_new))| = |a*y - b|``.

    Uses two augmented fits, at ``y = 0`` and ``y = 1``.
    """
    if not P.affine:
        raise UnsupportedError(f"{P!r} is not affine in the training responses")
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    X_aug = np.vstack([T.X, x_new])
    Y_aug = np.tile(np.append(T.y, 0.0), (2, 1))
    Y_aug[1, -1] = 1.0
    at0, at1 = P.fit_predict(X_aug, Y_aug, x_new)
    return AffineCoefficients(1.0 - (at1 - at0), at0)


def augment_unique_id(T: DataSet, rng: RngSeed) -> DataSet:
    """Append an independent uniform(0, 1) coordinate to every feature vector."""
    u = rng.generator().uniform(0.0, 1.0, size=(len(T), 1))
    return DataSet(T.y, np.hstack([T.X, u]))


def predictor_from_name(name: str) -> Predictor:
    """Parse ``mean``, ``zero``, ``ols``, ``ridge[:lam]`` or ``knn:k``."""
    parts = name.strip().lower().split(":")
    head, args = parts[0], parts[1:]
    if head in ("mean", "mean_only"):
        return MeanOnly()
    if head in ("zero", "constant_zero"):
        return ConstantZero()
    if head == "ols":
        return OLS()
    if head == "ridge":
        return Ridge(float(args[0]) if args else 1.0)
    if head == "knn":
        if not args:
            raise ValueError("knn needs k, e.g. knn:5")
        return KNN(int(args[0]))
    raise ValueError(f"unknown predictor {name!r}")


@dataclass(frozen=True)
class InstabilitySummary:
    mean_abs: float
    q95: float
    samples: np.ndarray

    def exceed_prob(self, delta: float) -> float:
        return float(np.mean(self.samples > delta))


def estimate_oos_instability(A: Predictor, gen, n: int, reps: int, rng: RngSeed) -> InstabilitySummary:
    """Monte Carlo of ``|A(x_new, T_n) - A(x_new, T_n without t_n)|``.

    ``gen(n, rng)`` must return ``(T, t_new)`` with ``len(T) == n``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    stats = np.empty(reps)
    for r in range(reps):
        T, t_new = gen(n, rng.child(r))
        full = predict(A, t_new.features, T)
        dropped = predict(A, t_new.features, T.without(len(T) - 1))
        stats[r] = abs(full - dropped)
    return InstabilitySummary(float(stats.mean()), float(np.quantile(stats, 0.95)), stats)
