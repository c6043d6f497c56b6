"""Shared domain types: datasets, extended reals, interval unions, grids, seeds."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

INF = math.inf


class ConfigurationError(ValueError):
    """Invalid grid, generator, or experiment configuration."""


class ContractError(RuntimeError):
    """A documented precondition of an algorithm was violated at entry."""


class UnsupportedError(TypeError):
    """Operation not available for this predictor or score kind."""


@dataclass(frozen=True)
class Observation:
    response: float
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float).reshape(-1)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "response", float(self.response))
        if not math.isfinite(self.response):
            raise ValueError("response must be finite")


class DataSet:
    """Ordered training data stored as a response vector and a feature matrix.

    Order is storage only; symmetric consumers must not depend on it.
    """

    __slots__ = ("_y", "_X")

    def __init__(self, y, X):
        y = np.array(y, dtype=float).reshape(-1)
        X = np.array(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, 0)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"feature matrix shape {X.shape} does not match {y.shape[0]} responses")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        y.setflags(write=False)
        X.setflags(write=False)
        self._y = y
        self._X = X

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> DataSet:
        obs = list(observations)
        if not obs:
            raise ValueError("at least one observation is required")
        dims = {o.features.shape[0] for o in obs}
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
        return cls([o.response for o in obs], np.vstack([o.features for o in obs]))

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def X(self) -> np.ndarray:
        return self._X

    @property
    def dimension(self) -> int:
        return self._X.shape[1]

    def __len__(self) -> int:
        return self._y.shape[0]

    def __getitem__(self, i: int) -> Observation:
        return Observation(self._y[i], self._X[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, DataSet):
            return NotImplemented
        return np.array_equal(self._y, other._y) and np.array_equal(self._X, other._X)

    def __repr__(self):
        return f"DataSet(n={len(self)}, p={self.dimension})"

    def without(self, i: int) -> DataSet:
        keep = np.arange(len(self)) != i
        return DataSet(self._y[keep], self._X[keep])

    def with_observation(self, obs: Observation) -> DataSet:
        if obs.features.shape[0] != self.dimension:
            raise ValueError("feature dimension mismatch")
        return DataSet(np.append(self._y, obs.response), np.vstack([self._X, obs.features]))

    def replaced(self, i: int, obs: Observation) -> DataSet:
        y = self._y.copy()
        X = self._X.copy()
        y[i] = obs.response
        X[i] = obs.features
        return DataSet(y, X)

    def permuted(self, perm: Sequence[int]) -> DataSet:
        perm = np.asarray(perm)
        return DataSet(self._y[perm], self._X[perm])


@dataclass(frozen=True)
class RngSeed:
    """Seed plus stream id; the pair fully determines the draws."""

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ConfigurationError("seed components must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream), *map(int, self.path)))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> RngSeed:
        return RngSeed(self.seed, self.stream, (*self.path, int(index)))


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_closed: bool = True
    upper_closed: bool = True

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        # infinite endpoints are never attained
        if math.isinf(lo):
            object.__setattr__(self, "lower_closed", False)
        if math.isinf(hi):
            object.__setattr__(self, "upper_closed", False)

    @property
    def is_empty(self) -> bool:
        return self.lower == self.upper and not (self.lower_closed and self.upper_closed)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def __contains__(self, y: float) -> bool:
        if y < self.lower or y > self.upper:
            return False
        if y == self.lower and not self.lower_closed:
            return False
        if y == self.upper and not self.upper_closed:
            return False
        return True


class IntervalUnion:
    """Finite sorted union of disjoint, non-adjacent real intervals."""

    __slots__ = ("_intervals", "_lowers")

    def __init__(self, intervals: Iterable[Interval | tuple] = ()):
        items = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals]
        self._intervals = tuple(_normalize(items))
        self._lowers = [iv.lower for iv in self._intervals]

    @classmethod
    def empty(cls) -> IntervalUnion:
        return cls()

    @classmethod
    def real_line(cls) -> IntervalUnion:
        return cls([Interval(-INF, INF, False, False)])

    @classmethod
    def closed(cls, lower: float, upper: float) -> IntervalUnion:
        return cls([Interval(lower, upper, True, True)])

    @property
    def intervals(self) -> tuple[Interval, ...]:
        return self._intervals

    def __len__(self) -> int:
        return len(self._intervals)

    def __iter__(self):
        return iter(self._intervals)

    def __bool__(self) -> bool:
        return bool(self._intervals)

    def __eq__(self, other):
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self._intervals == other._intervals

    def __repr__(self):
        parts = []
        for iv in self._intervals:
            parts.append(f"{'[' if iv.lower_closed else '('}{iv.lower:g}, {iv.upper:g}{']' if iv.upper_closed else ')'}")
        return "IntervalUnion(" + (" ∪ ".join(parts) if parts else "∅") + ")"

    def __contains__(self, y: float) -> bool:
        k = bisect.bisect_right(self._lowers, y) - 1
        return k >= 0 and y in self._intervals[k]

    def contains_many(self, ys) -> np.ndarray:
        return np.array([y in self for y in np.asarray(ys, dtype=float).ravel()], dtype=bool)

    @property
    def length(self) -> float:
        return math.fsum(iv.length for iv in self._intervals)

    @property
    def bounds(self) -> tuple[float, float] | None:
        if not self._intervals:
            return None
        return self._intervals[0].lower, self._intervals[-1].upper

    def renormalized(self) -> IntervalUnion:
        return IntervalUnion(self._intervals)

    def clipped(self, lower: float, upper: float) -> IntervalUnion:
        out = []
        for iv in self._intervals:
            lo, lo_c = (iv.lower, iv.lower_closed) if iv.lower >= lower else (lower, True)
            hi, hi_c = (iv.upper, iv.upper_closed) if iv.upper <= upper else (upper, True)
            if lo <= hi:
                out.append(Interval(lo, hi, lo_c, hi_c))
        return IntervalUnion(out)

    def is_subset_of(self, other: IntervalUnion) -> bool:
        """Exact set inclusion, endpoint flags included."""
        return _is_subset(self, other)


def _normalize(items: list[Interval]) -> list[Interval]:
    items = [iv for iv in items if not iv.is_empty]
    items.sort(key=lambda iv: (iv.lower, not iv.lower_closed))
    merged: list[Interval] = []
    for iv in items:
        if merged:
            last = merged[-1]
            touches = iv.lower < last.upper or (
                iv.lower == last.upper and (last.upper_closed or iv.lower_closed)
            )
            if touches:
                if iv.upper > last.upper:
                    up, up_c = iv.upper, iv.upper_closed
                elif iv.upper == last.upper:
                    up, up_c = last.upper, last.upper_closed or iv.upper_closed
                else:
                    up, up_c = last.upper, last.upper_closed
                merged[-1] = Interval(last.lower, up, last.lower_closed, up_c)
                continue
        merged.append(iv)
    return merged


def _is_subset(a: IntervalUnion, b: IntervalUnion) -> bool:
    # components of b are separated by missing points, so each piece of a needs one host
    for iv in a:
        k = bisect.bisect_right(b._lowers, iv.lower) - 1
        if k < 0:
            return False
        host = b.intervals[k]
        lower_ok = host.lower < iv.lower or (host.lower == iv.lower and (host.lower_closed or not iv.lower_closed))
        upper_ok = iv.upper < host.upper or (iv.upper == host.upper and (host.upper_closed or not iv.upper_closed))
        if not (lower_ok and upper_ok):
            return False
    return True


def symmetric_difference_length(a: IntervalUnion, b: IntervalUnion) -> float:
    """Lebesgue measure of the symmetric difference of two unions."""
    cuts = sorted({e for u in (a, b) for iv in u for e in (iv.lower, iv.upper) if math.isfinite(e)})
    if not cuts:
        # each side is either empty or the whole line
        return 0.0 if bool(a) == bool(b) else INF
    total = 0.0
    pieces = [(-INF, cuts[0])] + list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], INF)]
    for lo, hi in pieces:
        if lo == hi:
            continue
        if math.isinf(lo):
            probe = hi - 1.0
        elif math.isinf(hi):
            probe = lo + 1.0
        else:
            probe = lo + (hi - lo) / 2
        if (probe in a) != (probe in b):
            if math.isinf(lo) or math.isinf(hi):
                return INF
            total += hi - lo
    return total


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``num`` points on ``[lower, upper]``."""

    lower: float
    upper: float
    num: int = 4001

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConfigurationError("grid bounds must be finite")
        if self.lower >= self.upper:
            raise ConfigurationError(f"grid lower {self.lower} must be below upper {self.upper}")
        if int(self.num) < 2:
            raise ConfigurationError("grid needs at least two points")

    @classmethod
    def from_step(cls, lower: float, upper: float, step: float) -> GridSpec:
        if not step > 0:
            raise ConfigurationError(f"grid step must be positive, got {step}")
        if lower >= upper:
            raise ConfigurationError(f"grid lower {lower} must be below upper {upper}")
        num = int(math.floor((upper - lower) / step + 1e-9)) + 1
        return cls(lower, lower + (num - 1) * step, num)

    @classmethod
    def around(cls, center: float, scale: float, half_width: float = 10.0, num: int = 4001) -> GridSpec:
        """Symmetric grid ``center ± half_width * scale``; a zero scale falls back to 1."""
        if not math.isfinite(scale) or scale <= 0:
            scale = 1.0
        return cls(center - half_width * scale, center + half_width * scale, num)

    @property
    def step(self) -> float:
        return (self.upper - self.lower) / (self.num - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, int(self.num))


def default_grid(center: float, responses, num: int = 4001, half_width: float = 10.0) -> GridSpec:
    sd = float(np.std(responses, ddof=1)) if len(responses) > 1 else 1.0
    return GridSpec.around(center, sd, half_width, num)


def union_from_mask(points: np.ndarray, mask: np.ndarray, grid: GridSpec) -> IntervalUnion:
    """Maximal true runs widened by half a step and clipped to the grid range."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return IntervalUnion.empty()
    h = grid.step
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, stops = edges[0::2], edges[1::2] - 1
    out = []
    for s, e in zip(starts, stops):
        lo = max(points[s] - h / 2, grid.lower)
        hi = min(points[e] + h / 2, grid.upper)
        out.append(Interval(lo, hi, True, True))
    # runs separated by a false point keep a gap of one step after widening
    return IntervalUnion(out)


def interval_union_from_predicate(pred: Callable[[float], bool], grid: GridSpec) -> IntervalUnion:
    """Realize ``{y : pred(y)}`` on a uniform grid."""
    pts = grid.points()
    mask = np.fromiter((bool(pred(float(y))) for y in pts), dtype=bool, count=pts.size)
    return union_from_mask(pts, mask, grid)
