"""Data generators and Monte Carlo experiments.

Every experiment is a map over independent replications followed by an
order-independent reduction.  Replication ``r`` draws from ``rng.child(r)``,
so results do not depend on how replications are scheduled; the pool size
comes from ``CONFORMAL_KIT_THREADS`` (default: all CPUs).
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import io as kit_io
from .core import (
    ConfigurationError,
    ContractError,
    DataSet,
    GridSpec,
    IntervalUnion,
    Observation,
    RngSeed,
    symmetric_difference_length,
    union_from_mask,
)
from .scores import ConformityScore, loo_scores, score, score_from_name
from .sets import (
    METHODS,
    augmented_scores,
    cross_conformal_mask,
    full_conformal_mask_from_scores,
    jackknife_plus_symmetric,
    jackknife_symmetric,
    method_mask_many,
    shortcut_closed_form,
    shortcut_mask,
)

GENERATOR_KINDS = ("linear_gaussian", "linear_heavy_tail", "bounded_uniform")
BOUNDED_RESPONSES = (-1.0, 1.0)
ALPHA_GRID = tuple(round(0.01 * k, 2) for k in range(1, 100))
THREADS_ENV = "CONFORMAL_KIT_THREADS"


# -- generators -------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """i.i.d. regression data.

    ``linear_gaussian``: ``x ~ N(0, I_p)``, ``y = x'theta + noise_sd * N(0, 1)``
    with ``theta = theta_scale * 1 / sqrt(p)``.  ``linear_heavy_tail``: the same
    mean with Student-t(``df``) noise.  ``bounded_uniform``: ``x ~ U[0, 1]^p``
    and ``y`` in ``[-1, 1]``, an equal mixture of ``U[-1, 1]`` and a uniform of
    half-width 1/4 around ``0.75 (2 mean(x) - 1)``; its conditional density is
    at least 1/4 on ``[-1, 1]``.

    ``cc_density_bound`` annotates a sup-norm bound for the conditional response
    density given the features; for ``linear_gaussian`` it is filled in.
    """

    kind: str
    n: int
    p: int = 1
    theta_scale: float = 1.0
    noise_sd: float = 1.0
    df: float = 3.0
    cc_density_bound: float | None = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n}")
        if int(self.p) != self.p or self.p < 0:
            raise ConfigurationError(f"p must be a nonnegative integer, got {self.p}")
        if not self.noise_sd > 0:
            raise ConfigurationError("noise_sd must be positive")
        if not self.df > 0:
            raise ConfigurationError("df must be positive")
        if self.kind == "linear_gaussian" and self.cc_density_bound is None:
            object.__setattr__(self, "cc_density_bound", 1.0 / (self.noise_sd * math.sqrt(2 * math.pi)))
        if self.kind == "bounded_uniform" and self.cc_density_bound is None:
            object.__setattr__(self, "cc_density_bound", 0.5 * 0.5 + 0.5 * 2.0)

    @classmethod
    def from_dict(cls, d: dict) -> GeneratorSpec:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown generator fields {sorted(unknown)}")
        if "kind" not in d or "n" not in d:
            raise ConfigurationError("generator needs 'kind' and 'n'")
        return cls(**d)

    def with_n(self, n: int) -> GeneratorSpec:
        return dataclasses.replace(self, n=int(n))

    def theta(self) -> np.ndarray:
        return np.full(self.p, self.theta_scale / math.sqrt(self.p)) if self.p else np.zeros(0)

    def regression_function(self, X: np.ndarray) -> np.ndarray:
        """Conditional mean (linear kinds) or mixture centre (bounded kind)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.p)
        if self.kind == "bounded_uniform":
            return 0.75 * (2 * X.mean(axis=1) - 1) if self.p else np.zeros(X.shape[0])
        return X @ self.theta()

    @property
    def response_bounds(self) -> tuple[float, float] | None:
        return BOUNDED_RESPONSES if self.kind == "bounded_uniform" else None


def draw(spec: GeneratorSpec, m: int, gen: np.random.Generator) -> DataSet:
    """``m`` i.i.d. observations."""
    p = spec.p
    if spec.kind == "bounded_uniform":
        X = gen.random((m, p))
        centre = spec.regression_function(X)
        wide = gen.uniform(-1.0, 1.0, size=m)
        narrow = centre + gen.uniform(-0.25, 0.25, size=m)
        y = np.where(gen.random(m) < 0.5, wide, narrow)
        return DataSet(y, X)
    X = gen.standard_normal((m, p))
    if spec.kind == "linear_gaussian":
        noise = spec.noise_sd * gen.standard_normal(m)
    else:
        noise = gen.standard_t(spec.df, size=m)
    return DataSet(X @ spec.theta() + noise, X)


def generate(spec: GeneratorSpec, rng: RngSeed) -> tuple[DataSet, Observation]:
    """``n + 1`` i.i.d. draws; the first ``n`` form the training set."""
    if not isinstance(spec, GeneratorSpec):
        raise ConfigurationError("generate needs a GeneratorSpec")
    D = draw(spec, spec.n + 1, rng.generator())
    return D.without(spec.n), D[spec.n]


def _fresh(spec: GeneratorSpec, m: int, rng: RngSeed) -> DataSet:
    return draw(spec, m, rng.child(1).generator())


# -- reports and scheduling -----------------------------------------------------------


@dataclass
class ExperimentReport:
    """Config echo, per-cell statistics, pass/fail flags and wall-clock.

    The JSON and CSV renderings exclude the wall-clock so they are
    byte-identical across runs; it is written to a separate timing file.
    """

    experiment: str
    config: dict
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return kit_io.dumps(self.to_dict())

    def to_csv(self) -> str:
        return kit_io.table_to_csv(self.rows)

    def write(self, prefix) -> list[str]:
        prefix = str(prefix)
        paths = [prefix + ".json", prefix + ".csv", prefix + ".timing.json"]
        kit_io.write_text(paths[0], self.to_json())
        kit_io.write_text(paths[1], self.to_csv())
        kit_io.write_text(paths[2], kit_io.dumps({"wall_clock_seconds": self.wall_clock_seconds}))
        return paths


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if k < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be at least 1")
    return k


def pool_map(fn: Callable, tasks: Sequence) -> list:
    """Ordered map over a process pool; results never depend on the pool size."""
    k = min(thread_count(), len(tasks))
    if k <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * k))
    with ProcessPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


def _binomial_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / m)


def _describe(v: np.ndarray, prefix: str) -> dict:
    v = np.asarray(v, dtype=float)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {
        f"{prefix}_mean": float(v.mean()),
        f"{prefix}_se": sd / math.sqrt(v.size),
        f"{prefix}_q05": float(np.quantile(v, 0.05)),
        f"{prefix}_q50": float(np.quantile(v, 0.5)),
        f"{prefix}_q95": float(np.quantile(v, 0.95)),
    }


def _spec_dict(spec: GeneratorSpec) -> dict:
    return dataclasses.asdict(spec)


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")


def _check_score(name: str) -> ConformityScore:
    try:
        return score_from_name(name)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")


def _monotone_nonincreasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


# -- marginal coverage ------------------------------------------------------------------


def _marginal_rep(task) -> bool:
    method, score_name, spec, alpha, delta, seed = task
    T, t = generate(spec, seed)
    C = score_from_name(score_name)
    return bool(method_mask_many(method, C, T, t.features[None, :], [t.response], [alpha], delta)[0, 0])


def run_marginal_coverage(
    method: str,
    spec: GeneratorSpec,
    alpha: float,
    delta: float,
    reps: int,
    rng: RngSeed,
    score: str = "out-sample:mean",
) -> ExperimentReport:
    """Fraction of replications whose fresh response lies in the prediction set.

    Membership is decided exactly at the fresh response, without a grid.  The
    pass flag applies to full conformal with ``delta >= 0``, the only case
    with a finite-sample guarantee; other methods are reported only.
    """
    _check_method(method)
    _check_score(score)
    _check_alpha(alpha)
    if reps < 100:
        raise ConfigurationError("marginal coverage needs reps >= 100")
    start = time.perf_counter()
    covered = np.array(pool_map(_marginal_rep, [(method, score, spec, alpha, delta, rng.child(r)) for r in range(reps)]))
    cov = float(covered.mean())
    se = _binomial_se(cov, reps)
    row = {"method": method, "score": score, "n": spec.n, "alpha": alpha, "delta": delta, "reps": reps, "coverage": cov, "se": se}
    checks = {}
    if method == "full" and delta >= 0:
        checks["coverage_at_least_nominal"] = cov >= 1 - alpha - 3 * se
    config = {"method": method, "score": score, "generator": _spec_dict(spec), "alpha": alpha, "delta": delta, "reps": reps, "seed": dataclasses.asdict(rng)}
    return ExperimentReport("marginal_coverage", config, [row], {"coverage": cov, "se": se}, checks, time.perf_counter() - start)


# -- conditional coverage ---------------------------------------------------------------


def data_dependent_alpha(C: ConformityScore, T: DataSet, alpha: float) -> float:
    """Experiment variant: scale ``alpha`` by the tail spread of the leave-one-out scores.

    ``alpha * (q90 / q50) / 2.5``, clipped to ``[0.01, 0.5]``; the ratio is about
    2.44 for absolute Gaussian errors, so the level stays near ``alpha`` there
    and grows for heavy tails.
    """
    loo = loo_scores(C, T)
    q50, q90 = np.quantile(loo, [0.5, 0.9])
    ratio = q90 / q50 if q50 > 0 else 2.5
    return float(np.clip(alpha * ratio / 2.5, 0.01, 0.5))


def _conditional_rep(task) -> tuple[np.ndarray, float]:
    method, score_name, spec, alpha, alpha_rule, delta, inner, seed = task
    T, _ = generate(spec, seed)
    fresh = _fresh(spec, inner, seed)
    C = score_from_name(score_name)
    a_eff = data_dependent_alpha(C, T, alpha) if alpha_rule == "residual_spread" else alpha
    alphas = np.array([*ALPHA_GRID, a_eff])
    inside = method_mask_many(method, C, T, fresh.X, fresh.y, alphas, delta)
    return 1.0 - inside.mean(axis=1), a_eff


def run_conditional_coverage(
    method: str,
    spec: GeneratorSpec,
    alpha: float,
    delta: float,
    outer_reps: int,
    inner_reps: int,
    rng: RngSeed,
    score: str = "out-sample:mean",
    ns: Sequence[int] | None = None,
    eps_list: Sequence[float] = (0.02, 0.05),
    alpha_rule: str = "fixed",
) -> ExperimentReport:
    """Training-conditional miscoverage by two-level Monte Carlo.

    For every outer training set the conditional miscoverage is estimated on
    ``inner_reps`` fresh pairs, at ``alpha`` and on the grid 0.01, ..., 0.99
    (for the uniform-in-alpha excess).  ``ns`` sweeps the sample size.
    ``alpha_rule="residual_spread"`` replaces ``alpha`` by
    :func:`data_dependent_alpha` per training set.
    """
    _check_method(method)
    _check_score(score)
    _check_alpha(alpha)
    if outer_reps < 100 or inner_reps < 100:
        raise ConfigurationError("conditional coverage needs outer_reps, inner_reps >= 100")
    if alpha_rule not in ("fixed", "residual_spread"):
        raise ConfigurationError(f"unknown alpha_rule {alpha_rule!r}")
    ns = [spec.n] if ns is None else [int(v) for v in ns]
    start = time.perf_counter()
    rows: list[dict] = []
    exceed: dict[float, list[float]] = {e: [] for e in eps_list}
    abs_dev: list[float] = []
    grid = np.array(ALPHA_GRID)
    for idx, n in enumerate(ns):
        sp = spec.with_n(n)
        tasks = [(method, score, sp, alpha, alpha_rule, delta, inner_reps, rng.child(idx).child(r)) for r in range(outer_reps)]
        out = pool_map(_conditional_rep, tasks)
        miss = np.stack([m for m, _ in out])
        a_eff = np.array([a for _, a in out])
        at_alpha = miss[:, -1]
        sup_excess = np.max(miss[:, :-1] - grid[None, :], axis=1)
        dev = float(np.mean(np.abs(at_alpha - a_eff)))
        abs_dev.append(dev)
        base = {"n": n, "method": method, "score": score, "alpha": alpha, "delta": delta, "alpha_rule": alpha_rule}
        base |= _describe(at_alpha, "miscoverage")
        base |= {"mean_abs_deviation": dev, "mean_alpha": float(a_eff.mean())}
        for e in eps_list:
            frac = float(np.mean(at_alpha > a_eff + e))
            sup_frac = float(np.mean(sup_excess > e))
            exceed[e].append(frac)
            rows.append(base | {
                "eps": e,
                "exceed_fraction": frac,
                "exceed_se": _binomial_se(frac, outer_reps),
                "sup_exceed_fraction": sup_frac,
                "sup_exceed_se": _binomial_se(sup_frac, outer_reps),
            })
    checks = {}
    if len(ns) > 1:
        for e in eps_list:
            checks[f"exceedance_nonincreasing_eps_{e:g}"] = _monotone_nonincreasing(exceed[e])
    summary = {"ns": ns, "exceed_fraction": {f"{e:g}": exceed[e] for e in eps_list}, "mean_abs_deviation": abs_dev}
    config = {
        "method": method, "score": score, "generator": _spec_dict(spec), "ns": ns, "alpha": alpha, "delta": delta,
        "outer_reps": outer_reps, "inner_reps": inner_reps, "eps_list": list(eps_list), "alpha_rule": alpha_rule,
        "alpha_grid": list(ALPHA_GRID), "seed": dataclasses.asdict(rng),
    }
    return ExperimentReport("conditional_coverage", config, rows, summary, checks, time.perf_counter() - start)


# -- equivalence of methods -------------------------------------------------------------------

CLOSED_FORM_METHODS = ("shortcut", "jackknife", "jackknife_plus")
DEFAULT_PAIRS = (("full", "shortcut"), ("full", "cross"), ("shortcut", "jackknife"))


def _closed_set(method, C, T, x, alpha, delta) -> IntervalUnion:
    if method == "shortcut":
        return shortcut_closed_form(C, T, x, alpha, delta)
    if method == "jackknife":
        return jackknife_symmetric(C.predictor, T, x, alpha, delta)
    return jackknife_plus_symmetric(C.predictor, T, x, alpha, delta)


def _equivalence_rep(task) -> dict:
    spec, score_name, alpha, deltas, pairs, directed, grid, seed = task
    T, t = generate(spec, seed)
    C = score_from_name(score_name)
    x = t.features
    ys = grid.points()
    h = grid.step
    loo = loo_scores(C, T)
    out: dict[str, float] = {}
    needs_grid = sorted({m for pair in pairs for m in pair if not set(pair) <= set(CLOSED_FORM_METHODS)})
    aug = sorted_aug = None
    if "full" in needs_grid or directed is not None:
        aug = augmented_scores(C, T, x, ys)
        sorted_aug = np.sort(aug, axis=1)

    def grid_mask(method, a, d):
        if method == "full":
            return full_conformal_mask_from_scores(aug, [a], d, sorted_aug)[0]
        if method == "shortcut":
            return shortcut_mask(C, T, x, ys, [a], d, loo)[0]
        return cross_conformal_mask(C, T, x, ys, [a], d, loo)[0]

    for delta in deltas:
        masks = {m: union_from_mask(ys, grid_mask(m, alpha, delta), grid) for m in needs_grid}
        for a, b in pairs:
            if set((a, b)) <= set(CLOSED_FORM_METHODS):
                lo, hi = grid.lower, grid.upper
                A = _closed_set(a, C, T, x, alpha, delta).clipped(lo, hi)
                B = _closed_set(b, C, T, x, alpha, delta).clipped(lo, hi)
            else:
                A, B = masks[a], masks[b]
            out[f"{a}~{b}@{delta!r}"] = symmetric_difference_length(A, B)
    if directed is not None:
        d1, d2, eps = directed
        fc = grid_mask("full", alpha, d1), grid_mask("full", alpha, d2)
        sc_lo = grid_mask("shortcut", alpha - eps, d2)
        sc_hi = grid_mask("shortcut", alpha + eps, d1)
        out["fc_minus_sc_lower"] = h * float(np.sum(fc[0] & ~sc_lo))
        out["fc_minus_sc_upper"] = h * float(np.sum(fc[1] & ~sc_hi))
    return out


def run_equivalence(
    spec: GeneratorSpec,
    alpha: float,
    deltas: Sequence[float],
    methods: Sequence[tuple[str, str]] = DEFAULT_PAIRS,
    reps: int = 200,
    rng: RngSeed = RngSeed(0),
    score: str = "out-sample:mean",
    ns: Sequence[int] | None = None,
    grid_num: int = 4001,
    directed: tuple[float, float, float] | None = (0.0, 0.05, 0.05),
) -> ExperimentReport:
    """Mean Lebesgue length of symmetric differences between method pairs.

    Full conformal and cross-conformal sets are realized on a grid over the
    bounded response range; pairs of closed-form methods (shortcut,
    Jackknife, Jackknife+) are compared exactly.  ``directed = (d1, d2, eps)``
    adds the one-sided differences ``fc(alpha, d1) minus sc(alpha - eps, d2)``
    and ``fc(alpha, d2) minus sc(alpha + eps, d1)``.
    """
    if spec.response_bounds is None:
        raise ConfigurationError("the equivalence experiment needs a bounded response range (bounded_uniform)")
    _check_alpha(alpha)
    C = _check_score(score)
    pairs = [tuple(p) for p in methods]
    for a, b in pairs:
        for m in (a, b):
            if m not in ("full", "shortcut", "cross", "jackknife", "jackknife_plus"):
                raise ConfigurationError(f"unknown method {m!r} in pair {(a, b)}")
            if m.startswith("jackknife") and C.kind != "out_sample":
                raise ConfigurationError("Jackknife pairs need an out-of-sample score")
    if directed is not None and not directed[0] < directed[1]:
        raise ConfigurationError("directed differences need d1 < d2")
    if reps < 1:
        raise ConfigurationError("reps must be positive")
    deltas = [float(d) for d in deltas]
    ns = [spec.n] if ns is None else [int(v) for v in ns]
    grid = GridSpec(*spec.response_bounds, grid_num)
    start = time.perf_counter()
    rows: list[dict] = []
    trend: dict[str, list[float]] = {}
    for idx, n in enumerate(ns):
        sp = spec.with_n(n)
        tasks = [(sp, score, alpha, deltas, pairs, directed, grid, rng.child(idx).child(r)) for r in range(reps)]
        results = pool_map(_equivalence_rep, tasks)
        for key in results[0]:
            v = np.array([res[key] for res in results])
            pair, _, delta = key.partition("@")
            row = {"n": n, "pair": pair, "delta": float(delta) if delta else None, "reps": reps}
            row |= _describe(v, "length") | {"length_max": float(v.max())}
            rows.append(row)
            trend.setdefault(key, []).append(float(v.mean()))
    checks = {}
    key0 = f"full~shortcut@{deltas[0]!r}"
    if key0 in trend and len(ns) > 1:
        checks["full_shortcut_nonincreasing"] = _monotone_nonincreasing(trend[key0])
        checks["full_shortcut_halved"] = trend[key0][-1] < 0.5 * trend[key0][0]
    for key, vals in trend.items():
        if key.startswith("shortcut~jackknife@") and C.kind == "out_sample":
            checks[f"shortcut_jackknife_zero@{key.partition('@')[2]}"] = max(
                r["length_max"] for r in rows if r["pair"] == "shortcut~jackknife" and repr(r["delta"]) == key.partition("@")[2]
            ) <= 1e-12
    config = {
        "generator": _spec_dict(spec), "ns": ns, "alpha": alpha, "deltas": deltas, "pairs": [list(p) for p in pairs],
        "reps": reps, "score": score, "grid": {"lower": grid.lower, "upper": grid.upper, "num": grid.num},
        "directed": list(directed) if directed is not None else None, "seed": dataclasses.asdict(rng),
    }
    return ExperimentReport("equivalence", config, rows, {"mean_length": trend}, checks, time.perf_counter() - start)


# -- finite-sample bound ----------------------------------------------------------------------


def _finite_rep(task) -> dict:
    spec, score_name, method, delta, inner, seed = task
    T, t = generate(spec, seed)
    C = score_from_name(score_name)
    fresh = _fresh(spec, inner, seed)
    grid = np.array(ALPHA_GRID)
    inside = method_mask_many(method, C, T, fresh.X, fresh.y, grid, delta)
    miss = 1.0 - inside.mean(axis=1)
    copy = draw(spec, 1, seed.child(2).generator())[0]
    s_new = score(C, t, T)
    s_swap = score(C, t, T.replaced(0, copy))
    D = T.with_observation(t)
    s_first = score(C, D[0], D.without(0))
    return {"sup_excess": float(np.max(miss - grid)), "swap": abs(s_new - s_swap), "abs_first": abs(s_first), "abs_new": abs(s_new)}


def finite_sample_terms(swap, abs_first, abs_new, n, delta, eps1, eps2, K_values) -> dict:
    """Per-replication summands of both right-hand sides; their means are the bounds."""
    swap, abs_first, abs_new = map(np.asarray, (swap, abs_first, abs_new))
    c2 = delta * eps1**2 * eps2
    terms = {"first_form": 3 * swap / c2 + abs_first / ((n + 1) * c2)}
    for K in K_values:
        terms[f"K={K:g}"] = (
            (abs_new >= K) / (delta * eps1 * eps2)
            + 3 * np.minimum(2 * K + 3 * delta, swap) / c2
            + (2 * K + 3 * delta) / (2 * (n + 1) * c2)
        )
    return terms


def run_finite_sample_bound(
    spec: GeneratorSpec,
    alpha_grid: Sequence[float] | None,
    delta: float,
    eps1: float,
    eps2: float,
    reps: int,
    rng: RngSeed,
    score: str = "out-sample:mean",
    inner_reps: int = 300,
    method: str = "full",
    K_values: Sequence[float] = (1.0, 2.0, 4.0),
) -> ExperimentReport:
    """Monte Carlo of both sides of the finite-sample bound for inflated sets.

    The left side is the fraction of training sets whose largest excess of
    conditional miscoverage over the level, on the grid 0.01, ..., 0.99, is at
    least ``eps1 + eps2``.  The right sides are means of per-replication terms
    from :func:`finite_sample_terms`; standard errors combine both sides.
    """
    if alpha_grid is not None and tuple(round(a, 2) for a in alpha_grid) != ALPHA_GRID:
        raise ConfigurationError("only the default alpha grid 0.01, ..., 0.99 is supported")
    if not (delta > 0 and eps1 > 0 and eps2 > 0):
        raise ConfigurationError("delta, eps1 and eps2 must be positive")
    if reps < 100 or inner_reps < 100:
        raise ConfigurationError("the finite-sample experiment needs reps, inner_reps >= 100")
    _check_method(method)
    _check_score(score)
    start = time.perf_counter()
    out = pool_map(_finite_rep, [(spec, score, method, delta, inner_reps, rng.child(r)) for r in range(reps)])
    sup_excess = np.array([o["sup_excess"] for o in out])
    swap = np.array([o["swap"] for o in out])
    hit = sup_excess >= eps1 + eps2
    lhs = float(hit.mean())
    lhs_se = _binomial_se(lhs, reps)
    terms = finite_sample_terms(swap, [o["abs_first"] for o in out], [o["abs_new"] for o in out], spec.n, delta, eps1, eps2, K_values)
    rows, checks = [], {}
    for name, z in terms.items():
        rhs = float(z.mean())
        rhs_se = float(z.std(ddof=1)) / math.sqrt(reps)
        se = math.sqrt(lhs_se**2 + rhs_se**2)
        ok = lhs <= rhs + 3 * se
        checks[f"bound_{name}"] = ok
        rows.append({"form": name, "lhs": lhs, "lhs_se": lhs_se, "rhs": rhs, "rhs_se": rhs_se, "combined_se": se, "holds": ok})
    summary = {
        "lhs": lhs, "lhs_se": lhs_se, "swap_instability_mean": float(swap.mean()),
        "swap_instability_se": float(swap.std(ddof=1)) / math.sqrt(reps), "sup_excess_mean": float(sup_excess.mean()),
    }
    config = {
        "generator": _spec_dict(spec), "score": score, "method": method, "alpha_grid": list(ALPHA_GRID), "delta": delta,
        "eps1": eps1, "eps2": eps2, "reps": reps, "inner_reps": inner_reps, "K_values": list(K_values), "seed": dataclasses.asdict(rng),
    }
    return ExperimentReport("finite_sample_bound", config, rows, summary, checks, time.perf_counter() - start)


# -- refit benchmark --------------------------------------------------------------------------


def _refit_rep(task) -> dict:
    from .suites import unimodal_checks
    from .unimodal import refit_bound

    spec, score_name, alpha, delta, eps, K, seed = task
    T, t = generate(spec, seed)
    C = score_from_name(score_name)
    P = C.predictor
    before = P.refit_counter
    exact = shortcut_closed_form(C, T, t.features, alpha, delta)
    closed_refits = P.refit_counter - before
    contained, excess_ok, refits_ok, detail = unimodal_checks(C, T, t.features, alpha, delta, None, exact, P, eps, K)
    refits = P.refit_counter - before - closed_refits
    return {"refits": refits, "bound": refit_bound(K, eps), "contained": contained, "excess_ok": excess_ok, "refits_ok": refits_ok, "closed_form_refits": closed_refits}


def run_refit_benchmark(
    spec: GeneratorSpec,
    alpha: float,
    delta: float,
    eps_list: Sequence[float],
    K: int,
    reps: int,
    rng: RngSeed,
    score: str = "in-sample:ridge:1.0",
) -> ExperimentReport:
    """Refits used by the unimodal search against its worst-case bound.

    The score must be an in-sample score with a closed-form shortcut set
    (affine predictor or kNN with ``k >= 2``), which serves as the reference
    for the containment and excess-length checks.  ``closed_form_refits`` is
    the whole fit inventory of the closed form and does not grow with ``eps``.
    """
    C = _check_score(score)
    if not C.unimodal_hint:
        raise ConfigurationError(f"{score} is not a unimodal score")
    if C.kind != "in_sample" or not (C.predictor.affine or getattr(C.predictor, "k", 0) >= 2):
        raise ConfigurationError("the refit benchmark needs an in-sample affine or kNN (k >= 2) score")
    _check_alpha(alpha)
    for eps in eps_list:
        if not 0 < eps <= 2.0**K:
            raise ConfigurationError(f"eps must lie in (0, 2**K], got {eps}")
    start = time.perf_counter()
    rows, checks = [], {"refits_within_bound": True, "containment": True, "excess_within_2eps": True}
    for idx, eps in enumerate(eps_list):
        out = pool_map(_refit_rep, [(spec, score, alpha, delta, eps, K, rng.child(idx).child(r)) for r in range(reps)])
        refits = np.array([o["refits"] for o in out])
        row = {
            "eps": eps, "K": K, "bound": out[0]["bound"], "max_refits": int(refits.max()), "mean_refits": float(refits.mean()),
            "containment_failures": sum(not o["contained"] for o in out),
            "excess_failures": sum(not o["excess_ok"] for o in out),
            "bound_failures": sum(not o["refits_ok"] for o in out),
            "closed_form_refits_max": max(o["closed_form_refits"] for o in out),
        }
        rows.append(row)
        checks["refits_within_bound"] &= row["bound_failures"] == 0
        checks["containment"] &= row["containment_failures"] == 0
        checks["excess_within_2eps"] &= row["excess_failures"] == 0
    config = {"generator": _spec_dict(spec), "score": score, "alpha": alpha, "delta": delta, "eps_list": list(eps_list), "K": K, "reps": reps, "seed": dataclasses.asdict(rng)}
    return ExperimentReport("refit_benchmark", config, rows, {}, checks, time.perf_counter() - start)


EXPERIMENTS = ("marginal", "conditional", "equivalence", "finite-sample", "refit")


def run_from_config(experiment: str, cfg: dict, seed: int) -> ExperimentReport:
    """Dispatch a JSON config to an experiment; unknown keys are configuration errors."""
    cfg = dict(cfg)
    try:
        spec = GeneratorSpec.from_dict(cfg.pop("generator"))
    except KeyError as exc:
        raise ConfigurationError("config needs a 'generator' object") from exc
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    rng = RngSeed(seed)
    runners: dict[str, tuple[Callable, dict[str, Any]]] = {
        "marginal": (run_marginal_coverage, {"method": "full", "alpha": 0.1, "delta": 0.0, "reps": 1000}),
        "conditional": (run_conditional_coverage, {"method": "shortcut", "alpha": 0.1, "delta": 0.1, "outer_reps": 300, "inner_reps": 300}),
        "equivalence": (run_equivalence, {"alpha": 0.1, "deltas": [0.0], "reps": 200}),
        "finite-sample": (run_finite_sample_bound, {"alpha_grid": None, "delta": 0.2, "eps1": 0.1, "eps2": 0.1, "reps": 500}),
        "refit": (run_refit_benchmark, {"alpha": 0.1, "delta": 0.0, "eps_list": [2.0**-k for k in (4, 8, 12)], "K": 10, "reps": 100}),
    }
    if experiment not in runners:
        raise ConfigurationError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    fn, defaults = runners[experiment]
    kwargs = defaults | cfg
    if experiment == "equivalence" and "methods" in kwargs:
        kwargs["methods"] = [tuple(p) for p in kwargs["methods"]]
    if "directed" in kwargs and kwargs["directed"] is not None:
        kwargs["directed"] = tuple(kwargs["directed"])
    try:
        return fn(spec=spec, rng=rng, **kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad config for {experiment}: {exc}") from exc
    except (ValueError, ContractError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
