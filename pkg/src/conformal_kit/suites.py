"""Deterministic property suites over seeded random instances.

Each suite draws ``reps`` instances from its own seeded stream, checks one
inequality or identity per instance and reports how many failed.  They back
the ``check-lemmas`` command and are reused by the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DataSet, GridSpec, IntervalUnion, RngSeed
from .ecdf import StepFunction, build_ecdf
from .levy import METRIC_TOL, check_quantile_inequality, gauge_upper_bounds, levy_gauge, levy_metric
from .predictors import (
    KNN,
    OLS,
    MeanOnly,
    Predictor,
    Ridge,
    augment_unique_id,
    make_in_sample_consistent,
    predict,
)
from .scores import ConformityScore, custom, in_sample, out_sample
from .sets import (
    RATIONAL_SLACK,
    check_gauge_hat_bound,
    check_sandwich,
    jackknife_symmetric,
    shortcut_closed_form,
)
from .unimodal import shortcut_unimodal

# Sums and differences of gauge values (rationals k/n) are compared in floating
# point; the slack only absorbs last-bit rounding.
SLACK = RATIONAL_SLACK

SUITE_STREAMS = {
    "gauge_hat": 11,
    "sandwich": 12,
    "levy_properties": 13,
    "quantile_inequality": 14,
    "squared_gap_bounds": 15,
    "knn_identity": 16,
    "jackknife_shortcut": 17,
    "in_sample_consistency": 18,
    "unimodal_algorithm": 19,
}


@dataclass
class SuiteResult:
    name: str
    instances: int = 0
    failures: int = 0
    examples: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.instances > 0 and self.failures == 0

    def record(self, ok: bool, detail: Callable[[], str]) -> None:
        self.instances += 1
        if not ok:
            self.failures += 1
            if len(self.examples) < 5:
                self.examples.append(detail())

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.instances - self.failures}/{self.instances}"


# -- random instances -------------------------------------------------------------


def random_dataset(gen: np.random.Generator, n: int, p: int) -> DataSet:
    X = gen.normal(size=(n, p))
    y = X @ gen.normal(size=p) + gen.normal(size=n)
    return DataSet(y, X)


def random_ecdf(gen: np.random.Generator, ties: bool = False) -> StepFunction:
    m = int(gen.integers(1, 25))
    if ties:
        return build_ecdf(gen.integers(-4, 5, size=m).astype(float) / 2)
    return build_ecdf(gen.normal(loc=gen.normal(), scale=gen.uniform(0.2, 2.0), size=m))


def random_score(gen: np.random.Generator, n: int) -> ConformityScore:
    choice = int(gen.integers(0, 6))
    if choice == 0:
        return out_sample(MeanOnly())
    if choice == 1:
        return out_sample(Ridge(float(gen.uniform(0.1, 3.0))))
    if choice == 2:
        return out_sample(KNN(int(gen.integers(1, max(2, n - 1)))))
    if choice == 3:
        return in_sample(Ridge(float(gen.uniform(0.1, 3.0))))
    if choice == 4:
        return in_sample(MeanOnly())
    return in_sample(KNN(int(gen.integers(1, n))))


def _ecdf_probe_points(*Fs: StepFunction, delta: float = 0.0) -> np.ndarray:
    pts = np.concatenate([F.breakpoints for F in Fs])
    pts = np.concatenate([pts, pts - delta, pts + delta])
    return np.concatenate([pts, np.nextafter(pts, -np.inf), np.nextafter(pts, np.inf), [-1e9, 1e9]])


# -- suites ---------------------------------------------------------------------------


def suite_gauge_hat(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("gauge_hat_bound")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["gauge_hat"], (r,)).generator()
        n, p = int(gen.integers(2, 25)), int(gen.integers(1, 4))
        T = random_dataset(gen, n, p)
        C = random_score(gen, n)
        x, y = gen.normal(size=p), float(gen.normal(scale=2.0))
        delta = 0.0 if r % 5 == 0 else float(gen.exponential(0.3))
        res.record(check_gauge_hat_bound(C, T, x, y, delta), lambda: f"rep={r} {C!r} n={n} delta={delta}")
    return res


def suite_sandwich(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("sandwich")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["sandwich"], (r,)).generator()
        n, p = int(gen.integers(3, 16)), int(gen.integers(1, 3))
        T = random_dataset(gen, n, p)
        C = random_score(gen, n)
        x = gen.normal(size=p)
        alpha = float(gen.uniform(0.0, 0.6))
        eps = float(gen.uniform(0.01, 0.4))
        d1 = float(gen.uniform(-0.2, 0.5))
        d2 = float(gen.uniform(0.01, 0.5))
        grid = GridSpec(-8.0, 8.0, 321)
        ok = check_sandwich(C, T, x, alpha, eps, d1, d2, grid)
        res.record(ok, lambda: f"rep={r} {C!r} n={n} alpha={alpha} eps={eps} d1={d1} d2={d2}")
    return res


def _levy_properties_hold(F: StepFunction, G: StepFunction, H: StepFunction, delta: float, eps: float, c: float) -> bool:
    ld = levy_gauge(F, G, delta).epsilon
    # attained infimum: the bracket holds with ld itself
    t = _ecdf_probe_points(F, G, delta=delta)
    if np.any(F(t - delta) - ld > G(t) + SLACK) or np.any(G(t) > F(t + delta) + ld + SLACK):
        return False
    # symmetry
    if ld != levy_gauge(G, F, delta).epsilon:
        return False
    # monotone in delta, bounded by the sup distance
    sup = levy_gauge(F, G, 0.0).epsilon
    if not (0.0 <= levy_gauge(F, G, delta + eps).epsilon <= ld <= sup <= 1.0):
        return False
    # right-continuity in delta: a tiny increase changes nothing once past a jump
    if levy_gauge(F, G, delta + 1e-12).epsilon > ld + SLACK:
        return False
    # triangle inequality
    if levy_gauge(F, H, delta + eps).epsilon > ld + levy_gauge(G, H, eps).epsilon + SLACK:
        return False
    # connection to the Lévy metric (bisection resolves it to METRIC_TOL)
    L = levy_metric(F, G)
    if not (min(delta, ld) - METRIC_TOL <= L <= max(delta, ld) + METRIC_TOL):
        return False
    # scaling: F(c .) has breakpoints divided by c
    return levy_gauge(F.rescaled(c), G.rescaled(c), delta / c).epsilon == ld


def suite_levy_properties(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("levy_gauge_properties")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["levy_properties"], (r,)).generator()
        ties = r % 4 == 0
        F, G, H = (random_ecdf(gen, ties) for _ in range(3))
        delta = float(gen.exponential(0.5)) if r % 7 else 0.0
        eps = float(gen.exponential(0.5))
        # powers of two keep the rescaled breakpoints exact
        c = float(2.0 ** int(gen.integers(-3, 4)))
        res.record(_levy_properties_hold(F, G, H, delta, eps, c), lambda: f"rep={r} delta={delta} eps={eps} c={c}")
    return res


def suite_quantile_inequality(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("quantile_inequality")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["quantile_inequality"], (r,)).generator()
        F, G = random_ecdf(gen, r % 4 == 0), random_ecdf(gen, r % 4 == 0)
        delta = float(gen.exponential(0.5)) if r % 5 else 0.0
        alphas = np.concatenate([gen.uniform(-0.2, 1.2, size=8), [0.0, 1.0]])
        ok = all(check_quantile_inequality(F, G, delta, float(a)) for a in alphas)
        res.record(ok, lambda: f"rep={r} delta={delta}")
    return res


def suite_squared_gap_bounds(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("squared_gap_bounds")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["squared_gap_bounds"], (r,)).generator()
        F, G = random_ecdf(gen), random_ecdf(gen)
        delta = float(gen.uniform(0.01, 2.0))
        K = float(gen.uniform(0.0, 4.0))
        mu = float(gen.normal())
        ld = levy_gauge(F, G, delta).epsilon
        windowed, full = gauge_upper_bounds(F, G, delta, K, mu)
        ok = ld <= windowed + SLACK and ld <= full + SLACK
        res.record(ok, lambda: f"rep={r} ld={ld} windowed={windowed} full={full}")
    return res


def suite_knn_identity(reps: int, seed: int) -> SuiteResult:
    """In-sample kNN error equals (k-1)/k times the out-of-sample (k-1)NN error."""
    res = SuiteResult("knn_identity")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["knn_identity"], (r,)).generator()
        n, p = int(gen.integers(3, 30)), int(gen.integers(1, 4))
        T = random_dataset(gen, n, p)
        k = int(gen.integers(2, n + 1))
        x, y = gen.normal(size=p), float(gen.normal(scale=3.0))
        lhs = float(in_sample(KNN(k)).evaluate(y, x, T.X, T.y)[0])
        rhs = (k - 1) / k * abs(y - predict(KNN(k - 1), x, T))
        res.record(abs(lhs - rhs) <= 1e-12, lambda: f"rep={r} n={n} k={k} lhs={lhs} rhs={rhs}")
    return res


def _endpoint_gap(a: IntervalUnion, b: IntervalUnion) -> float:
    if a.bounds is None or b.bounds is None:
        return 0.0 if a.bounds == b.bounds else math.inf
    (a0, a1), (b0, b1) = a.bounds, b.bounds
    gap = 0.0
    for u, v in ((a0, b0), (a1, b1)):
        if u != v:
            gap = max(gap, abs(u - v))
    return gap


def _base_predictors(gen: np.random.Generator) -> list[Predictor]:
    return [MeanOnly(), OLS(), Ridge(1.0), Ridge(float(gen.uniform(0.1, 5.0)))]


def suite_jackknife_shortcut(reps: int, seed: int) -> SuiteResult:
    """Out-of-sample shortcut closed form equals the symmetric Jackknife."""
    res = SuiteResult("jackknife_equals_shortcut")
    for r in range(reps):
        gen = RngSeed(seed, SUITE_STREAMS["jackknife_shortcut"], (r,)).generator()
        n, p = int(gen.integers(5, 40)), int(gen.integers(1, 4))
        T = random_dataset(gen, n, p)
        x = gen.normal(size=p)
        alpha, delta = float(gen.uniform(0.02, 0.5)), float(gen.uniform(0.0, 0.5))
        for P in _base_predictors(gen):
            sc = shortcut_closed_form(out_sample(P), T, x, alpha, delta)
            jk = jackknife_symmetric(P, T, x, alpha, delta)
            gap = _endpoint_gap(sc, jk)
            res.record(gap <= 1e-12, lambda: f"rep={r} {P!r} gap={gap}")
    return res


def suite_in_sample_consistency(reps: int, seed: int) -> SuiteResult:
    """The in-sample-consistent wrapper reproduces leave-one-out predictions, and
    its in-sample shortcut equals the base's Jackknife."""
    res = SuiteResult("in_sample_consistency")
    for r in range(reps):
        root = RngSeed(seed, SUITE_STREAMS["in_sample_consistency"], (r,))
        gen = root.generator()
        n, p = int(gen.integers(5, 30)), int(gen.integers(1, 4))
        T = augment_unique_id(random_dataset(gen, n, p), root.child(1))
        x = np.append(gen.normal(size=p), gen.uniform())
        alpha, delta = float(gen.uniform(0.02, 0.5)), float(gen.uniform(0.0, 0.5))
        ok, detail = True, ""
        for A in _base_predictors(gen):
            B = make_in_sample_consistent(A)
            fitted = B.fit_predict_points(T.X, T.y, T.X)
            loo = np.array([predict(A, T.X[i], T.without(i)) for i in range(n)])
            if not np.array_equal(fitted, loo):
                ok, detail = False, f"{A!r} in-sample max gap {np.max(np.abs(fitted - loo))}"
                break
            gap = _endpoint_gap(shortcut_closed_form(in_sample(B), T, x, alpha, delta), jackknife_symmetric(A, T, x, alpha, delta))
            if gap > 1e-12:
                ok, detail = False, f"{A!r} shortcut/Jackknife gap {gap}"
                break
        res.record(ok, lambda: f"rep={r} {detail}")
    return res


def power_score(m: float, c_left: float, c_right: float, power: float) -> ConformityScore:
    """Model-free asymmetric unimodal score ``c (y - m)^power`` with side-dependent ``c``."""

    def handle(y, x, X, Y):
        return c_left * (m - y) ** power if y < m else c_right * (y - m) ** power

    return custom(handle, unimodal_hint=True)


def power_score_set(m: float, c_left: float, c_right: float, power: float, b: float) -> IntervalUnion:
    if b < 0:
        return IntervalUnion.empty()
    return IntervalUnion.closed(m - (b / c_left) ** (1 / power), m + (b / c_right) ** (1 / power))


def unimodal_instance(gen: np.random.Generator, root: RngSeed):
    """One random unimodal problem with its exact shortcut set.

    Returns ``(C, T, x, alpha, delta, threshold, exact_set, predictor_or_None)``.
    """
    n, p = int(gen.integers(5, 30)), int(gen.integers(1, 3))
    scale = float(2.0 ** gen.uniform(-3, 6))
    T0 = random_dataset(gen, n, p)
    T = DataSet(T0.y * scale, T0.X)
    x = gen.normal(size=p)
    alpha = float(gen.uniform(0.02, 0.6))
    delta = float(gen.uniform(-0.05, 0.3)) * scale
    kind = int(gen.integers(0, 3))
    if kind == 0:
        P = [MeanOnly(), OLS(), Ridge(float(gen.uniform(0.1, 5.0)))][int(gen.integers(0, 3))]
        C = in_sample(P)
        return C, T, x, alpha, delta, None, shortcut_closed_form(C, T, x, alpha, delta), P
    if kind == 1:
        P = KNN(int(gen.integers(2, min(n, 6) + 1)))
        C = in_sample(P)
        return C, T, x, alpha, delta, None, shortcut_closed_form(C, T, x, alpha, delta), P
    m = float(gen.normal(scale=2.0 ** gen.uniform(-2, 9)))
    c_left, c_right = float(gen.uniform(0.2, 3.0)), float(gen.uniform(0.2, 3.0))
    power = float(gen.uniform(0.5, 2.5))
    b = float(gen.exponential(2.0 ** gen.uniform(-4, 8)))
    C = power_score(m, c_left, c_right, power)
    return C, T, x, alpha, delta, b, power_score_set(m, c_left, c_right, power, b), None


UNIMODAL_EPS_EXPONENTS = tuple(range(4, 13))
UNIMODAL_KS = (4, 8, 10)


def unimodal_checks(C, T, x, alpha, delta, threshold, exact, P, eps, K) -> tuple[bool, bool, bool, str]:
    """Containment, excess length and refit-count checks for one run."""
    before = P.refit_counter if P is not None else 0
    report = shortcut_unimodal(C, T, x, alpha, delta, eps, K, threshold=threshold)
    PI = report.interval
    if P is not None:
        refits = P.refit_counter - before
    else:
        # model-free score: one notional fit for the threshold, one per evaluation
        refits = report.refits
    contained = exact.is_subset_of(PI)
    edge = 2.0**K
    excess_ok = True
    bounds = exact.bounds
    if bounds is not None and -edge + eps <= bounds[0] and bounds[1] <= edge - eps:
        excess_ok = PI.length - exact.length <= 2 * eps + 1e-9 * max(1.0, eps)
    refits_ok = refits <= report.bound
    return contained, excess_ok, refits_ok, f"branch={report.branch} refits={refits}/{report.bound} PI={PI} exact={exact}"


def suite_unimodal_algorithm(reps: int, seed: int) -> SuiteResult:
    res = SuiteResult("unimodal_algorithm")
    for r in range(reps):
        root = RngSeed(seed, SUITE_STREAMS["unimodal_algorithm"], (r,))
        gen = root.generator()
        inst = unimodal_instance(gen, root)
        eps = 2.0 ** -int(gen.choice(UNIMODAL_EPS_EXPONENTS))
        K = int(gen.choice(UNIMODAL_KS))
        c, e, f, detail = unimodal_checks(*inst, eps, K)
        res.record(c and e and f, lambda: f"rep={r} eps={eps} K={K} contained={c} excess={e} refits={f} {detail}")
    return res


SUITES: dict[str, Callable[[int, int], SuiteResult]] = {
    "gauge_hat": suite_gauge_hat,
    "sandwich": suite_sandwich,
    "levy_properties": suite_levy_properties,
    "quantile_inequality": suite_quantile_inequality,
    "squared_gap_bounds": suite_squared_gap_bounds,
    "knn_identity": suite_knn_identity,
    "jackknife_shortcut": suite_jackknife_shortcut,
    "in_sample_consistency": suite_in_sample_consistency,
    "unimodal_algorithm": suite_unimodal_algorithm,
}


def run_all(reps: int, seed: int, names=None) -> list[SuiteResult]:
    names = list(SUITES) if names is None else list(names)
    return [SUITES[name](reps, seed) for name in names]
