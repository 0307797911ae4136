"""Granger-style evaluation grid and its statistical inference layer.

For every (outlet, shock, lag, direction, model kind) cell, a base
autoregression on the target's own lags is compared out-of-sample against an
enhanced model that adds the candidate driver at one lag. A paired one-sided
t-test on the squared-error differences yields the cell's p-value; group
effects use an exact binomial test, pair significance a Bonferroni-adjusted
threshold, and confounder / feedback scans reuse the same machinery.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.stats

from .errors import InputError
from .features import AlignedPanel, FeatureSeries
from .models import build_design, fit_predict

log = logging.getLogger(__name__)

DIRECTIONS = ("econ_to_text", "text_to_econ")
DT_CONVENTIONS = ("squared", "signed")
_DEGENERATE_VAR = 1e-24

# field name -> PairResult attribute, for grouping and Bonferroni scopes
_GROUP_FIELDS = {
    "direction": "direction",
    "orientation": "orientation",
    "outlet": "outlet_id",
    "shock": "shock_id",
    "lag": "lag",
    "kind": "model_kind",
}


@dataclass(frozen=True)
class Split:
    """Static temporal split: train, carved-out validation, then test."""

    train_rows: range
    validation_rows: range
    test_rows: range

    @property
    def n_rows(self) -> int:
        return len(self.train_rows) + len(self.validation_rows) + len(self.test_rows)


@dataclass(frozen=True)
class Window:
    """One rolling-evaluation window over series rows."""

    index: int
    start: int
    span: int = 365
    test: int = 90

    @property
    def span_rows(self) -> range:
        return range(self.start, self.start + self.span)

    @property
    def test_rows(self) -> range:
        return range(self.start + self.span - self.test, self.start + self.span)

    @property
    def train_rows(self) -> range:
        return range(self.start, self.start + self.span - self.test)


@dataclass
class PairResult:
    """Outcome of one directed Granger evaluation."""

    direction: str
    outlet_id: str
    shock_id: str
    lag: int
    model_kind: str
    mse_base: float
    mse_enhanced: float
    t_stat: float
    p_value: float
    n_test: int
    degenerate: bool
    orientation: str | None = None


@dataclass
class GroupResult:
    """Binomial group test over the p-values sharing one grouping key."""

    group_key: tuple[tuple[str, object], ...]
    n_tests: int
    n_significant: int
    rho_hat: float
    binomial_p: float
    alpha: float
    significant: bool


@dataclass
class DeviationSeries:
    """Per-window MSE improvement of the enhanced model, centered on its mean."""

    window_index: list[int]
    delta: np.ndarray
    mean_delta: float
    deviation: np.ndarray


@dataclass
class ConfounderHit:
    variable_id: str
    category: str
    p_treatment: float
    p_outcome: float


@dataclass
class ConfounderReport:
    """Candidate drivers of both members of one significant pair."""

    pair: tuple[str, str]            # (treatment id, outcome id)
    direction: str
    model_kind: str
    confounders: list[ConfounderHit] = field(default_factory=list)


@dataclass
class FeedbackLoop:
    """A pair significant in both directions under the corrected threshold."""

    outlet_id: str
    shock_id: str
    lags: dict[str, tuple[int, ...]]


def make_splits(
    n_rows: int,
    mode: str = "static",
    span: int = 365,
    test: int = 90,
    step: int = 180,
    train_frac: float = 0.7,
    validation_frac: float = 0.1,
):
    """Static 70/10-of-train/30 split, or the rolling window schedule.

    Static: the first 70% of rows form the training block, whose final 10%
    is carved out as validation; the remainder is the test set. Rolling:
    windows of ``span`` rows start every ``step`` rows while they fit; the
    final ``test`` rows of each window are its test set.
    """
    if mode == "static":
        if n_rows < 20:
            raise InputError(f"need at least 20 rows for a static split, got {n_rows}")
        train_block = int(math.floor(train_frac * n_rows))
        validation = int(math.floor(validation_frac * train_block))
        return Split(
            train_rows=range(0, train_block - validation),
            validation_rows=range(train_block - validation, train_block),
            test_rows=range(train_block, n_rows),
        )
    if mode == "rolling":
        if n_rows < span:
            raise InputError(f"need at least {span} rows for one rolling window, got {n_rows}")
        windows = []
        start = 0
        while start + span <= n_rows:
            windows.append(Window(index=len(windows), start=start, span=span, test=test))
            start += step
        return windows
    raise InputError(f"unknown split mode {mode!r}")


@dataclass(frozen=True)
class TTest:
    t_stat: float
    p_value: float
    degenerate: bool


def paired_t(d: Sequence[float]) -> TTest:
    """One-sided paired t-test of mean(d) > 0 with T-1 degrees of freedom.

    Near-zero sample variance is flagged degenerate: p is 0 when the mean is
    positive and 1 otherwise.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if n < 2:
        raise InputError(f"paired t-test needs at least 2 observations, got {n}")
    mean = float(np.mean(d))
    var = float(np.var(d, ddof=1))
    if var < _DEGENERATE_VAR:
        if mean > 0:
            return TTest(t_stat=math.inf, p_value=0.0, degenerate=True)
        return TTest(t_stat=-math.inf if mean < 0 else 0.0, p_value=1.0, degenerate=True)
    t_stat = mean / math.sqrt(var / n)
    p_value = float(scipy.stats.t.sf(t_stat, df=n - 1))
    return TTest(t_stat=t_stat, p_value=p_value, degenerate=False)


def binomial_tail(k: int, n: int, p: float) -> float:
    """Exact upper tail P(X >= k) for X ~ Binomial(n, p), by direct pmf summation."""
    if n < 1:
        raise InputError("binomial tail needs n >= 1")
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    pmf = (1.0 - p) ** n
    total = pmf if k == 0 else 0.0
    for j in range(1, n + 1):
        pmf *= (n - j + 1) / j * (p / (1.0 - p))
        if j >= k:
            total += pmf
    return min(total, 1.0)


def binomial_group_test(
    p_values: Sequence[float],
    alpha: float = 0.05,
    group_key: tuple[tuple[str, object], ...] = (),
) -> GroupResult:
    """Test whether the share of p-values below alpha exceeds alpha itself."""
    p_values = list(p_values)
    if not p_values:
        raise InputError("binomial group test needs at least one p-value")
    n = len(p_values)
    n_significant = sum(1 for p in p_values if p < alpha)
    binom_p = binomial_tail(n_significant, n, alpha)
    return GroupResult(
        group_key=group_key,
        n_tests=n,
        n_significant=n_significant,
        rho_hat=n_significant / n,
        binomial_p=binom_p,
        alpha=alpha,
        significant=binom_p < alpha,
    )


def group_tests(
    results: Sequence[PairResult],
    keys: Sequence[Sequence[str]],
    alpha: float = 0.05,
) -> list[GroupResult]:
    """Run the binomial group test for every grouping key combination."""
    out: list[GroupResult] = []
    for key_fields in keys:
        attrs = []
        for name in key_fields:
            if name not in _GROUP_FIELDS:
                raise InputError(f"unknown grouping field {name!r}")
            attrs.append(_GROUP_FIELDS[name])
        groups: dict[tuple, list[float]] = {}
        for r in results:
            key = tuple((name, getattr(r, attr)) for name, attr in zip(key_fields, attrs))
            groups.setdefault(key, []).append(r.p_value)
        for key in sorted(groups, key=lambda k: tuple(str(v) for _, v in k)):
            out.append(binomial_group_test(groups[key], alpha=alpha, group_key=key))
    return out


def _window_design_split(n_design: int, window: Window, lag: int):
    test = min(window.test, n_design - 1)
    if n_design - test < 2:
        raise InputError(f"window span too short for lag {lag}")
    train_idx = range(0, n_design - test)
    test_idx = range(n_design - test, n_design)
    return train_idx, test_idx


def evaluate_pair(
    y: FeatureSeries,
    x: FeatureSeries,
    lag: int,
    kind: str = "linear",
    split: Split | Window | None = None,
    ridge_lambda: float = 1.0,
    rbf_gamma: float | None = None,
    standardize: bool | None = None,
    intercept: bool | None = None,
    dt_convention: str = "squared",
    direction: str | None = None,
    outlet_id: str | None = None,
    shock_id: str | None = None,
    orientation: str | None = None,
) -> PairResult:
    """Compare base vs enhanced out-of-sample prediction of ``y`` and test the
    error difference.

    d_t defaults to the squared-error difference e_B^2 - e_E^2, so a positive
    mean certifies error reduction; ``dt_convention='signed'`` keeps the raw
    error difference instead.
    """
    if dt_convention not in DT_CONVENTIONS:
        raise InputError(f"unknown dt_convention {dt_convention!r}")
    if len(y) != len(x):
        raise InputError("paired series have different lengths")
    if y.dates != x.dates:
        raise InputError("paired series are on different calendars")

    if isinstance(split, Window):
        rows = split.span_rows
        if rows.stop > len(y):
            raise InputError(f"window {split.index} exceeds series length {len(y)}")
        y_use = FeatureSeries(y.id, y.kind, y.dates[rows.start : rows.stop],
                              y.values[rows.start : rows.stop], y.orientation)
        x_use = FeatureSeries(x.id, x.kind, x.dates[rows.start : rows.stop],
                              x.values[rows.start : rows.stop], x.orientation)
        design_base = build_design(y_use, None, lag)
        design_enh = build_design(y_use, x_use, lag)
        train_idx, test_idx = _window_design_split(design_base.n_rows, split, lag)
    else:
        design_base = build_design(y, None, lag)
        design_enh = build_design(y, x, lag)
        if split is None:
            split = make_splits(design_base.n_rows, "static")
        if split.n_rows != design_base.n_rows:
            raise InputError(
                f"split made for {split.n_rows} rows but design has {design_base.n_rows}"
            )
        train_idx, test_idx = split.train_rows, split.test_rows

    common = dict(ridge_lambda=ridge_lambda, rbf_gamma=rbf_gamma,
                  standardize=standardize, intercept=intercept)
    fit_base = fit_predict(design_base, train_idx, test_idx, kind=kind, **common)
    fit_enh = fit_predict(design_enh, train_idx, test_idx, kind=kind, **common)

    y_test = design_base.targets[np.asarray(list(test_idx), dtype=int)]
    e_base = fit_base.predictions - y_test
    e_enh = fit_enh.predictions - y_test
    mse_base = float(np.mean(e_base**2))
    mse_enh = float(np.mean(e_enh**2))
    if dt_convention == "squared":
        d = e_base**2 - e_enh**2
    else:
        d = e_base - e_enh
    ttest = paired_t(d)

    return PairResult(
        direction=direction or "",
        outlet_id=outlet_id or y.id,
        shock_id=shock_id or x.id,
        lag=lag,
        model_kind=kind,
        mse_base=mse_base,
        mse_enhanced=mse_enh,
        t_stat=ttest.t_stat,
        p_value=ttest.p_value,
        n_test=len(test_idx),
        degenerate=ttest.degenerate,
        orientation=orientation,
    )


def run_grid(
    panel: AlignedPanel,
    lags: Iterable[int],
    kinds: Iterable[str],
    directions: Iterable[str] = DIRECTIONS,
    split: Split | Window | None = None,
    ridge_lambda: float = 1.0,
    rbf_gamma: float | None = None,
    standardize: bool | None = None,
    intercept: bool | None = None,
    dt_convention: str = "squared",
) -> list[PairResult]:
    """One PairResult per (direction, outlet, shock, lag, kind), in that order.

    ``econ_to_text`` predicts the outlet feature enhanced by the shock;
    ``text_to_econ`` predicts the shock enhanced by the outlet feature.
    """
    outlets = sorted(panel.ids_of_kind("news_distance"))
    shocks = sorted(panel.ids_of_kind("shock"))
    if not outlets or not shocks:
        raise InputError("grid needs at least one news series and one shock series")
    lags = sorted(set(int(v) for v in lags))
    kinds = sorted(set(kinds))
    directions = sorted(set(directions))
    if not lags or not kinds or not directions:
        raise InputError("empty grid")
    for direction in directions:
        if direction not in DIRECTIONS:
            raise InputError(f"unknown direction {direction!r}")

    results: list[PairResult] = []
    for direction in directions:
        for outlet in outlets:
            outlet_series = panel.series(outlet)
            for shock in shocks:
                shock_s = panel.series(shock)
                y, x = (outlet_series, shock_s) if direction == "econ_to_text" else (shock_s, outlet_series)
                for lag in lags:
                    for kind in kinds:
                        results.append(
                            evaluate_pair(
                                y, x, lag, kind=kind, split=split,
                                ridge_lambda=ridge_lambda, rbf_gamma=rbf_gamma,
                                standardize=standardize, intercept=intercept,
                                dt_convention=dt_convention,
                                direction=direction, outlet_id=outlet, shock_id=shock,
                                orientation=panel.orientation(outlet),
                            )
                        )
    return results


def _scope_key(result: PairResult, scope: str) -> tuple:
    if scope == "orientation_direction_kind":
        return (result.orientation, result.direction, result.model_kind)
    if scope == "direction_kind":
        return (result.direction, result.model_kind)
    if scope == "global":
        return ()
    raise InputError(f"unknown bonferroni scope {scope!r}")


def bonferroni_threshold(results: Sequence[PairResult], alpha: float, m: int | None,
                         scope: str) -> dict[int, float]:
    """Per-result corrected threshold alpha/M, keyed by result identity."""
    if m is not None:
        if m < 1:
            raise InputError("Bonferroni test count M must be >= 1")
        return {id(r): alpha / m for r in results}
    counts: dict[tuple, int] = {}
    for r in results:
        key = _scope_key(r, scope)
        counts[key] = counts.get(key, 0) + 1
    return {id(r): alpha / counts[_scope_key(r, scope)] for r in results}


def bonferroni_select(
    results: Sequence[PairResult],
    alpha: float = 0.05,
    m: int | None = None,
    scope: str = "orientation_direction_kind",
) -> list[PairResult]:
    """Retain results with p below the Bonferroni-adjusted threshold.

    When ``m`` is not given, M is the number of tests sharing the scope key
    (by default the tests of the same partisan group, direction and model
    kind).
    """
    thresholds = bonferroni_threshold(results, alpha, m, scope)
    return [r for r in results if r.p_value < thresholds[id(r)]]


def detect_feedback(
    results: Sequence[PairResult],
    alpha: float = 0.05,
    m: int | None = None,
    scope: str = "orientation_direction_kind",
) -> list[FeedbackLoop]:
    """Flag (outlet, shock) pairs whose both directions pass the corrected threshold."""
    selected = bonferroni_select(results, alpha=alpha, m=m, scope=scope)
    by_pair: dict[tuple[str, str], dict[str, set[int]]] = {}
    for r in selected:
        lags = by_pair.setdefault((r.outlet_id, r.shock_id), {d: set() for d in DIRECTIONS})
        lags[r.direction].add(r.lag)
    loops = []
    for (outlet, shock) in sorted(by_pair):
        lags = by_pair[(outlet, shock)]
        if all(lags[d] for d in DIRECTIONS):
            loops.append(
                FeedbackLoop(
                    outlet_id=outlet,
                    shock_id=shock,
                    lags={d: tuple(sorted(lags[d])) for d in DIRECTIONS},
                )
            )
    return loops


_CANDIDATE_CATEGORY = {
    "news_distance": "news_outlet",
    "shock": "shock",
    "auxiliary": "economic_indicator",
    "emotion": "emotion",
}


def _sample_on_panel(candidate: FeatureSeries, panel: AlignedPanel) -> FeatureSeries:
    if candidate.dates == panel.dates:
        return candidate
    index = {d: i for i, d in enumerate(candidate.dates)}
    missing = [d for d in panel.dates if d not in index]
    if missing:
        raise InputError(
            f"candidate {candidate.id!r} does not cover panel date {missing[0]}"
        )
    rows = [index[d] for d in panel.dates]
    return FeatureSeries(candidate.id, candidate.kind, list(panel.dates),
                         candidate.values[rows], candidate.orientation)


def confounder_scan(
    selected: Sequence[PairResult],
    candidates: Sequence[FeatureSeries],
    panel: AlignedPanel,
    lags: Iterable[int] = range(1, 11),
    alpha: float = 0.05,
    split: Split | None = None,
    ridge_lambda: float = 1.0,
    rbf_gamma: float | None = None,
    standardize: bool | None = None,
    intercept: bool | None = None,
    dt_convention: str = "squared",
) -> list[ConfounderReport]:
    """Scan each retained pair for variables driving both of its members.

    A candidate z confounds a pair (x, y) when the lag-minimum p-values of
    both z -> x and z -> y fall below alpha divided by the scan's total test
    count. The pair's own members are excluded by construction.
    """
    lags = sorted(set(int(v) for v in lags))
    if not lags:
        raise InputError("confounder scan needs a non-empty lag set")
    sampled = [_sample_on_panel(c, panel) for c in candidates]

    # unique (treatment, outcome, kind) pairs among the retained results
    pairs: dict[tuple[str, str, str, str], None] = {}
    for r in selected:
        if r.direction == "econ_to_text":
            treatment, outcome = r.shock_id, r.outlet_id
        else:
            treatment, outcome = r.outlet_id, r.shock_id
        pairs.setdefault((treatment, outcome, r.direction, r.model_kind))

    jobs = []
    for (treatment, outcome, direction, kind) in pairs:
        for candidate in sampled:
            if candidate.id in (treatment, outcome):
                continue
            jobs.append((treatment, outcome, direction, kind, candidate))
    total_tests = len(jobs) * len(lags) * 2
    if total_tests == 0:
        return [
            ConfounderReport(pair=(t, o), direction=d, model_kind=k)
            for (t, o, d, k) in pairs
        ]
    threshold = alpha / total_tests

    common = dict(ridge_lambda=ridge_lambda, rbf_gamma=rbf_gamma,
                  standardize=standardize, intercept=intercept,
                  dt_convention=dt_convention, split=split)
    reports: dict[tuple, ConfounderReport] = {
        key: ConfounderReport(pair=(key[0], key[1]), direction=key[2], model_kind=key[3])
        for key in pairs
    }
    for (treatment, outcome, direction, kind, candidate) in jobs:
        p_treat = min(
            evaluate_pair(panel.series(treatment), candidate, lag, kind=kind, **common).p_value
            for lag in lags
        )
        p_out = min(
            evaluate_pair(panel.series(outcome), candidate, lag, kind=kind, **common).p_value
            for lag in lags
        )
        if p_treat < threshold and p_out < threshold:
            reports[(treatment, outcome, direction, kind)].confounders.append(
                ConfounderHit(
                    variable_id=candidate.id,
                    category=_CANDIDATE_CATEGORY[candidate.kind],
                    p_treatment=p_treat,
                    p_outcome=p_out,
                )
            )
    return [reports[key] for key in pairs]


def temporal_deviation(
    window_mses: Sequence[tuple[float, float]],
    relative: bool = False,
) -> DeviationSeries:
    """Center the per-window enhanced-model improvement on its mean.

    Each element of ``window_mses`` is (mse_base, mse_enhanced) for one
    window; the improvement is their difference (optionally relative to the
    base MSE).
    """
    if len(window_mses) < 2:
        raise InputError("temporal deviation needs at least 2 windows")
    base = np.asarray([m[0] for m in window_mses], dtype=float)
    enhanced = np.asarray([m[1] for m in window_mses], dtype=float)
    delta = base - enhanced
    if relative:
        delta = delta / np.where(base == 0.0, 1.0, base)
    mean = float(np.mean(delta))
    return DeviationSeries(
        window_index=list(range(len(window_mses))),
        delta=delta,
        mean_delta=mean,
        deviation=delta - mean,
    )
