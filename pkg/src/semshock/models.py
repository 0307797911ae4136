"""Lagged design matrices and the base/enhanced regression pair.

The base design regresses a series on its own ``lag`` most recent values;
the enhanced design appends exactly one exogenous column, the candidate
driver sampled ``lag`` steps back. Two model kinds are supported: ordinary
least squares (minimum-norm under rank deficiency) and kernel ridge
regression with an RBF kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError, NumericError

log = logging.getLogger(__name__)

MODEL_KINDS = ("linear", "krr")


@dataclass
class Design:
    """Row-aligned targets and lagged regressors for one evaluation."""

    targets: np.ndarray          # (rows,)
    regressors: np.ndarray       # (rows, p); columns lag-1..lag-L [, exog at lag L]
    row_dates: list | None       # per-row date labels when the input carried dates
    lag: int
    enhanced: bool

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]


@dataclass
class FitResult:
    """Fitted state plus strictly out-of-sample test predictions."""

    model_kind: str
    parameters: dict = field(repr=False)
    predictions: np.ndarray
    train_rows: int
    test_rows: int


def _series_values(series) -> tuple[np.ndarray, list | None]:
    """Accept a FeatureSeries-like object (``.values``/``.dates``) or a plain array."""
    if hasattr(series, "values") and hasattr(series, "dates"):
        return np.asarray(series.values, dtype=float), list(series.dates)
    return np.asarray(series, dtype=float), None


def build_design(y, x=None, lag: int = 1) -> Design:
    """Build the base design from ``y`` alone, or the enhanced design with one
    exogenous column ``x[t - lag]`` appended.

    Rows with incomplete history are dropped, so a length-n input yields
    ``n - lag`` rows. Column j of the base block holds the target shifted
    j+1 steps back.
    """
    if lag < 1:
        raise InputError(f"lag must be >= 1, got {lag}")
    y_vals, y_dates = _series_values(y)
    if y_vals.ndim != 1:
        raise InputError("target series must be one-dimensional")
    n = y_vals.shape[0]
    if n <= lag + 1:
        raise InputError(f"series length {n} too short for lag {lag}")

    x_vals = None
    if x is not None:
        x_vals, x_dates = _series_values(x)
        if x_vals.shape != y_vals.shape:
            raise InputError("exogenous series length does not match target")
        if y_dates is not None and x_dates is not None and y_dates != x_dates:
            raise InputError("target and exogenous series are on different calendars")

    targets = y_vals[lag:]
    cols = [y_vals[lag - j - 1 : n - j - 1] for j in range(lag)]
    if x_vals is not None:
        cols.append(x_vals[: n - lag])
    regressors = np.column_stack(cols)
    row_dates = y_dates[lag:] if y_dates is not None else None
    return Design(
        targets=targets,
        regressors=regressors,
        row_dates=row_dates,
        lag=lag,
        enhanced=x_vals is not None,
    )


def _check_split(train_idx: np.ndarray, test_idx: np.ndarray, n_rows: int) -> None:
    if train_idx.size == 0 or test_idx.size == 0:
        raise InputError("empty train or test split")
    if train_idx.min() < 0 or test_idx.max() >= n_rows:
        raise InputError("split indices outside design rows")
    if train_idx.max() >= test_idx.min():
        raise InputError("train rows must strictly precede test rows")


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K_ij = exp(-gamma * ||a_i - b_j||^2)."""
    return np.exp(-gamma * _squared_distances(a, b))


def fit_predict(
    design: Design,
    train_idx: Sequence[int],
    test_idx: Sequence[int],
    kind: str = "linear",
    ridge_lambda: float = 1.0,
    rbf_gamma: float | None = None,
    standardize: bool | None = None,
    intercept: bool | None = None,
) -> FitResult:
    """Fit on the train rows and predict the test rows, strictly out of sample.

    ``linear`` solves min-norm least squares (an intercept column is prepended
    unless ``intercept`` is False). ``krr`` solves (K + lambda I) alpha = y
    with an RBF kernel; ``rbf_gamma`` defaults to 1/p and features are
    z-scored on train statistics unless ``standardize`` is False.
    """
    if kind not in MODEL_KINDS:
        raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    train_idx = np.asarray(list(train_idx), dtype=int)
    test_idx = np.asarray(list(test_idx), dtype=int)
    _check_split(train_idx, test_idx, design.n_rows)

    X_train = design.regressors[train_idx]
    y_train = design.targets[train_idx]
    X_test = design.regressors[test_idx]

    if kind == "linear":
        use_intercept = True if intercept is None else intercept
        if use_intercept:
            X_fit = np.column_stack([np.ones(len(X_train)), X_train])
            X_eval = np.column_stack([np.ones(len(X_test)), X_test])
        else:
            X_fit, X_eval = X_train, X_test
        beta, _, rank, _ = np.linalg.lstsq(X_fit, y_train, rcond=None)
        if rank < X_fit.shape[1]:
            log.debug("rank-deficient linear design (rank %d of %d); minimum-norm solution used",
                      rank, X_fit.shape[1])
        predictions = X_eval @ beta
        params = {"beta": beta, "intercept": use_intercept}
    else:
        if ridge_lambda <= 0:
            raise InputError(f"ridge_lambda must be > 0 for krr, got {ridge_lambda}")
        p = X_train.shape[1]
        gamma = 1.0 / p if rbf_gamma is None else rbf_gamma
        if gamma <= 0:
            raise InputError(f"rbf_gamma must be > 0, got {gamma}")
        do_standardize = True if standardize is None else standardize
        if do_standardize:
            mu = X_train.mean(axis=0)
            sd = X_train.std(axis=0)
            sd = np.where(sd == 0.0, 1.0, sd)
            X_tr = (X_train - mu) / sd
            X_te = (X_test - mu) / sd
        else:
            X_tr, X_te = X_train, X_test
        K = rbf_kernel(X_tr, X_tr, gamma)
        A = K + ridge_lambda * np.eye(K.shape[0])
        try:
            alpha = np.linalg.solve(A, y_train)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"kernel ridge solve failed: {exc}") from exc
        if not np.all(np.isfinite(alpha)):
            raise NumericError("kernel ridge solve produced non-finite weights")
        predictions = rbf_kernel(X_te, X_tr, gamma) @ alpha
        params = {
            "alpha": alpha,
            "gamma": gamma,
            "ridge_lambda": ridge_lambda,
            "train_inputs": X_tr,
            "standardize": do_standardize,
        }

    if not np.all(np.isfinite(predictions)):
        raise NumericError("model produced non-finite predictions")
    return FitResult(
        model_kind=kind,
        parameters=params,
        predictions=predictions,
        train_rows=len(train_idx),
        test_rows=len(test_idx),
    )
