"""Report emission: result tables, group summaries, and figure plot-data.

Every report is a CSV with a documented, fixed column order so runs are
byte-reproducible and diffable; confounder and feedback findings are written
as structured key=value text records.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .causality import (
    ConfounderReport,
    DeviationSeries,
    FeedbackLoop,
    GroupResult,
    PairResult,
    binomial_group_test,
)

log = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "direction", "orientation", "outlet", "shock", "lag", "model",
    "mse_base", "mse_enhanced", "t_stat", "p_value", "n_test", "degenerate",
]
_FLOAT_FORMAT = "%.12g"


def results_frame(results: Sequence[PairResult]) -> pd.DataFrame:
    rows = [
        {
            "direction": r.direction,
            "orientation": r.orientation or "",
            "outlet": r.outlet_id,
            "shock": r.shock_id,
            "lag": r.lag,
            "model": r.model_kind,
            "mse_base": r.mse_base,
            "mse_enhanced": r.mse_enhanced,
            "t_stat": r.t_stat,
            "p_value": r.p_value,
            "n_test": r.n_test,
            "degenerate": r.degenerate,
        }
        for r in results
    ]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def groups_frame(groups: Sequence[GroupResult]) -> pd.DataFrame:
    rows = []
    for g in groups:
        row = {
            "grouping": "+".join(name for name, _ in g.group_key),
            "direction": "", "orientation": "", "outlet": "", "shock": "",
            "lag": "", "kind": "",
        }
        for name, value in g.group_key:
            row[name] = value
        row.update(
            n_tests=g.n_tests,
            n_significant=g.n_significant,
            rho_hat=g.rho_hat,
            binomial_p=g.binomial_p,
            significant=g.significant,
        )
        rows.append(row)
    columns = ["grouping", "direction", "orientation", "outlet", "shock", "lag", "kind",
               "n_tests", "n_significant", "rho_hat", "binomial_p", "significant"]
    return pd.DataFrame(rows, columns=columns)


def _proportion_rows(results: Sequence[PairResult], fields: list[str], alpha: float) -> pd.DataFrame:
    """Proportion of significant pairs per unique combination of ``fields``.

    An ``orientation`` field additionally receives pooled rows labeled
    ``all``.
    """
    getters = {
        "direction": lambda r: r.direction,
        "kind": lambda r: r.model_kind,
        "orientation": lambda r: r.orientation or "",
        "lag": lambda r: r.lag,
        "shock": lambda r: r.shock_id,
    }
    buckets: dict[tuple, list[float]] = {}
    for r in results:
        key = tuple(getters[f](r) for f in fields)
        buckets.setdefault(key, []).append(r.p_value)
        if "orientation" in fields:
            i = fields.index("orientation")
            pooled = key[:i] + ("all",) + key[i + 1 :]
            buckets.setdefault(pooled, []).append(r.p_value)

    rows = []
    for key in sorted(buckets, key=lambda k: tuple(str(v) for v in k)):
        test = binomial_group_test(buckets[key], alpha=alpha)
        row = dict(zip(fields, key))
        row.update(
            n_tests=test.n_tests,
            n_significant=test.n_significant,
            proportion_pct=100.0 * test.rho_hat,
            binomial_p=test.binomial_p,
            significant=test.significant,
        )
        rows.append(row)
    columns = fields + ["n_tests", "n_significant", "proportion_pct", "binomial_p", "significant"]
    return pd.DataFrame(rows, columns=columns)


def table1_frame(results: Sequence[PairResult], alpha: float = 0.05) -> pd.DataFrame:
    """Headline proportion matrix: direction x model kind."""
    return _proportion_rows(results, ["direction", "kind"], alpha)


def lag_profile_frame(results: Sequence[PairResult], alpha: float = 0.05) -> pd.DataFrame:
    """Per-lag significant proportions by orientation and direction."""
    return _proportion_rows(results, ["direction", "kind", "orientation", "lag"], alpha)


def shock_profile_frame(results: Sequence[PairResult], alpha: float = 0.05) -> pd.DataFrame:
    """Per-shock significant proportions by orientation and direction."""
    return _proportion_rows(results, ["direction", "kind", "orientation", "shock"], alpha)


def deviation_frame(
    deviations: dict[tuple[str, str, str], tuple[DeviationSeries, list]],
) -> pd.DataFrame:
    """Long-form rolling deviations keyed by (direction, kind, orientation)."""
    rows = []
    for (direction, kind, orientation) in sorted(deviations):
        series, windows = deviations[(direction, kind, orientation)]
        for i, w in zip(series.window_index, windows):
            rows.append(
                {
                    "direction": direction,
                    "kind": kind,
                    "orientation": orientation,
                    "window": i,
                    "start_row": w.start,
                    "test_start_row": w.test_rows.start,
                    "delta": series.delta[i],
                    "deviation": series.deviation[i],
                }
            )
    columns = ["direction", "kind", "orientation", "window", "start_row",
               "test_start_row", "delta", "deviation"]
    return pd.DataFrame(rows, columns=columns)


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)


def write_confounders(reports: Sequence[ConfounderReport], path) -> None:
    """One record per line: pair=treatment->outcome plus hits as key=value fields."""
    with Path(path).open("w", encoding="utf-8") as handle:
        if not reports:
            handle.write("# no pairs were retained for confounder scanning\n")
        for report in reports:
            base = (f"pair={report.pair[0]}->{report.pair[1]} "
                    f"direction={report.direction} model={report.model_kind}")
            if not report.confounders:
                handle.write(f"{base} confounders=none\n")
            for hit in report.confounders:
                handle.write(
                    f"{base} confounder={hit.variable_id} category={hit.category} "
                    f"p_treatment={hit.p_treatment:.6g} p_outcome={hit.p_outcome:.6g}\n"
                )


def write_feedback(loops: Sequence[FeedbackLoop], path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        if not loops:
            handle.write("# no feedback loops detected\n")
        for loop in loops:
            lag_fields = " ".join(
                f"{direction}_lags={','.join(str(v) for v in lags)}"
                for direction, lags in sorted(loop.lags.items())
            )
            handle.write(f"outlet={loop.outlet_id} shock={loop.shock_id} {lag_fields}\n")
