"""Daily feature series: semantic-shift distances, emotion means, aligned panels.

The news feature for an outlet is the cosine distance between consecutive
daily embeddings, exactly zero on forward-filled (article-free) days. All
feature series join onto a common trading calendar by date intersection;
market values are never interpolated.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InputError, NumericError
from .ingest import ArticleRecord, DailyEmbeddingSeries, ShockPanel

log = logging.getLogger(__name__)

FEATURE_KINDS = ("news_distance", "emotion", "shock", "auxiliary")
_KIND_ORDER = {kind: i for i, kind in enumerate(FEATURE_KINDS)}


@dataclass
class FeatureSeries:
    """One named daily scalar series (news distance, emotion, shock, auxiliary)."""

    id: str
    kind: str
    dates: list[datetime.date]
    values: np.ndarray
    orientation: str | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise InputError(f"unknown feature kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)
        if len(self.dates) != self.values.shape[0]:
            raise InputError(f"series {self.id!r}: dates and values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise InputError(f"series {self.id!r} contains non-finite values")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class AlignedPanel:
    """Date-joined feature columns on a common calendar."""

    dates: list[datetime.date]
    columns: dict[str, np.ndarray]
    metadata: dict[str, dict]

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    def ids_of_kind(self, kind: str) -> list[str]:
        return [cid for cid in self.columns if self.metadata[cid]["kind"] == kind]

    def column(self, cid: str) -> np.ndarray:
        return self.columns[cid]

    def orientation(self, cid: str) -> str | None:
        return self.metadata[cid].get("orientation")

    def series(self, cid: str) -> FeatureSeries:
        meta = self.metadata[cid]
        return FeatureSeries(
            id=cid,
            kind=meta["kind"],
            dates=self.dates,
            values=self.columns[cid],
            orientation=meta.get("orientation"),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"date": [d.isoformat() for d in self.dates]})
        for cid in self.columns:
            frame[cid] = self.columns[cid]
        return frame


def news_feature(series: DailyEmbeddingSeries) -> FeatureSeries:
    """Day-to-day semantic shift: 1 - cos(E_t, E_{t-1}) per day.

    The first day and every forward-filled day are exactly 0. Values lie in
    [0, 2] by construction of the cosine.
    """
    n = len(series)
    if n < 2:
        raise InputError(f"outlet {series.outlet_id}: need at least 2 days for a shift series")
    vectors = series.vectors
    norms = np.linalg.norm(vectors, axis=1)
    active = ~series.filled_mask
    zero_norm = np.flatnonzero(active & (norms == 0.0))
    if zero_norm.size:
        raise NumericError(
            f"outlet {series.outlet_id}: zero-norm embedding on day {series.dates[int(zero_norm[0])]}"
        )

    values = np.zeros(n)
    for t in range(1, n):
        if series.filled_mask[t] or np.array_equal(vectors[t], vectors[t - 1]):
            continue
        cos = np.dot(vectors[t], vectors[t - 1]) / (norms[t] * norms[t - 1])
        values[t] = 1.0 - min(1.0, max(-1.0, cos))
    return FeatureSeries(
        id=series.outlet_id,
        kind="news_distance",
        dates=list(series.dates),
        values=values,
        orientation=series.orientation,
    )


def restrict_embedding_series(
    series: DailyEmbeddingSeries, dates: list[datetime.date]
) -> DailyEmbeddingSeries:
    """Sample an embedding series on a sub-calendar (e.g. trading days only).

    The fill mask is recomputed so a sampled day counts as filled only when
    no article appeared since the previous sampled day; weekend publications
    therefore surface in the following trading day's shift.
    """
    index = {d: i for i, d in enumerate(series.dates)}
    missing = [d for d in dates if d not in index]
    if missing:
        raise InputError(f"sub-calendar date {missing[0]} not in series calendar")
    rows = [index[d] for d in dates]
    cumulative = np.concatenate([[0], np.cumsum(series.article_counts)])
    counts = np.empty(len(rows), dtype=int)
    prev = 0
    for j, row in enumerate(rows):
        counts[j] = cumulative[row + 1] - cumulative[prev]
        prev = row + 1
    return DailyEmbeddingSeries(
        outlet_id=series.outlet_id,
        orientation=series.orientation,
        dates=list(dates),
        vectors=series.vectors[rows],
        article_counts=counts,
        filled_mask=counts == 0,
    )


def emotion_daily(
    articles: list[ArticleRecord],
    label: str,
    calendar: list[datetime.date],
) -> FeatureSeries:
    """Average predicted probability of one emotion label per day, over all outlets.

    Article-free days forward fill the previous value (0 before the first
    day that carries the label).
    """
    day_index = {d: i for i, d in enumerate(calendar)}
    sums = np.zeros(len(calendar))
    counts = np.zeros(len(calendar), dtype=int)
    seen = False
    for article in articles:
        if not article.emotion_probs or label not in article.emotion_probs:
            continue
        seen = True
        if article.date not in day_index:
            raise InputError(f"article date {article.date} outside calendar")
        i = day_index[article.date]
        sums[i] += article.emotion_probs[label]
        counts[i] += 1
    if not seen:
        raise InputError(f"emotion label {label!r} absent from all articles")

    values = np.zeros(len(calendar))
    previous = 0.0
    for i in range(len(calendar)):
        if counts[i] > 0:
            previous = sums[i] / counts[i]
        values[i] = previous
    return FeatureSeries(id=f"emotion:{label}", kind="emotion", dates=list(calendar), values=values)


def align_panel(series: list[FeatureSeries], join: str = "intersection") -> AlignedPanel:
    """Join feature series on the dates present in every one of them.

    Market series implicitly define the trading calendar; text series are
    sampled on those days. Columns are ordered by kind, then id.
    """
    if join != "intersection":
        raise InputError(f"unsupported join mode {join!r}")
    if len(series) < 2:
        raise InputError("panel alignment needs at least 2 series")
    ids = [s.id for s in series]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate series ids in panel")

    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if not common:
        raise InputError("series calendars have empty intersection")
    dates = sorted(common)

    ordered = sorted(series, key=lambda s: (_KIND_ORDER[s.kind], s.id))
    columns: dict[str, np.ndarray] = {}
    metadata: dict[str, dict] = {}
    for s in ordered:
        index = {d: i for i, d in enumerate(s.dates)}
        rows = [index[d] for d in dates]
        columns[s.id] = s.values[rows]
        metadata[s.id] = {"kind": s.kind, "orientation": s.orientation}
    return AlignedPanel(dates=dates, columns=columns, metadata=metadata)


def shock_series(panel: ShockPanel) -> list[FeatureSeries]:
    """Wrap a ShockPanel's four columns as feature series of kind ``shock``."""
    return [
        FeatureSeries(id=name, kind="shock", dates=list(panel.dates), values=panel.series[name])
        for name in panel.series
    ]


def load_auxiliary(source) -> list[FeatureSeries]:
    """Load auxiliary daily indicators from a CSV with a leading date column."""
    frame = source if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    if "date" not in frame.columns:
        raise InputError("auxiliary table must have a 'date' column")
    dates = [datetime.date.fromisoformat(str(v)) for v in frame["date"]]
    out = []
    for col in frame.columns:
        if col == "date":
            continue
        values = frame[col].to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise InputError(f"auxiliary column {col!r} contains non-finite values")
        out.append(FeatureSeries(id=col, kind="auxiliary", dates=dates, values=values))
    if not out:
        raise InputError("auxiliary table has no value columns")
    return out
