"""Input parsing and per-outlet daily embedding construction.

Articles arrive as line-delimited JSON records carrying either a precomputed
embedding, a list of chunk embeddings, or raw text (in which case an external
embedding provider can be consulted). Per outlet, articles are averaged into
one embedding per calendar day and article-free days are forward filled.
"""

from __future__ import annotations

import datetime
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from .errors import InputError

log = logging.getLogger(__name__)

ORIENTATIONS = ("left", "center", "right")
SHOCK_NAMES = ("growth", "monetary", "common_premium", "hedging_premium")


@dataclass
class ArticleRecord:
    """One news article with at least one content field present."""

    outlet_id: str
    date: datetime.date
    orientation: str
    embedding: np.ndarray | None = None
    chunk_embeddings: list[np.ndarray] | None = None
    emotion_probs: dict[str, float] | None = None
    text: str | None = None

    def content_vector(self) -> np.ndarray | None:
        """The article embedding: given directly, or the mean of its chunks."""
        if self.embedding is not None:
            return self.embedding
        if self.chunk_embeddings:
            return np.mean(np.stack(self.chunk_embeddings), axis=0)
        return None


@dataclass(frozen=True)
class TermSet:
    """Lowercase search terms matched as whole words, case-insensitively."""

    terms: frozenset[str]

    def __post_init__(self):
        if not self.terms:
            raise InputError("term set must not be empty")
        object.__setattr__(self, "terms", frozenset(t.lower() for t in self.terms))

    def pattern(self) -> re.Pattern:
        alternatives = "|".join(re.escape(t) for t in sorted(self.terms))
        return re.compile(rf"\b(?:{alternatives})\b")


@dataclass
class DailyEmbeddingSeries:
    """Calendar-indexed mean embeddings for one outlet, forward filled."""

    outlet_id: str
    orientation: str
    dates: list[datetime.date]
    vectors: np.ndarray            # (days, d)
    article_counts: np.ndarray     # (days,) ints
    filled_mask: np.ndarray        # (days,) bool; True where no articles that day

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def active_days(self) -> int:
        return int(np.count_nonzero(self.article_counts > 0))


@dataclass
class ShockPanel:
    """The four daily structural shock series on a common trading calendar."""

    dates: list[datetime.date]
    series: dict[str, np.ndarray]

    def __post_init__(self):
        for name in SHOCK_NAMES:
            if name not in self.series:
                raise InputError(f"shock panel missing series {name!r}")
            if len(self.series[name]) != len(self.dates):
                raise InputError(f"shock series {name!r} length mismatch")
            if not np.all(np.isfinite(self.series[name])):
                raise InputError(f"shock series {name!r} contains non-finite values")

    def __len__(self) -> int:
        return len(self.dates)


def _parse_vector(raw, context: str) -> np.ndarray:
    vec = np.asarray(raw, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{context}: expected a flat non-empty vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{context}: non-finite values")
    return vec


def _record_from_json(obj: dict) -> ArticleRecord:
    outlet = obj.get("outlet")
    if not outlet:
        raise ValueError("missing outlet")
    date = datetime.date.fromisoformat(str(obj["date"]))
    orientation = obj.get("orientation")
    if orientation not in ORIENTATIONS:
        raise ValueError(f"bad orientation {orientation!r}")

    embedding = None
    chunks = None
    if obj.get("embedding") is not None:
        embedding = _parse_vector(obj["embedding"], "embedding")
    if obj.get("chunk_embeddings") is not None:
        chunks = [_parse_vector(c, "chunk") for c in obj["chunk_embeddings"]]
        if not chunks:
            chunks = None
        elif len({c.size for c in chunks}) > 1:
            raise ValueError("chunk embeddings disagree on dimension")
    text = obj.get("text")
    if embedding is None and chunks is None and not text:
        raise ValueError("record has no content field")

    emotion = None
    if obj.get("emotion") is not None:
        emotion = {str(k): float(v) for k, v in obj["emotion"].items()}
        for label, p in emotion.items():
            if not (0.0 <= p <= 1.0) or not np.isfinite(p):
                raise ValueError(f"emotion probability for {label!r} outside [0, 1]")

    return ArticleRecord(
        outlet_id=str(outlet),
        date=date,
        orientation=orientation,
        embedding=embedding,
        chunk_embeddings=chunks,
        emotion_probs=emotion,
        text=text,
    )


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise InputError(f"articles file not found: {path}")
        with path.open("r", encoding="utf-8") as handle:
            yield from handle
    else:
        yield from source


def parse_articles(source) -> tuple[list[ArticleRecord], int]:
    """Parse line-delimited JSON article records in input order.

    Returns the materialized records and the number of malformed lines
    skipped. Inconsistent embedding dimensions across the stream are fatal.
    """
    records: list[ArticleRecord] = []
    skipped = 0
    dim: int | None = None
    for lineno, line in enumerate(_iter_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = _record_from_json(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            skipped += 1
            log.warning("skipping malformed article record on line %d: %s", lineno, exc)
            continue
        vec = record.content_vector()
        if vec is not None:
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise InputError(
                    f"embedding dimension mismatch on line {lineno}: got {vec.size}, expected {dim}"
                )
        records.append(record)
    if skipped:
        log.info("parsed %d article records, skipped %d malformed", len(records), skipped)
    return records, skipped


def select_relevant(articles: list[ArticleRecord], terms: TermSet) -> list[ArticleRecord]:
    """Keep articles whose text mentions at least one term as a whole word.

    Records that carry vectors but no text are treated as pre-filtered
    upstream and pass through. Order is preserved; the operation is
    idempotent.
    """
    if not isinstance(terms, TermSet) or not terms.terms:
        raise InputError("select_relevant requires a non-empty TermSet")
    pattern = terms.pattern()
    kept = []
    for article in articles:
        if article.text is None:
            kept.append(article)
        elif pattern.search(article.text.lower()):
            kept.append(article)
    return kept


def make_calendar(start: datetime.date, end: datetime.date) -> list[datetime.date]:
    """All calendar days from start to end inclusive."""
    if end < start:
        raise InputError("calendar end precedes start")
    return [start + datetime.timedelta(days=i) for i in range((end - start).days + 1)]


def daily_outlet_embedding(
    articles: list[ArticleRecord],
    calendar: list[datetime.date],
) -> dict[str, DailyEmbeddingSeries]:
    """Aggregate articles into one embedding per outlet per calendar day.

    Days with articles take the arithmetic mean of that day's article
    embeddings (chunked articles contribute their chunk mean as a single
    vector). Article-free days copy the previous day's embedding with the
    fill flag set; leading days before an outlet's first article copy the
    first available embedding and are likewise flagged.
    """
    if not calendar:
        raise InputError("empty calendar")
    day_index = {d: i for i, d in enumerate(calendar)}
    by_outlet: dict[str, list[ArticleRecord]] = {}
    for article in articles:
        if article.date not in day_index:
            raise InputError(f"article date {article.date} outside calendar")
        by_outlet.setdefault(article.outlet_id, []).append(article)

    out: dict[str, DailyEmbeddingSeries] = {}
    for outlet_id in sorted(by_outlet):
        group = by_outlet[outlet_id]
        vectors_by_day: dict[int, list[np.ndarray]] = {}
        for article in group:
            vec = article.content_vector()
            if vec is None:
                continue
            vectors_by_day.setdefault(day_index[article.date], []).append(vec)
        if not vectors_by_day:
            log.warning("outlet %s has no embedded articles over the calendar; dropped", outlet_id)
            continue

        d = next(iter(vectors_by_day.values()))[0].size
        n = len(calendar)
        vectors = np.zeros((n, d))
        counts = np.zeros(n, dtype=int)
        filled = np.ones(n, dtype=bool)
        for i, vecs in vectors_by_day.items():
            vectors[i] = np.mean(np.stack(vecs), axis=0)
            counts[i] = len(vecs)
            filled[i] = False

        first_active = int(np.flatnonzero(counts > 0)[0])
        vectors[:first_active] = vectors[first_active]
        for i in range(first_active + 1, n):
            if counts[i] == 0:
                vectors[i] = vectors[i - 1]

        out[outlet_id] = DailyEmbeddingSeries(
            outlet_id=outlet_id,
            orientation=group[0].orientation,
            dates=list(calendar),
            vectors=vectors,
            article_counts=counts,
            filled_mask=filled,
        )
    if not out:
        raise InputError("no outlet produced any embedded articles")
    return out


def coverage_check(series: DailyEmbeddingSeries, threshold: float = 0.25) -> bool:
    """True when the outlet published on at least ``threshold`` of the days (inclusive)."""
    if len(series) == 0:
        raise InputError("empty embedding series")
    if not (0.0 < threshold <= 1.0):
        raise InputError(f"coverage threshold must lie in (0, 1], got {threshold}")
    return series.active_days / len(series) >= threshold


def load_shocks(source) -> ShockPanel:
    """Load the shock CSV (header: date,growth,monetary,common_premium,hedging_premium)."""
    frame = source if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    missing = [c for c in ("date",) + SHOCK_NAMES if c not in frame.columns]
    if missing:
        raise InputError(f"shock table missing columns: {', '.join(missing)}")
    try:
        dates = [datetime.date.fromisoformat(str(v)) for v in frame["date"]]
    except ValueError as exc:
        raise InputError(f"unparseable date in shock table: {exc}") from exc
    for i in range(1, len(dates)):
        if dates[i] <= dates[i - 1]:
            raise InputError(f"shock dates not strictly increasing at row {i} ({dates[i]})")
    series = {}
    for name in SHOCK_NAMES:
        values = frame[name].to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise InputError(f"non-finite value in shock column {name!r} at row {int(bad[0])}")
        series[name] = values
    return ShockPanel(dates=dates, series=series)


def write_shocks_csv(panel: ShockPanel, path) -> None:
    """Write a ShockPanel in the same CSV format load_shocks reads."""
    frame = pd.DataFrame({"date": [d.isoformat() for d in panel.dates]})
    for name in SHOCK_NAMES:
        frame[name] = panel.series[name]
    frame.to_csv(path, index=False, float_format="%.12g")


class EmbeddingClient:
    """Client for the optional HTTP embedding provider.

    POSTs ``{"texts": [...]}`` to the configured endpoint in batches and
    expects ``{"vectors": [[...], ...]}`` back. Failures are retried with
    exponential backoff, then raised as fatal.
    """

    def __init__(self, url: str, batch_size: int = 32, max_retries: int = 3,
                 backoff: float = 0.5, session=None):
        if batch_size < 1:
            raise InputError("embedding batch size must be >= 1")
        self.url = url.rstrip("/")
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.backoff = backoff
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def _post_batch(self, texts: list[str]) -> list[list[float]]:
        delay = self.backoff
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self._session.post(f"{self.url}/embed", json={"texts": texts})
                if getattr(response, "status_code", 200) >= 500:
                    raise RuntimeError(f"provider returned status {response.status_code}")
                payload = response.json()
                return payload["vectors"]
            except Exception as exc:  # noqa: BLE001 - any transport failure is retryable
                last_error = exc
                if attempt < self.max_retries:
                    log.warning("embedding request failed (%s); retrying in %.2fs", exc, delay)
                    time.sleep(delay)
                    delay *= 2
        raise InputError(f"embedding provider failed after {self.max_retries + 1} attempts: {last_error}")

    def embed(self, texts: list[str]) -> np.ndarray:
        vectors: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            result = self._post_batch(batch)
            if len(result) != len(batch):
                raise InputError("embedding provider returned wrong number of vectors")
            vectors.extend(result)
        return np.asarray(vectors, dtype=float)


def attach_embeddings(articles: list[ArticleRecord], client: EmbeddingClient) -> int:
    """Embed text-only articles in place via the provider; returns how many were filled."""
    pending = [a for a in articles if a.content_vector() is None and a.text]
    if not pending:
        return 0
    vectors = client.embed([a.text for a in pending])
    if vectors.shape[0] != len(pending):
        raise InputError("embedding provider returned wrong number of vectors")
    for article, vec in zip(pending, vectors):
        article.embedding = np.asarray(vec, dtype=float)
    return len(pending)
