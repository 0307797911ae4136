"""End-to-end orchestration: ingest -> features -> shocks -> grid -> inference -> reports.

Each stage is a pure function of the previous stage's outputs, so the CLI
subcommands can run any prefix of the chain. Stage failures propagate with
the stage name prepended; artifacts are written once at the end.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import causality, features, ingest, plots, reports, svar
from .causality import (
    ConfounderReport,
    DeviationSeries,
    FeedbackLoop,
    GroupResult,
    PairResult,
    Window,
)
from .config import PipelineConfig
from .errors import InputError, SemshockError
from .features import AlignedPanel, FeatureSeries

log = logging.getLogger(__name__)

GROUPING_KEYS = [
    ["direction", "kind"],
    ["direction", "orientation"],
    ["direction", "orientation", "lag"],
    ["direction", "orientation", "shock"],
]


@dataclass
class ReportBundle:
    results: list[PairResult]
    groups: list[GroupResult]
    selected: list[PairResult]
    confounders: list[ConfounderReport]
    feedback: list[FeedbackLoop]
    deviations: dict[tuple[str, str, str], tuple[DeviationSeries, list[Window]]]
    panel: AlignedPanel
    files: list[Path] = field(default_factory=list)


class _Stage:
    """Context manager that prefixes failures with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, SemshockError):
            raise exc_type(f"[{self.name}] {exc}") from exc
        return False


def stage_articles(config: PipelineConfig) -> list[ingest.ArticleRecord]:
    if config.articles_path is None:
        raise InputError("articles_path is required")
    articles, _ = ingest.parse_articles(config.articles_path)
    if config.terms is not None:
        articles = ingest.select_relevant(articles, ingest.TermSet(frozenset(config.terms)))
    if config.embed_url:
        client = ingest.EmbeddingClient(config.embed_url, batch_size=config.embed_batch)
        filled = ingest.attach_embeddings(articles, client)
        if filled:
            log.info("embedded %d text-only articles via provider", filled)
    articles = [a for a in articles if a.content_vector() is not None]
    if not articles:
        raise InputError("no articles with embeddings after selection")
    return articles


def stage_embedding_series(
    config: PipelineConfig, articles: list[ingest.ArticleRecord]
) -> dict[str, ingest.DailyEmbeddingSeries]:
    calendar = ingest.make_calendar(min(a.date for a in articles), max(a.date for a in articles))
    series = ingest.daily_outlet_embedding(articles, calendar)
    kept = {}
    for outlet_id, s in series.items():
        if ingest.coverage_check(s, config.coverage_threshold):
            kept[outlet_id] = s
        else:
            log.info("outlet %s below coverage threshold (%.0f%% needed); dropped",
                     outlet_id, 100 * config.coverage_threshold)
    if not kept:
        raise InputError("no outlet meets the coverage threshold")
    return kept


def stage_shocks(config: PipelineConfig) -> tuple[ingest.ShockPanel, svar.StructuralFactors | None]:
    if config.shocks_path is not None:
        if config.market_path is not None:
            log.warning("both shocks_path and market_path given; precomputed shocks win")
        return ingest.load_shocks(config.shocks_path), None
    if config.market_path is None:
        raise InputError("either shocks_path or market_path is required")
    market = svar.load_market_csv(config.market_path)
    restrictions = None
    if config.restrictions_path is not None:
        restrictions = svar.load_restrictions_csv(config.restrictions_path)
    model = svar.fit_var(market, lag_order=config.var_lags)
    factors = svar.identify_shocks(
        model,
        restrictions,
        budget=config.rotation_budget,
        seed=config.seed,
        horizon=config.irf_horizon,
        mode=config.rotation_mode,
    )
    return svar.shocks_to_panel(model, factors), factors


def stage_panel(
    config: PipelineConfig,
    embeddings: dict[str, ingest.DailyEmbeddingSeries],
    articles: list[ingest.ArticleRecord],
    shocks: ingest.ShockPanel,
) -> AlignedPanel:
    news = []
    for outlet_id in sorted(embeddings):
        series = embeddings[outlet_id]
        if config.weekend_mode == "trading":
            usable = [d for d in shocks.dates if series.dates[0] <= d <= series.dates[-1]]
            if len(usable) < 2:
                raise InputError(f"outlet {outlet_id} overlaps fewer than 2 trading days")
            series = features.restrict_embedding_series(series, usable)
        news.append(features.news_feature(series))

    emotion_series = []
    labels = config.emotion_labels
    if labels is None:
        labels = sorted({lbl for a in articles if a.emotion_probs for lbl in a.emotion_probs})
    calendar = ingest.make_calendar(min(a.date for a in articles), max(a.date for a in articles))
    for label in labels:
        emotion_series.append(features.emotion_daily(articles, label, calendar))

    aux = []
    if config.aux_path is not None:
        aux = features.load_auxiliary(config.aux_path)

    return features.align_panel(news + emotion_series + aux + features.shock_series(shocks))


def stage_grid(config: PipelineConfig, panel: AlignedPanel) -> list[PairResult]:
    return causality.run_grid(
        panel,
        lags=config.lags,
        kinds=config.model_kinds,
        ridge_lambda=config.ridge_lambda,
        rbf_gamma=config.rbf_gamma,
        standardize=config.standardize,
        intercept=config.intercept,
        dt_convention=config.dt_convention,
    )


def stage_inference(config: PipelineConfig, panel: AlignedPanel, results: list[PairResult]):
    groups = causality.group_tests(results, GROUPING_KEYS, alpha=config.alpha)
    selected = causality.bonferroni_select(results, alpha=config.alpha, scope=config.bonferroni_scope)
    candidates = [panel.series(cid) for cid in panel.columns]
    confounders = causality.confounder_scan(
        selected,
        candidates,
        panel,
        lags=config.lags,
        alpha=config.alpha,
        ridge_lambda=config.ridge_lambda,
        rbf_gamma=config.rbf_gamma,
        standardize=config.standardize,
        intercept=config.intercept,
        dt_convention=config.dt_convention,
    )
    feedback = causality.detect_feedback(results, alpha=config.alpha, scope=config.bonferroni_scope)
    return groups, selected, confounders, feedback


def stage_rolling(
    config: PipelineConfig, panel: AlignedPanel
) -> dict[tuple[str, str, str], tuple[DeviationSeries, list[Window]]]:
    """Per-window grid evaluation aggregated to orientation-level deviations."""
    n = panel.n_rows
    if n < config.window_span:
        log.warning("panel too short for rolling windows (%d < %d); skipping deviations",
                    n, config.window_span)
        return {}
    windows = causality.make_splits(n, "rolling", span=config.window_span,
                                    test=config.window_test, step=config.window_step)
    if len(windows) < 2:
        log.warning("only %d rolling window(s); deviations need at least 2, skipping",
                    len(windows))
        return {}

    # (direction, kind, orientation) -> per-window [sum_base, sum_enh, count]
    sums: dict[tuple[str, str, str], np.ndarray] = {}
    for w in windows:
        window_results = causality.run_grid(
            panel,
            lags=config.lags,
            kinds=config.model_kinds,
            split=w,
            ridge_lambda=config.ridge_lambda,
            rbf_gamma=config.rbf_gamma,
            standardize=config.standardize,
            intercept=config.intercept,
            dt_convention=config.dt_convention,
        )
        for r in window_results:
            for orientation in (r.orientation or "", "all"):
                key = (r.direction, r.model_kind, orientation)
                acc = sums.setdefault(key, np.zeros((len(windows), 3)))
                acc[w.index] += (r.mse_base, r.mse_enhanced, 1.0)

    deviations = {}
    for key, acc in sums.items():
        if np.any(acc[:, 2] == 0):
            continue
        mses = [(acc[i, 0] / acc[i, 2], acc[i, 1] / acc[i, 2]) for i in range(len(windows))]
        deviations[key] = (
            causality.temporal_deviation(mses, relative=config.deviation_relative),
            windows,
        )
    return deviations


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """Execute every stage and write all artifacts to the output directory."""
    config.validate_paths()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with _Stage("ingest"):
        articles = stage_articles(config)
        embeddings = stage_embedding_series(config, articles)
    with _Stage("shocks"):
        shocks, factors = stage_shocks(config)
    with _Stage("features"):
        panel = stage_panel(config, embeddings, articles, shocks)
    with _Stage("grid"):
        results = stage_grid(config, panel)
    with _Stage("inference"):
        groups, selected, confounders, feedback = stage_inference(config, panel, results)
    deviations = {}
    if config.split_mode in ("rolling", "both"):
        with _Stage("rolling"):
            deviations = stage_rolling(config, panel)

    bundle = ReportBundle(
        results=results,
        groups=groups,
        selected=selected,
        confounders=confounders,
        feedback=feedback,
        deviations=deviations,
        panel=panel,
    )
    with _Stage("report"):
        bundle.files = write_reports(config, bundle, factors_ran=factors is not None,
                                     shocks=shocks)
    return bundle


def write_reports(
    config: PipelineConfig,
    bundle: ReportBundle,
    factors_ran: bool = False,
    shocks: ingest.ShockPanel | None = None,
) -> list[Path]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def emit(frame, name):
        path = out_dir / name
        reports.write_csv(frame, path)
        files.append(path)

    emit(bundle.panel.to_frame(), "panel.csv")
    emit(reports.results_frame(bundle.results), "results.csv")
    emit(reports.groups_frame(bundle.groups), "groups.csv")
    emit(reports.table1_frame(bundle.results, config.alpha), "table1_proportions.csv")
    lag_frame = reports.lag_profile_frame(bundle.results, config.alpha)
    emit(lag_frame, "lag_profile.csv")
    shock_frame = reports.shock_profile_frame(bundle.results, config.alpha)
    emit(shock_frame, "shock_profile.csv")
    deviation_frame = reports.deviation_frame(bundle.deviations)
    emit(deviation_frame, "deviation.csv")

    confounder_path = out_dir / "confounders.txt"
    reports.write_confounders(bundle.confounders, confounder_path)
    files.append(confounder_path)
    feedback_path = out_dir / "feedback.txt"
    reports.write_feedback(bundle.feedback, feedback_path)
    files.append(feedback_path)

    if factors_ran and shocks is not None:
        shock_path = out_dir / "shocks_identified.csv"
        ingest.write_shocks_csv(shocks, shock_path)
        files.append(shock_path)

    files.extend(plots.plot_lag_profiles(lag_frame, out_dir))
    files.extend(plots.plot_shock_profiles(shock_frame, out_dir))
    files.extend(plots.plot_deviations(deviation_frame, out_dir))
    return files
