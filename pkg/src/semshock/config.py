"""Flat, typed pipeline configuration.

The config file is a flat YAML mapping; unknown keys are fatal so typos in
scientific runs fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import InputError

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    # inputs
    articles_path: str | None = None
    shocks_path: str | None = None
    market_path: str | None = None
    restrictions_path: str | None = None
    aux_path: str | None = None
    # article selection and aggregation
    terms: list[str] | None = None
    coverage_threshold: float = 0.25
    weekend_mode: str = "calendar"           # or "trading"
    emotion_labels: list[str] | None = None  # None: use every label present
    # embedding provider (only needed for text-only articles)
    embed_url: str | None = None
    embed_batch: int = 32
    # grid
    lags: list[int] = field(default_factory=lambda: list(range(1, 11)))
    model_kinds: list[str] = field(default_factory=lambda: ["linear", "krr"])
    ridge_lambda: float = 1.0
    rbf_gamma: float | None = None           # None: 1/p
    standardize: bool | None = None          # None: on for krr, off for linear
    intercept: bool | None = None            # None: on for linear
    dt_convention: str = "squared"
    # inference
    alpha: float = 0.05
    bonferroni_scope: str = "orientation_direction_kind"
    # splits
    split_mode: str = "both"                 # static | rolling | both
    window_span: int = 365
    window_test: int = 90
    window_step: int = 180
    deviation_relative: bool = False
    # svar
    var_lags: int = 5
    rotation_budget: int = 10_000
    irf_horizon: int = 0
    rotation_mode: str = "first"
    # run control
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.lags:
            raise InputError("lag set must not be empty")
        if any(lag < 1 for lag in self.lags):
            raise InputError("lags must be >= 1")
        if not self.model_kinds:
            raise InputError("model_kinds must not be empty")
        if self.weekend_mode not in ("calendar", "trading"):
            raise InputError(f"unknown weekend_mode {self.weekend_mode!r}")
        if self.split_mode not in ("static", "rolling", "both"):
            raise InputError(f"unknown split_mode {self.split_mode!r}")
        if self.terms is not None and not self.terms:
            raise InputError("terms list is empty; omit it to disable filtering")

    def validate_paths(self) -> None:
        for name in ("articles_path", "shocks_path", "market_path",
                     "restrictions_path", "aux_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise InputError(f"{name} does not exist: {value}")


_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Load a flat YAML config; unknown keys are fatal."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}
    if not isinstance(raw, dict):
        raise InputError("config must be a flat key-value mapping")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = PipelineConfig(**raw)
    except TypeError as exc:
        raise InputError(f"bad config value: {exc}") from exc
    return config


def dump_config(config: PipelineConfig, path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        yaml.safe_dump(dataclasses.asdict(config), handle, sort_keys=True)
