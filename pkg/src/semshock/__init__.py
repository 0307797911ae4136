"""semshock: bidirectional Granger-causality between news-embedding shifts and market shocks."""

__version__ = "0.1.0"

from .causality import (
    PairResult,
    Split,
    Window,
    binomial_group_test,
    bonferroni_select,
    confounder_scan,
    detect_feedback,
    evaluate_pair,
    make_splits,
    paired_t,
    run_grid,
    temporal_deviation,
)
from .errors import InputError, NumericError, SemshockError
from .features import AlignedPanel, FeatureSeries, align_panel, emotion_daily, news_feature
from .ingest import (
    ArticleRecord,
    DailyEmbeddingSeries,
    ShockPanel,
    TermSet,
    coverage_check,
    daily_outlet_embedding,
    load_shocks,
    parse_articles,
    select_relevant,
)
from .models import Design, FitResult, build_design, fit_predict
from .svar import MarketPanel, SignRestrictions, StructuralFactors, VarModel, fit_var, identify_shocks
from .synth import SyntheticSpec, gen_synthetic

__all__ = [name for name in dir() if not name.startswith("_")]
