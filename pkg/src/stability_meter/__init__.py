"""Streaming evaluation of online process-outcome classifiers.

Replays labeled event logs as streams, continuously evaluates per-prefix
models over moving windows of completed cases, and quantifies performance
stability through drop frequency, volatility, drop magnitude, and recovery
rate, plus a scenario-based ranking of competing configurations.
"""

from .advisor import SCENARIO_PROFILES, ConfigSummary, ScenarioProfile, pool_summaries, rank
from .classifiers import (
    DecisionTree,
    IncrementalNaiveBayes,
    LearnerParams,
    PredictionFramework,
    StaticModel,
    UpdatePolicy,
    WindowRetrainModel,
)
from .errors import (
    ConfigError,
    EmptyLogError,
    LogFormatError,
    LogValueError,
    NotReadyError,
    StabilityMeterError,
)
from .evaluation import (
    METRICS,
    EvalWindow,
    PerformanceSeries,
    PredictionRecord,
    ResolvedPair,
    RunResult,
    metrics_from_confusion,
    run_stream,
    window_metric,
)
from .event_model import Event, StreamItem, Trace, parse_log, replay
from .prefixing import (
    MISSING_CODE,
    AttributeSchema,
    BucketConfig,
    CategoryCodec,
    EncodedSample,
    Prefix,
    default_k_max,
    encode,
    prefixes_of,
)
from .stability import (
    MetaMeasures,
    MovingStats,
    SeriesAnnotation,
    SignificantDrop,
    annotate_series,
    detect_drops,
    drop_mask,
    meta_measures,
    moving_stats,
)
from .synthgen import DriftLogSpec, branch_of, case_regime, generate, oracle_label, to_csv

__version__ = "0.1.0"
