"""Regime-aware evaluation harness for tabular surrogates over operating envelopes."""

from .bootstrap import BootstrapConfig, MetricCI, bootstrap_metrics, ci_overlap, compare
from .dataio import (
    load_dataset,
    lifetime_damage,
    write_dataset,
    write_leaderboard,
    write_predictions,
)
from .evaluate import (
    EvaluationRequest,
    LeaderboardRow,
    cross_tower_fold,
    cross_tower_folds,
    evaluate_models,
    rank_shift_report,
)
from .exceptions import EnvBenchError, EvaluationError, GeometryError, SchemaError, SplitError
from .fatigue import SectionGeometry, SNCurve, label_run, miner_damage, rainflow
from .geometry import AlphaShape
from .metrics import METRIC_NAMES, compute_metrics
from .partition import RegimeConfig, RegimeLabeler, SplitSpec, apply_split, attach_labels
from .synth import KNNSurrogate, SynthConfig, generate_dataset, knn_predict

__version__ = "0.1.0"
