"""Multi-label event temporal relation extraction toolkit.

Treats the *Vague* label as the situation where several well-defined
temporal relations are plausible at once: a classifier scores every
relation against a learnable per-pair threshold, speculates a confusion
set for Vague training pairs, and at inference time maps anything but a
single above-threshold relation to Vague, together with the relations
that caused the ambiguity.
"""

__version__ = "0.1.0"

from .classify import ScoredPrediction, baseline_score_and_infer, infer, score, topk
from .data import (
    AnnotatorTimeline,
    EventPairInstance,
    adjudicate,
    enhance_symmetry,
    generate_synthetic,
    read_instances,
    split,
    timelines_to_labels,
    write_instances,
)
from .encoder import (
    FeaturizerConfig,
    MarkedSequence,
    encode_pair,
    insert_markers,
    load_precomputed,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    FormatError,
    InputError,
    SchemaError,
    TempRelError,
)
from .estimator import TemporalRelationClassifier
from .losses import (
    ConfusionSet,
    build_confusion_set,
    loss_penalty_ablation,
    loss_vague,
    loss_well_defined,
    weight_at,
)
from .metrics import (
    MetricsReport,
    evaluate,
    micro_f1,
    per_relation_prf,
    random_baseline,
    relative_precision,
    topk_vague_precision,
)
from .schema import (
    VAGUE,
    PointRelation,
    RelationSchema,
    confusion_of,
    get_schema,
    interval_relation_from_points,
    inverse_of,
    load_schema,
    save_schema,
)
from .training import Model, TrainConfig, grad_check, total_loss, train

__all__ = [
    "AnnotatorTimeline",
    "ConfigError",
    "ConfusionSet",
    "DataError",
    "DivergenceError",
    "EventPairInstance",
    "FeaturizerConfig",
    "FormatError",
    "InputError",
    "MarkedSequence",
    "MetricsReport",
    "Model",
    "PointRelation",
    "RelationSchema",
    "SchemaError",
    "ScoredPrediction",
    "TempRelError",
    "TemporalRelationClassifier",
    "TrainConfig",
    "VAGUE",
    "adjudicate",
    "baseline_score_and_infer",
    "build_confusion_set",
    "confusion_of",
    "encode_pair",
    "enhance_symmetry",
    "evaluate",
    "generate_synthetic",
    "get_schema",
    "grad_check",
    "infer",
    "insert_markers",
    "interval_relation_from_points",
    "inverse_of",
    "load_precomputed",
    "load_schema",
    "loss_penalty_ablation",
    "loss_vague",
    "loss_well_defined",
    "micro_f1",
    "per_relation_prf",
    "random_baseline",
    "read_instances",
    "relative_precision",
    "save_schema",
    "score",
    "split",
    "timelines_to_labels",
    "topk",
    "topk_vague_precision",
    "total_loss",
    "train",
    "weight_at",
    "write_instances",
]
