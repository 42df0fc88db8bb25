"""Scikit-learn style estimator wrapping the full pipeline.

``TemporalRelationClassifier`` takes lists of ``EventPairInstance`` as X,
carves off an internal dev fraction for best-epoch selection, applies
symmetry enhancement to the remaining training part, trains the configured
mode, and predicts final labels.  It plays by the usual rules
(``get_params``/``set_params``, attributes learned in ``fit`` end in an
underscore), so it composes with model selection utilities that do not
insist on numeric X.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .classify import ScoredPrediction
from .data import EventPairInstance, enhance_symmetry, split
from .errors import InputError
from .metrics import micro_f1
from .schema import RelationSchema, get_schema
from .training import Model, TrainConfig, train


def _check_instances(X: Sequence[EventPairInstance]) -> list[EventPairInstance]:
    insts = list(X)
    for item in insts:
        if not isinstance(item, EventPairInstance):
            raise InputError(f"X must contain EventPairInstance objects, got {type(item).__name__}")
    return insts


class TemporalRelationClassifier(ClassifierMixin, BaseEstimator):
    """Multi-label temporal relation classifier with an adaptive threshold.

    Parameters mirror ``TrainConfig`` plus the schema choice and the
    internal dev split used to pick the best epoch.  ``mode`` selects the
    objective: ``metre`` (default), the ablations ``metre_no_cs`` and
    ``metre_pnt``, or the single-label ``baseline``.
    """

    def __init__(
        self,
        schema: str = "tbdense",
        mode: str = "metre",
        alpha: float = 1e-3,
        w_bar: float = 1.0,
        learning_rate: float = 0.05,
        momentum: float = 0.9,
        epochs: int = 20,
        batch_size: int = 32,
        seed: int = 0,
        d_e: int = 64,
        d_h: int = 64,
        hidden: int = 64,
        n_buckets: int = 4096,
        window_radius: int = 5,
        pooling: str = "window",
        dev_fraction: float = 0.1,
        enhance: bool = True,
    ):
        self.schema = schema
        self.mode = mode
        self.alpha = alpha
        self.w_bar = w_bar
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.d_e = d_e
        self.d_h = d_h
        self.hidden = hidden
        self.n_buckets = n_buckets
        self.window_radius = window_radius
        self.pooling = pooling
        self.dev_fraction = dev_fraction
        self.enhance = enhance

    def _config(self) -> TrainConfig:
        return TrainConfig(
            mode=self.mode,
            alpha=self.alpha,
            w_bar=self.w_bar,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            d_e=self.d_e,
            d_h=self.d_h,
            hidden=self.hidden,
            n_buckets=self.n_buckets,
            window_radius=self.window_radius,
            pooling=self.pooling,
        )

    def fit(self, X: Sequence[EventPairInstance], y: Sequence[str] | None = None):
        """Train on event-pair instances; y may override the gold labels."""
        insts = _check_instances(X)
        if y is not None:
            if len(y) != len(insts):
                raise InputError("y must align with X")
            insts = [self._with_gold(i, label) for i, label in zip(insts, y)]
        schema = get_schema(self.schema)
        if not 0.0 <= self.dev_fraction < 1.0:
            raise InputError(f"dev_fraction must be in [0, 1), got {self.dev_fraction}")
        if self.dev_fraction > 0:
            train_part, dev_part, _ = split(
                insts, (1.0 - self.dev_fraction, self.dev_fraction, 0.0), seed=self.seed
            )
        else:
            train_part, dev_part = insts, []
        if self.enhance:
            train_part = enhance_symmetry(train_part, schema)
        self.model_, self.log_ = train(train_part, dev_part, self._config(), schema)
        self.schema_ = schema
        self.classes_ = list(schema.all_labels)
        return self

    @staticmethod
    def _with_gold(inst: EventPairInstance, gold: str) -> EventPairInstance:
        return replace(inst, gold=gold)

    def predict(self, X: Sequence[EventPairInstance]) -> list[str]:
        """Final label (a relation or Vague) per instance."""
        check_is_fitted(self, "model_")
        return self.model_.predict_labels(_check_instances(X))

    def predict_detailed(self, X: Sequence[EventPairInstance]) -> list[ScoredPrediction]:
        """Scores, threshold, decision, and ranked composition per instance."""
        check_is_fitted(self, "model_")
        return self.model_.predict(_check_instances(X))

    def score(self, X: Sequence[EventPairInstance], y: Sequence[str] | None = None) -> float:
        """Micro-F1 (all classes) against y, or the instances' gold labels."""
        check_is_fitted(self, "model_")
        insts = _check_instances(X)
        gold = list(y) if y is not None else [i.gold for i in insts]
        if any(g is None for g in gold):
            raise InputError("score needs gold labels (in y or on the instances)")
        return micro_f1(gold, self.predict(insts))
