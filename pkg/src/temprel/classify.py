"""Score heads and the multi-label decision rule.

Two small MLPs map the pair representation h to a vector of per-relation
scores and to a scalar threshold.  A relation is *chosen* when its score
strictly exceeds the threshold; exactly one chosen relation becomes the
prediction, anything else (none, or two and more) is ``Vague``.  Scores
are unnormalized: the training losses exponentiate them directly, so no
softmax is applied in this head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .nn import MLP, softmax
from .schema import VAGUE, RelationSchema


@dataclass
class ScoredPrediction:
    """Scores, threshold, final decision, and ranked composition."""

    scores: np.ndarray
    threshold: float
    decision: str
    composition: list[str]

    def to_record(self, inst_id: str) -> dict:
        return {
            "id": inst_id,
            "decision": self.decision,
            "composition": self.composition,
            "scores": [float(s) for s in self.scores],
            "threshold": float(self.threshold),
        }


def score(h: np.ndarray, mlp2: MLP, mlp3: MLP) -> tuple[np.ndarray, float]:
    """Per-relation scores and the pair's threshold for one representation."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise InputError("score expects a single representation vector")
    if mlp2.d_in != h.shape[0] or mlp3.d_in != h.shape[0]:
        raise ConfigError(
            f"representation width {h.shape[0]} does not match heads "
            f"({mlp2.d_in}, {mlp3.d_in})"
        )
    if mlp3.d_out != 1:
        raise ConfigError(f"threshold head must output one value, not {mlp3.d_out}")
    batch = h[None, :]
    scores = mlp2.forward(batch)[0]
    threshold = float(mlp3.forward(batch)[0, 0])
    return scores, threshold


def ranked_indices(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score; ties keep schema order."""
    return np.argsort(-np.asarray(scores), kind="stable")


def infer(scores: np.ndarray, threshold: float, schema: RelationSchema) -> ScoredPrediction:
    """Apply the one-winner rule: a single exceedance names the relation,
    zero or several map to Vague (with the exceeding relations, ranked,
    as the composition)."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (schema.num_relations,):
        raise InputError(
            f"expected {schema.num_relations} scores for schema {schema.name!r}, "
            f"got shape {scores.shape}"
        )
    order = ranked_indices(scores)
    chosen = [int(i) for i in order if scores[i] > threshold]
    composition = [schema.relations[i] for i in chosen]
    decision = composition[0] if len(chosen) == 1 else VAGUE
    return ScoredPrediction(
        scores=scores, threshold=float(threshold), decision=decision, composition=composition
    )


def topk(scores: np.ndarray, k: int, schema: RelationSchema) -> list[str]:
    """The k highest-scoring relations, descending, ties by schema order."""
    if not 1 <= k <= schema.num_relations:
        raise InputError(f"k must be in [1, {schema.num_relations}], got {k}")
    order = ranked_indices(scores)
    return [schema.relations[int(i)] for i in order[:k]]


def baseline_probabilities(h: np.ndarray, mlp_b: MLP, schema: RelationSchema) -> np.ndarray:
    """Softmax distribution of the single-label baseline over relations + Vague."""
    h = np.asarray(h, dtype=float)
    if mlp_b.d_out != schema.num_relations + 1:
        raise ConfigError(
            f"baseline head must output {schema.num_relations + 1} logits, "
            f"not {mlp_b.d_out}"
        )
    return softmax(mlp_b.forward(h[None, :])[0])


def baseline_score_and_infer(h: np.ndarray, mlp_b: MLP, schema: RelationSchema) -> str:
    """Single-label baseline decision: argmax over relations + Vague."""
    probs = baseline_probabilities(h, mlp_b, schema)
    return schema.all_labels[int(np.argmax(probs))]
