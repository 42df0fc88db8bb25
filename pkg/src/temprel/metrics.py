"""Evaluation: micro-F1, per-relation PRF, and TopK composition precision.

Micro-F1 is computed over all classes including Vague (stated in report
headers, since the literature is inconsistent about excluding it); with a
single gold and a single predicted label per instance it coincides with
accuracy.  TopK composition precision asks, on instances where both gold
and prediction are Vague, whether the K best-scored relations all appear
in the annotators' possible set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import ScoredPrediction, topk
from .data import EventPairInstance
from .errors import InputError
from .schema import VAGUE, RelationSchema


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class TopKScores:
    absolute: float
    random: float
    relative: float
    count: int


@dataclass
class MetricsReport:
    micro_f1: float
    per_relation: dict[str, ClassScores]
    labels: tuple[str, ...]
    confusion_matrix: np.ndarray  # rows gold, columns predicted
    topk_vague: dict[int, TopKScores] | None = None

    def to_dict(self) -> dict:
        out = {
            "micro_f1_all_classes_including_vague": self.micro_f1,
            "labels": list(self.labels),
            "per_relation": {
                label: {
                    "precision": cs.precision,
                    "recall": cs.recall,
                    "f1": cs.f1,
                    "support": cs.support,
                }
                for label, cs in self.per_relation.items()
            },
            "confusion_matrix": self.confusion_matrix.tolist(),
        }
        if self.topk_vague is not None:
            out["topk_vague"] = {
                str(k): {
                    "absolute": ts.absolute,
                    "random": ts.random,
                    "relative": ts.relative,
                    "count": ts.count,
                }
                for k, ts in self.topk_vague.items()
            }
        return out

    def to_text(self) -> str:
        lines = []
        lines.append("micro-F1 (all classes, Vague included): "
                     f"{100 * self.micro_f1:.1f}")
        lines.append("")
        width = max(len(label) for label in self.labels)
        lines.append(f"{'relation':<{width}}  {'P':>6} {'R':>6} {'F1':>6} {'support':>8}")
        for label in self.labels:
            cs = self.per_relation[label]
            lines.append(
                f"{label:<{width}}  {100 * cs.precision:6.1f} {100 * cs.recall:6.1f} "
                f"{100 * cs.f1:6.1f} {cs.support:8d}"
            )
        if self.topk_vague:
            lines.append("")
            lines.append("TopK Vague composition precision")
            lines.append(f"{'K':>3} {'absolute':>9} {'random':>9} {'relative':>9} {'count':>6}")
            for k in sorted(self.topk_vague):
                ts = self.topk_vague[k]
                lines.append(
                    f"{k:>3} {100 * ts.absolute:9.1f} {100 * ts.random:9.1f} "
                    f"{100 * ts.relative:9.1f} {ts.count:6d}"
                )
        return "\n".join(lines) + "\n"

    def save(self, json_path: str | Path, text_path: str | Path | None = None) -> None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if text_path is not None:
            with open(text_path, "w", encoding="utf-8") as fh:
                fh.write(self.to_text())


def micro_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Micro-averaged F1 over all classes (equals accuracy here)."""
    if len(gold) != len(pred):
        raise InputError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    if not gold:
        raise InputError("empty label lists")
    labels = sorted(set(gold) | set(pred))
    tp = fp = fn = 0
    for label in labels:
        tp += sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp += sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn += sum(1 for g, p in zip(gold, pred) if g == label and p != label)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def per_relation_prf(
    gold: Sequence[str], pred: Sequence[str], schema: RelationSchema
) -> dict[str, ClassScores]:
    """One-vs-rest precision/recall/F1 per label; empty classes score 0."""
    if len(gold) != len(pred):
        raise InputError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    out = {}
    for label in schema.all_labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        out[label] = ClassScores(precision, recall, f1, support=tp + fn)
    return out


def confusion_counts(
    gold: Sequence[str], pred: Sequence[str], schema: RelationSchema
) -> np.ndarray:
    """Gold x predicted counts over relations plus Vague, in schema order."""
    labels = schema.all_labels
    index = {label: i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        matrix[index[g], index[p]] += 1
    return matrix


def random_baseline(k: int, num_relations: int, set_size: int) -> float:
    """Chance that k uniformly ranked relations all land in the true set."""
    if not 1 <= k <= set_size <= num_relations:
        raise InputError(
            f"need 1 <= k <= set_size <= num_relations, got ({k}, {set_size}, {num_relations})"
        )
    return math.comb(set_size, k) / math.comb(num_relations, k)


def pooled_random_baseline(
    k: int, num_relations: int, set_sizes: Sequence[int]
) -> float:
    """Average random TopK precision over instances with varied set sizes.

    Sets smaller than k contribute zero chance (the subset test can never
    pass for them).
    """
    if not set_sizes:
        raise InputError("no set sizes to pool")
    total = 0.0
    for s in set_sizes:
        total += math.comb(s, k) / math.comb(num_relations, k)
    return total / len(set_sizes)


def relative_precision(p: float, p_random: float) -> float:
    """Improvement over chance: p / p_random - 1."""
    if p_random <= 0:
        raise InputError("random precision must be positive")
    return p / p_random - 1.0


def _vague_hits(
    predictions: Sequence[ScoredPrediction],
    insts: Sequence[EventPairInstance],
    k: int,
    schema: RelationSchema,
) -> tuple[int, int, list[int]]:
    """(hits, eligible count, eligible set sizes) for TopK evaluation."""
    hits = 0
    count = 0
    sizes = []
    for prediction, inst in zip(predictions, insts):
        if inst.gold != VAGUE or prediction.decision != VAGUE:
            continue
        if inst.possible_set is None:
            continue
        count += 1
        sizes.append(len(inst.possible_set))
        if set(topk(prediction.scores, k, schema)) <= inst.possible_set:
            hits += 1
    return hits, count, sizes


def topk_vague_precision(
    predictions: Sequence[ScoredPrediction],
    insts: Sequence[EventPairInstance],
    k: int,
    schema: RelationSchema,
) -> float | None:
    """Fraction of correctly-Vague instances whose TopK is in the gold set.

    Returns None when no instance qualifies (gold Vague, predicted Vague,
    possible set known).
    """
    if len(predictions) != len(insts):
        raise InputError("predictions and instances must align")
    if not 1 <= k <= schema.num_relations:
        raise InputError(f"k must be in [1, {schema.num_relations}], got {k}")
    hits, count, _ = _vague_hits(predictions, insts, k, schema)
    return hits / count if count else None


def evaluate(
    gold: Sequence[str],
    pred: Sequence[str],
    schema: RelationSchema,
    predictions: Sequence[ScoredPrediction] | None = None,
    insts: Sequence[EventPairInstance] | None = None,
    topk_ks: Sequence[int] = (1, 2, 3),
) -> MetricsReport:
    """Full report; TopK composition stats need scored predictions."""
    report = MetricsReport(
        micro_f1=micro_f1(gold, pred),
        per_relation=per_relation_prf(gold, pred, schema),
        labels=schema.all_labels,
        confusion_matrix=confusion_counts(gold, pred, schema),
    )
    if predictions is not None and insts is not None:
        topk_stats: dict[int, TopKScores] = {}
        for k in topk_ks:
            if k > schema.num_relations:
                continue
            hits, count, sizes = _vague_hits(predictions, insts, k, schema)
            if count == 0:
                continue
            absolute = hits / count
            chance = pooled_random_baseline(k, schema.num_relations, sizes)
            rel = relative_precision(absolute, chance) if chance > 0 else float("nan")
            topk_stats[k] = TopKScores(absolute, chance, rel, count)
        if topk_stats:
            report.topk_vague = topk_stats
    return report
