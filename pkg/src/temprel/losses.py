"""Threshold-ranking losses and confusion-set speculation.

For a pair whose gold label is a well-defined relation r, two cross-entropy
terms rank r above the pair's threshold (L1) and the threshold above every
other relation (L2):

    L1 = -log( exp(P(r)) / (exp(P(r)) + exp(T)) )
    L2 = -log( exp(T) / (sum_{r' != r} exp(P(r')) + exp(T)) )

A Vague pair gets no trustworthy relation labels, so a *confusion set* is
speculated from the model's own ranking: the top relation, its confusion
partner, and the runner-up.  Members already scoring above the threshold
are filtered out (no further reward), and the rest are encouraged with a
ramped weight w:

    L3 = -w * sum_{r in CS_T} log( exp(P(r)) / (sum_{r' in CS_T} exp(P(r')) + exp(T)) )
    w  = min(alpha * step * w_cap, w_cap)

Relations outside the confusion set are deliberately never penalized; the
ablation term L4 adds exactly that penalty so its damage can be measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .schema import VAGUE, RelationSchema


@dataclass(frozen=True)
class ConfusionSet:
    """Speculated composition of a Vague pair.

    ``members`` holds the speculated relations; ``filtered`` the subset
    still scoring strictly below the threshold, the only ones L3 rewards.
    """

    members: frozenset[str]
    filtered: frozenset[str]

    def __post_init__(self):
        if not self.filtered <= self.members:
            raise InputError("filtered confusion relations must be members")


def weight_at(step: int, alpha: float, w_cap: float) -> float:
    """Linearly ramped Vague-loss weight, capped at w_cap."""
    if step < 0:
        raise InputError(f"step must be >= 0, got {step}")
    return min(alpha * step * w_cap, w_cap)


def build_confusion_set(
    scores: np.ndarray, threshold: float, schema: RelationSchema
) -> ConfusionSet:
    """Top-2 relations plus the top relation's confusion partner.

    Ties rank by schema order.  Members already at or above the threshold
    stay members but drop out of ``filtered``.
    """
    scores = np.asarray(scores, dtype=float)
    if schema.num_relations < 2:
        raise InputError("confusion sets need at least two relations")
    order = np.argsort(-scores, kind="stable")
    r_fir = schema.relations[int(order[0])]
    r_sec = schema.relations[int(order[1])]
    members = {r_fir, r_sec}
    partner = schema.confusion.get(r_fir)
    if partner is not None:
        members.add(partner)
    filtered = {r for r in members if scores[schema.index_of(r)] < threshold}
    return ConfusionSet(members=frozenset(members), filtered=frozenset(filtered))


def loss_well_defined(
    scores: np.ndarray, threshold: float, gold: str, schema: RelationSchema
) -> tuple[float, float]:
    """(L1, L2) for a pair with a well-defined gold relation."""
    if gold == VAGUE:
        raise InputError("gold is Vague; use loss_vague")
    g = schema.index_of(gold)
    scores = np.asarray(scores, dtype=float)
    l1 = float(np.logaddexp(0.0, threshold - scores[g]))
    others = np.delete(scores, g)
    l2 = float(np.logaddexp.reduce(np.append(others, threshold)) - threshold)
    return l1, l2


def loss_vague(
    scores: np.ndarray,
    threshold: float,
    cs: ConfusionSet,
    w: float,
    schema: RelationSchema,
) -> float:
    """L3: reward the below-threshold confusion-set members, weight w."""
    if w < 0:
        raise InputError(f"w must be >= 0, got {w}")
    idx = [schema.index_of(r) for r in sorted(cs.filtered, key=schema.index_of)]
    if not idx:
        return 0.0
    scores = np.asarray(scores, dtype=float)
    pool = np.append(scores[idx], threshold)
    log_z = float(np.logaddexp.reduce(pool))
    return -w * float(sum(scores[i] - log_z for i in idx))


def loss_penalty_ablation(
    scores: np.ndarray, threshold: float, cs: ConfusionSet, schema: RelationSchema
) -> float:
    """L4: the ablation penalty pushing every non-member below threshold."""
    scores = np.asarray(scores, dtype=float)
    outside = [i for i, r in enumerate(schema.relations) if r not in cs.members]
    if not outside:
        return 0.0
    pool = np.append(scores[outside], threshold)
    return float(np.logaddexp.reduce(pool) - threshold)


# ---------------------------------------------------------------------------
# Batched forms used by the training loop.  Each returns the summed loss and
# the gradients w.r.t. the score matrix and threshold vector; set choices
# (gold indices, confusion-set masks) are taken as fixed selections.
# ---------------------------------------------------------------------------


def _masked_logsumexp_with_threshold(
    scores: np.ndarray, mask: np.ndarray, thresholds: np.ndarray
) -> np.ndarray:
    """Row-wise logsumexp over masked scores plus the threshold column."""
    neg_inf = np.float64(-np.inf)
    pool = np.concatenate(
        [np.where(mask, scores, neg_inf), thresholds[:, None]], axis=1
    )
    m = pool.max(axis=1, keepdims=True)
    return (m[:, 0] + np.log(np.exp(pool - m).sum(axis=1)))


def _masked_softmax(scores: np.ndarray, mask: np.ndarray, log_z: np.ndarray) -> np.ndarray:
    """exp(score - log_z) inside the mask, exact zero outside."""
    shifted = np.where(mask, scores - log_z[:, None], -np.inf)
    return np.exp(shifted)


def batch_well_defined(
    scores: np.ndarray, thresholds: np.ndarray, gold_idx: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed L1 + L2 over rows, with gradients."""
    n, num_rel = scores.shape
    rows = np.arange(n)
    gold_scores = scores[rows, gold_idx]

    # L1 = softplus(T - P(gold))
    sig = 1.0 / (1.0 + np.exp(-(thresholds - gold_scores)))
    l1 = np.logaddexp(0.0, thresholds - gold_scores)

    non_gold = np.ones_like(scores, dtype=bool)
    non_gold[rows, gold_idx] = False
    log_z = _masked_logsumexp_with_threshold(scores, non_gold, thresholds)
    l2 = log_z - thresholds

    d_scores = _masked_softmax(scores, non_gold, log_z)
    d_scores[rows, gold_idx] -= sig
    d_thresholds = sig + np.exp(thresholds - log_z) - 1.0
    return float(l1.sum() + l2.sum()), d_scores, d_thresholds


def batch_vague(
    scores: np.ndarray,
    thresholds: np.ndarray,
    cs_t_mask: np.ndarray,
    w: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed L3 over rows given fixed CS_T membership masks."""
    counts = cs_t_mask.sum(axis=1).astype(float)
    active = counts > 0
    if not active.any() or w == 0.0:
        return 0.0, np.zeros_like(scores), np.zeros_like(thresholds)

    log_z = _masked_logsumexp_with_threshold(scores, cs_t_mask, thresholds)
    member_scores = np.where(cs_t_mask, scores, 0.0).sum(axis=1)
    per_row = w * (counts * log_z - member_scores)

    soft = _masked_softmax(scores, cs_t_mask, log_z)
    d_scores = np.where(cs_t_mask, w * (counts[:, None] * soft - 1.0), 0.0)
    d_thresholds = w * counts * np.exp(thresholds - log_z)
    # rows with an empty CS_T contribute nothing
    d_scores[~active] = 0.0
    d_thresholds[~active] = 0.0
    return float(per_row[active].sum()), d_scores, d_thresholds


def batch_penalty(
    scores: np.ndarray, thresholds: np.ndarray, outside_mask: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed L4 over rows given fixed outside-of-CS masks."""
    active = outside_mask.any(axis=1)
    if not active.any():
        return 0.0, np.zeros_like(scores), np.zeros_like(thresholds)
    log_z = _masked_logsumexp_with_threshold(scores, outside_mask, thresholds)
    l4 = np.where(active, log_z - thresholds, 0.0)
    d_scores = _masked_softmax(scores, outside_mask, log_z)
    d_thresholds = np.where(active, np.exp(thresholds - log_z) - 1.0, 0.0)
    d_scores[~active] = 0.0
    return float(l4.sum()), d_scores, d_thresholds


def batch_cross_entropy(
    logits: np.ndarray, gold_idx: np.ndarray
) -> tuple[float, np.ndarray]:
    """Summed softmax cross-entropy with gradients (baseline classifier)."""
    n = logits.shape[0]
    rows = np.arange(n)
    m = logits.max(axis=1, keepdims=True)
    log_z = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    loss = float((log_z - logits[rows, gold_idx]).sum())
    d_logits = np.exp(logits - log_z[:, None])
    d_logits[rows, gold_idx] -= 1.0
    return loss, d_logits


def confusion_masks(
    scores: np.ndarray, thresholds: np.ndarray, schema: RelationSchema
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise CS membership and CS_T masks for a batch of score rows."""
    n, num_rel = scores.shape
    order = np.argsort(-scores, axis=1, kind="stable")
    members = np.zeros((n, num_rel), dtype=bool)
    rows = np.arange(n)
    members[rows, order[:, 0]] = True
    members[rows, order[:, 1]] = True
    partner_idx = np.array(
        [
            schema.index_of(schema.confusion[r]) if r in schema.confusion else -1
            for r in schema.relations
        ]
    )
    top1_partner = partner_idx[order[:, 0]]
    has_partner = top1_partner >= 0
    members[rows[has_partner], top1_partner[has_partner]] = True
    filtered = members & (scores < thresholds[:, None])
    return members, filtered
