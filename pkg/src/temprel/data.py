"""Event-pair instances, dataset I/O, adjudication, and synthetic corpora.

The canonical dataset format is JSON Lines: one self-describing object per
line with fields ``id``, ``tokens``, ``context_before``, ``context_after``,
``e1_span``, ``e2_span``, ``gold`` and, when applicable, the optional
fields ``annotator_labels``, ``possible_set`` and ``timelines``.  Spans are
half-open ``[start, end)`` token index ranges.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, FormatError, InputError
from .schema import (
    VAGUE,
    PointRelation,
    RelationSchema,
    interval_relation_from_points,
    inverse_of,
)


@dataclass(frozen=True)
class AnnotatorTimeline:
    """One annotator's relative timeline for an event pair."""

    start_rel: str
    end_rel: str

    def __post_init__(self):
        PointRelation(self.start_rel)
        PointRelation(self.end_rel)


@dataclass
class EventPairInstance:
    """A single event pair in context.

    ``tokens`` holds the sentence(s) containing both events;
    ``context_before``/``context_after`` hold at most one extra sentence
    each.  ``gold`` is a well-defined relation or ``Vague`` (or None for
    raw, not-yet-adjudicated records).  ``possible_set``, when known,
    records the well-defined relations hiding behind a ``Vague`` label.
    """

    id: str
    tokens: list[str]
    e1_span: tuple[int, int]
    e2_span: tuple[int, int]
    gold: str | None = None
    context_before: list[str] = field(default_factory=list)
    context_after: list[str] = field(default_factory=list)
    annotator_labels: list[str] | None = None
    possible_set: frozenset[str] | None = None
    timelines: list[AnnotatorTimeline] | None = None

    def __post_init__(self):
        self.e1_span = tuple(self.e1_span)
        self.e2_span = tuple(self.e2_span)
        for name, (lo, hi) in (("e1_span", self.e1_span), ("e2_span", self.e2_span)):
            if not (0 <= lo < hi <= len(self.tokens)):
                raise InputError(f"{self.id}: {name} {lo, hi} out of bounds for {len(self.tokens)} tokens")
        a, b = sorted([self.e1_span, self.e2_span])
        if a[1] > b[0]:
            raise InputError(f"{self.id}: event spans overlap")
        if self.possible_set is not None:
            self.possible_set = frozenset(self.possible_set)
            if not self.possible_set:
                raise InputError(f"{self.id}: possible_set must be non-empty when present")

    def validate_labels(self, schema: RelationSchema) -> None:
        """Check gold and possible_set against a schema."""
        labels = set(schema.all_labels)
        if self.gold is not None and self.gold not in labels:
            raise DataError(f"{self.id}: gold label {self.gold!r} not in schema {schema.name!r}")
        if self.possible_set is not None and not self.possible_set <= set(schema.relations):
            raise DataError(f"{self.id}: possible_set {sorted(self.possible_set)} outside schema relations")

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "tokens": self.tokens,
            "context_before": self.context_before,
            "context_after": self.context_after,
            "e1_span": list(self.e1_span),
            "e2_span": list(self.e2_span),
            "gold": self.gold,
        }
        if self.annotator_labels is not None:
            rec["annotator_labels"] = self.annotator_labels
        if self.possible_set is not None:
            rec["possible_set"] = sorted(self.possible_set)
        if self.timelines is not None:
            rec["timelines"] = [
                {"start_rel": t.start_rel, "end_rel": t.end_rel} for t in self.timelines
            ]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "EventPairInstance":
        timelines = None
        if rec.get("timelines") is not None:
            timelines = [
                AnnotatorTimeline(t["start_rel"], t["end_rel"]) for t in rec["timelines"]
            ]
        possible = rec.get("possible_set")
        return cls(
            id=rec["id"],
            tokens=list(rec["tokens"]),
            e1_span=tuple(rec["e1_span"]),
            e2_span=tuple(rec["e2_span"]),
            gold=rec.get("gold"),
            context_before=list(rec.get("context_before", [])),
            context_after=list(rec.get("context_after", [])),
            annotator_labels=list(rec["annotator_labels"]) if rec.get("annotator_labels") is not None else None,
            possible_set=frozenset(possible) if possible is not None else None,
            timelines=timelines,
        )


def write_instances(instances: Iterable[EventPairInstance], path: str | Path) -> int:
    """Write instances as JSON Lines; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_instances(path: str | Path) -> list[EventPairInstance]:
    """Read a JSON Lines dataset; malformed lines raise DataError with a line number."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(EventPairInstance.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, InputError) as exc:
                raise DataError(f"{path}:{lineno}: bad record: {exc}") from exc
    return out


def adjudicate(labels: Sequence[str]) -> tuple[str, frozenset[str]]:
    """Majority-vote three annotator labels into one gold label.

    Two or three matching votes win; three pairwise-distinct votes yield
    ``Vague`` with all three kept as the possible relations.
    """
    if len(labels) != 3:
        raise InputError(f"adjudication needs exactly 3 labels, got {len(labels)}")
    for winner in labels:
        if labels.count(winner) >= 2:
            return winner, frozenset({winner})
    return VAGUE, frozenset(labels)


def timelines_to_labels(timelines: Sequence[AnnotatorTimeline]) -> list[str]:
    """Map annotator timelines to interval relations, element-wise."""
    if not timelines:
        raise InputError("empty timeline list")
    return [interval_relation_from_points(t.start_rel, t.end_rel) for t in timelines]


def adjudicate_timeline_instance(inst: EventPairInstance) -> EventPairInstance:
    """Resolve an instance's raw timelines into gold (and possible_set).

    One timeline (training-style records, a single annotator) maps directly
    to its interval relation; three timelines go through majority voting.
    """
    if not inst.timelines:
        raise DataError(f"{inst.id}: no timelines to adjudicate")
    labels = timelines_to_labels(inst.timelines)
    if len(labels) == 1:
        return replace(inst, gold=labels[0], annotator_labels=labels, possible_set=None)
    if len(labels) != 3:
        raise DataError(f"{inst.id}: expected 1 or 3 timelines, got {len(labels)}")
    gold, possible = adjudicate(labels)
    return replace(inst, gold=gold, annotator_labels=labels, possible_set=possible)


SYM_SUFFIX = "~sym"


def _swap_pair(inst: EventPairInstance, schema: RelationSchema) -> EventPairInstance:
    possible = inst.possible_set
    if possible is not None:
        possible = frozenset(inverse_of(schema, r) for r in possible)
    return replace(
        inst,
        id=inst.id + SYM_SUFFIX,
        e1_span=inst.e2_span,
        e2_span=inst.e1_span,
        gold=inverse_of(schema, inst.gold),
        possible_set=possible,
    )


def enhance_symmetry(
    train: Sequence[EventPairInstance], schema: RelationSchema
) -> list[EventPairInstance]:
    """Double a training set by swapping each pair and inverting its label.

    Only intended for training data; validation and test sets must be left
    untouched.
    """
    out = list(train)
    for inst in train:
        if inst.gold is None:
            raise InputError(f"{inst.id}: cannot enhance an instance without a gold label")
        out.append(_swap_pair(inst, schema))
    return out


def split(
    instances: Sequence[EventPairInstance],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[EventPairInstance], list[EventPairInstance], list[EventPairInstance]]:
    """Deterministic shuffled train/dev/test partition."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InputError(f"fractions must sum to 1, got {fractions}")
    order = list(instances)
    random.Random(seed).shuffle(order)
    n = len(order)
    n_train = int(n * fractions[0])
    n_dev = int(n * fractions[1])
    return order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :]


def cue_vocabulary(schema: RelationSchema, size: int = 8) -> dict[str, list[str]]:
    """Disjoint cue-token vocabulary per well-defined relation."""
    return {
        r: [f"{r.lower()}_cue{j}" for j in range(size)] for r in schema.relations
    }


def _sample_vague_pair(
    rng: random.Random, schema: RelationSchema
) -> tuple[str, str]:
    """Two distinct relations behind a Vague instance.

    Confusion pairs are favoured (probability one half, when the schema has
    any) since end-point ambiguity is the typical source of disagreement;
    otherwise a uniformly random unordered pair is drawn.
    """
    pairs = schema.confusion_pairs()
    if pairs and rng.random() < 0.5:
        return pairs[rng.randrange(len(pairs))]
    r1, r2 = rng.sample(list(schema.relations), 2)
    return r1, r2


def relation_prior(schema: RelationSchema, decay: float = 0.55) -> list[float]:
    """Imbalanced relation frequencies, heaviest first in schema order.

    Mirrors the skew of real corpora, where the later (minority) relations
    are rare as gold labels but common inside Vague possible sets.
    """
    raw = [decay**i for i in range(schema.num_relations)]
    total = sum(raw)
    return [x / total for x in raw]


def generate_synthetic(
    schema: RelationSchema,
    n: int,
    vague_fraction: float,
    seed: int,
    cue_vocab_size: int = 16,
    distractor_prob: float = 0.5,
    relation_weights: Sequence[float] | None = None,
) -> list[EventPairInstance]:
    """Generate a deterministic cue-token corpus at desk scale.

    A well-defined instance embeds cue tokens for its relation (plus,
    sometimes, one distractor cue of another relation, so that mixed cues
    alone do not identify Vague).  A Vague instance embeds balanced cues
    for exactly two distinct relations, recorded in ``possible_set``.
    Relations are drawn from an imbalanced prior by default, so much of
    the evidence about minority relations only ever appears inside Vague
    instances.
    """
    if n < 0:
        raise InputError(f"n must be >= 0, got {n}")
    if not 0.0 <= vague_fraction <= 1.0:
        raise InputError(f"vague_fraction must be in [0, 1], got {vague_fraction}")
    weights = list(relation_weights) if relation_weights is not None else relation_prior(schema)
    if len(weights) != schema.num_relations:
        raise InputError(
            f"need {schema.num_relations} relation weights, got {len(weights)}"
        )
    rng = random.Random(seed)
    cues = cue_vocabulary(schema, cue_vocab_size)
    fillers = [f"filler{j}" for j in range(40)]
    events = [f"event{j}" for j in range(20)]

    def some_fillers(lo: int, hi: int) -> list[str]:
        return [rng.choice(fillers) for _ in range(rng.randint(lo, hi))]

    out = []
    for i in range(n):
        if rng.random() < vague_fraction:
            r1, r2 = _sample_vague_pair(rng, schema)
            gold = VAGUE
            possible = frozenset({r1, r2})
            mid_cues = [rng.choice(cues[r1]) for _ in range(2)] + [
                rng.choice(cues[r2]) for _ in range(2)
            ]
        else:
            gold = rng.choices(schema.relations, weights=weights, k=1)[0]
            possible = None
            mid_cues = [rng.choice(cues[gold]) for _ in range(3)]
            if rng.random() < distractor_prob:
                other = rng.choice([r for r in schema.relations if r != gold])
                mid_cues.append(rng.choice(cues[other]))
        rng.shuffle(mid_cues)

        pre = some_fillers(1, 2)
        e1_len = 2 if rng.random() < 0.2 else 1
        e1_toks = [rng.choice(events) for _ in range(e1_len)]
        mid = mid_cues + some_fillers(0, 1)
        e2_toks = [rng.choice(events)]
        post = some_fillers(1, 2)

        tokens = pre + e1_toks + mid + e2_toks + post
        e1_start = len(pre)
        e2_start = len(pre) + len(e1_toks) + len(mid)
        out.append(
            EventPairInstance(
                id=f"syn-{i:06d}",
                tokens=tokens,
                e1_span=(e1_start, e1_start + len(e1_toks)),
                e2_span=(e2_start, e2_start + 1),
                gold=gold,
                context_before=some_fillers(0, 2),
                context_after=some_fillers(0, 2),
                possible_set=possible,
            )
        )
    return out
