"""Relation schemas: ordered label sets, confusion pairs, inverses, and the
start/end point-relation to interval-relation mapping.

A schema declares the well-defined relations of a label set (``Vague`` is
never a member), which relations are *confusion* partners (they share the
same start-point ordering and differ only at the end-point, the typical
source of annotator disagreement), and which relation holds when the two
events are swapped.  Schemas are immutable and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import SchemaError

VAGUE = "Vague"


class PointRelation(str, Enum):
    """Ordering of one pair of interval end-points on the timeline."""

    BEFORE = "before"
    EQUAL = "equal"
    AFTER = "after"


def _as_point(value: PointRelation | str) -> PointRelation:
    try:
        return PointRelation(value)
    except ValueError:
        raise SchemaError(f"not a point relation: {value!r}") from None


# How a (start-point, end-point) ordering combines into one interval
# relation. Rows are exhaustive over the 3x3 point-relation grid.
_POINTS_TO_INTERVAL: dict[tuple[PointRelation, PointRelation], str] = {
    (PointRelation.BEFORE, PointRelation.BEFORE): "Before",
    (PointRelation.BEFORE, PointRelation.EQUAL): "Include",
    (PointRelation.BEFORE, PointRelation.AFTER): "Include",
    (PointRelation.EQUAL, PointRelation.BEFORE): "Is_Included",
    (PointRelation.EQUAL, PointRelation.EQUAL): "Simultaneous",
    (PointRelation.EQUAL, PointRelation.AFTER): "Include",
    (PointRelation.AFTER, PointRelation.BEFORE): "Is_Included",
    (PointRelation.AFTER, PointRelation.EQUAL): "Is_Included",
    (PointRelation.AFTER, PointRelation.AFTER): "After",
}


@dataclass(frozen=True)
class RelationSchema:
    """An ordered set of well-defined relations plus label maps.

    Attributes:
        name: identifier of the label set (e.g. ``tbdense``).
        relations: ordered well-defined relations; ``Vague`` excluded.
        confusion: partial involution relation -> its confusion partner.
        inverse: total involution over relations plus ``Vague`` giving the
            relation that holds for the swapped event pair.
    """

    name: str
    relations: tuple[str, ...]
    confusion: dict[str, str] = field(default_factory=dict)
    inverse: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        rels = self.relations
        if len(set(rels)) != len(rels):
            raise SchemaError(f"duplicate relations in schema {self.name!r}")
        if VAGUE in rels:
            raise SchemaError(f"{VAGUE} must not be listed as a well-defined relation")
        for r, c in self.confusion.items():
            if r not in rels or c not in rels:
                raise SchemaError(f"confusion pair ({r}, {c}) outside schema relations")
            if self.confusion.get(c) != r:
                raise SchemaError(f"confusion map is not an involution at {r!r}")
        domain = set(rels) | {VAGUE}
        if set(self.inverse) != domain:
            raise SchemaError(f"inverse map of schema {self.name!r} is not total")
        for r, inv in self.inverse.items():
            if inv not in domain or self.inverse[inv] != r:
                raise SchemaError(f"inverse map is not an involution at {r!r}")

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def all_labels(self) -> tuple[str, ...]:
        """Relations in schema order with ``Vague`` appended last."""
        return self.relations + (VAGUE,)

    def index_of(self, relation: str) -> int:
        """Position of a well-defined relation in schema order."""
        try:
            return self.relations.index(relation)
        except ValueError:
            raise SchemaError(f"unknown relation {relation!r} in schema {self.name!r}") from None

    def confusion_pairs(self) -> list[tuple[str, str]]:
        """Unordered confusion pairs, each listed once, in schema order."""
        pairs = []
        for r in self.relations:
            c = self.confusion.get(r)
            if c is not None and self.index_of(r) < self.index_of(c):
                pairs.append((r, c))
        return pairs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "relations": list(self.relations),
            "confusion": [[a, b] for a, b in self.confusion_pairs()],
            "inverse": sorted(
                [a, b] for a, b in self.inverse.items() if self.all_labels.index(a) <= self.all_labels.index(b)
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RelationSchema":
        relations = tuple(data["relations"])
        confusion: dict[str, str] = {}
        for a, b in data.get("confusion", []):
            confusion[a] = b
            confusion[b] = a
        inverse: dict[str, str] = {VAGUE: VAGUE}
        for a, b in data.get("inverse", []):
            inverse[a] = b
            inverse[b] = a
        return cls(
            name=data["name"],
            relations=relations,
            confusion=confusion,
            inverse=inverse,
        )


def confusion_of(schema: RelationSchema, relation: str) -> str | None:
    """Confusion partner of a well-defined relation, or None when undefined.

    Symmetric relations (e.g. Simultaneous) and every relation of a
    start-point-only schema have no confusion partner.
    """
    if relation not in schema.relations:
        raise SchemaError(f"unknown relation {relation!r} in schema {schema.name!r}")
    return schema.confusion.get(relation)


def inverse_of(schema: RelationSchema, relation: str) -> str:
    """Relation holding for the swapped pair (e2, e1); Vague maps to itself."""
    try:
        return schema.inverse[relation]
    except KeyError:
        raise SchemaError(f"unknown relation {relation!r} in schema {schema.name!r}") from None


def interval_relation_from_points(
    start: PointRelation | str, end: PointRelation | str
) -> str:
    """Map a (start-point, end-point) ordering to its interval relation."""
    return _POINTS_TO_INTERVAL[(_as_point(start), _as_point(end))]


def _tbdense_like(name: str) -> RelationSchema:
    return RelationSchema(
        name=name,
        relations=("Before", "After", "Include", "Is_Included", "Simultaneous"),
        confusion={
            "Before": "Include",
            "Include": "Before",
            "After": "Is_Included",
            "Is_Included": "After",
        },
        inverse={
            "Before": "After",
            "After": "Before",
            "Include": "Is_Included",
            "Is_Included": "Include",
            "Simultaneous": "Simultaneous",
            VAGUE: VAGUE,
        },
    )


def _matres() -> RelationSchema:
    return RelationSchema(
        name="matres",
        relations=("Before", "After", "Equal"),
        confusion={},
        inverse={"Before": "After", "After": "Before", "Equal": "Equal", VAGUE: VAGUE},
    )


_PRESETS = {
    "tbdense": lambda: _tbdense_like("tbdense"),
    "matres": _matres,
    "udst": lambda: _tbdense_like("udst"),
}


def load_schema(path: str | Path) -> RelationSchema:
    """Load a schema from a JSON document (see ``RelationSchema.to_dict``)."""
    with open(path, encoding="utf-8") as fh:
        return RelationSchema.from_dict(json.load(fh))


def save_schema(schema: RelationSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def get_schema(name_or_path: str | Path) -> RelationSchema:
    """Resolve a preset name (tbdense, matres, udst) or a schema file path."""
    key = str(name_or_path)
    if key in _PRESETS:
        return _PRESETS[key]()
    if Path(key).exists():
        return load_schema(key)
    raise SchemaError(f"unknown schema {key!r}: not a preset and not a file")
