"""Split a knowledge graph into four attribute-typed subgraphs.

The subgraphs hold mutually exclusive attribute triples: ``name`` keeps only
the name attribute, ``literal`` keeps non-name string values, ``digital``
keeps non-name numeric values, and ``structure`` keeps no attribute triples
at all.  All four share the parent's entities and relation triples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError
from .kg import KnowledgeGraph

KINDS = ("name", "literal", "digital", "structure")


class ValueKind(Enum):
    DIGITAL = "digital"
    LITERAL = "literal"


# Optionally signed decimal number: integer part with optional comma
# thousands separators (or a bare fraction), optional decimal point,
# optional exponent.  Anything else is a literal.
_DIGITAL_RE = re.compile(
    r"^[+-]?(?:(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$"
)


def classify_value(raw: str) -> ValueKind:
    """Classify a value string as digital (parses as a number) or literal."""
    if _DIGITAL_RE.match(raw.strip()):
        return ValueKind.DIGITAL
    return ValueKind.LITERAL


@dataclass(frozen=True)
class NameSource:
    """Where entity names come from.

    Exactly one of the two modes is active: synthesize one name triple per
    entity from its surface label (default), or treat the listed attributes
    as the name attribute.  Entries in `attributes` may be attribute labels
    or attribute ids of the graph being partitioned.
    """

    from_label: bool = True
    attributes: tuple = ()

    def __post_init__(self):
        if self.from_label == bool(self.attributes):
            raise ConfigError("name source must be either from-entity-label or "
                              "a non-empty attribute list, not both or neither")


def label_to_name(label: str) -> str:
    """Strip any URI prefix and replace underscores with spaces."""
    tail = label.rsplit("/", 1)[-1]
    tail = tail.rsplit("#", 1)[-1]
    return tail.replace("_", " ")


@dataclass(frozen=True)
class Subgraph:
    """One attribute-typed view of a parent graph.

    `relation_triples` is the parent's list (same object).  The attribute and
    value label tables are the parent's, extended with synthesized entries
    when names are derived from entity labels.
    """

    kind: str
    base: KnowledgeGraph
    attribute_triples: tuple[tuple[int, int, int], ...]
    relation_triples: tuple[tuple[int, int, int], ...]
    attr_labels: tuple[str, ...]
    value_labels: tuple[str, ...]

    @property
    def n_entities(self) -> int:
        return self.base.n_entities

    @property
    def n_attributes(self) -> int:
        return len(self.attr_labels)

    @property
    def n_values(self) -> int:
        return len(self.value_labels)

    def triples_of(self, e: int) -> list[tuple[int, int, int]]:
        """Attribute triples of entity `e`, sorted by (attribute id, value id)."""
        return sorted((t for t in self.attribute_triples if t[0] == e),
                      key=lambda t: (t[1], t[2]))


@dataclass(frozen=True)
class Partition:
    name: Subgraph
    literal: Subgraph
    digital: Subgraph
    structure: Subgraph

    def by_kind(self, kind: str) -> Subgraph:
        if kind not in KINDS:
            raise ConfigError(f"unknown subgraph kind {kind!r}")
        return getattr(self, kind)

    def __iter__(self):
        return iter((self.name, self.literal, self.digital, self.structure))


def _resolve_name_attrs(kg: KnowledgeGraph, entries) -> set[int]:
    ids: set[int] = set()
    by_label = {lab: i for i, lab in enumerate(kg.attribute_labels)}
    for entry in entries:
        if isinstance(entry, int):
            if not 0 <= entry < kg.n_attributes:
                raise ConfigError(f"name attribute id {entry} not present in graph")
            ids.add(entry)
        else:
            if entry not in by_label:
                raise ConfigError(f"name attribute {entry!r} not present in graph")
            ids.add(by_label[entry])
    return ids


def partition(kg: KnowledgeGraph, name_source: NameSource | None = None) -> Partition:
    """Partition `kg` into the name / literal / digital / structure subgraphs.

    Every attribute triple lands in exactly one of the first three subgraphs;
    the structure subgraph is attribute-free.  With the from-label name
    source, one name triple per entity is synthesized under a fresh attribute
    id, and the synthesized name strings are interned past the parent's value
    table.
    """
    name_source = name_source or NameSource()

    attr_labels = kg.attribute_labels
    value_labels = kg.value_labels

    name_triples: list[tuple[int, int, int]] = []
    literal_triples: list[tuple[int, int, int]] = []
    digital_triples: list[tuple[int, int, int]] = []

    if name_source.from_label:
        name_attr_ids: set[int] = set()
        name_attr_id = kg.n_attributes
        attr_labels = attr_labels + ("name",)
        value_index = {lab: i for i, lab in enumerate(kg.value_labels)}
        extended_values = list(kg.value_labels)
        for e in kg.entities:
            name = label_to_name(kg.entity_labels[e])
            vid = value_index.get(name)
            if vid is None:
                vid = len(extended_values)
                value_index[name] = vid
                extended_values.append(name)
            name_triples.append((e, name_attr_id, vid))
        value_labels = tuple(extended_values)
    else:
        name_attr_ids = _resolve_name_attrs(kg, name_source.attributes)

    for triple in kg.attribute_triples:
        e, a, v = triple
        if a in name_attr_ids:
            name_triples.append(triple)
        elif classify_value(kg.value_labels[v]) is ValueKind.DIGITAL:
            digital_triples.append(triple)
        else:
            literal_triples.append(triple)

    def sub(kind, triples):
        return Subgraph(kind=kind, base=kg, attribute_triples=tuple(triples),
                        relation_triples=kg.relation_triples,
                        attr_labels=attr_labels, value_labels=value_labels)

    return Partition(
        name=sub("name", name_triples),
        literal=sub("literal", literal_triples),
        digital=sub("digital", digital_triples),
        structure=sub("structure", ()),
    )


def entity_names(name_subgraph: Subgraph) -> dict[int, str]:
    """Entity id to name string, from the name subgraph's triples.

    When an entity carries several name triples the first under
    (attribute id, value id) order wins; entities without one are absent.
    """
    names: dict[int, str] = {}
    best: dict[int, tuple[int, int]] = {}
    for e, a, v in name_subgraph.attribute_triples:
        key = (a, v)
        if e not in best or key < best[e]:
            best[e] = key
            names[e] = name_subgraph.value_labels[v]
    return names
