"""Knowledge graph data model, TSV ingestion and adjacency queries.

A graph is a 6-tuple: entities, relations, attributes, values, relation
triples (head, relation, tail) and attribute triples (entity, attribute,
value).  Ids in each space are dense integers assigned in first-appearance
order during parsing, so loading the same files always yields the same ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import GraphLookupError, ParseError


class _Interner:
    """Assigns dense ids to strings in first-appearance order."""

    def __init__(self):
        self.index: dict[str, int] = {}
        self.labels: list[str] = []

    def intern(self, label: str) -> int:
        idx = self.index.get(label)
        if idx is None:
            idx = len(self.labels)
            self.index[label] = idx
            self.labels.append(label)
        return idx


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable knowledge graph; safe to share across concurrent readers."""

    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    attribute_labels: tuple[str, ...]
    value_labels: tuple[str, ...]
    relation_triples: tuple[tuple[int, int, int], ...]
    attribute_triples: tuple[tuple[int, int, int], ...]
    entity_index: dict[str, int] = field(repr=False)
    adjacency: tuple[frozenset[int], ...] = field(repr=False)

    @property
    def n_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_labels)

    @property
    def n_values(self) -> int:
        return len(self.value_labels)

    @property
    def entities(self) -> range:
        return range(self.n_entities)

    def entity_id(self, label: str) -> int:
        idx = self.entity_index.get(label)
        if idx is None:
            raise GraphLookupError(f"unknown entity label {label!r}")
        return idx


def _make_kg(ents, rels, attrs, vals, rel_triples, attr_triples) -> KnowledgeGraph:
    adjacency = _build_adjacency(len(ents.labels), rel_triples)
    return KnowledgeGraph(
        entity_labels=tuple(ents.labels),
        relation_labels=tuple(rels.labels),
        attribute_labels=tuple(attrs.labels),
        value_labels=tuple(vals.labels),
        relation_triples=tuple(rel_triples),
        attribute_triples=tuple(attr_triples),
        entity_index=dict(ents.index),
        adjacency=adjacency,
    )


def _build_adjacency(n_entities, rel_triples) -> tuple[frozenset[int], ...]:
    # e becomes its own neighbor only through an explicit self-loop triple
    nbrs: list[set[int]] = [set() for _ in range(n_entities)]
    for h, _, t in rel_triples:
        nbrs[h].add(t)
        nbrs[t].add(h)
    return tuple(frozenset(s) for s in nbrs)


def _iter_triple_lines(path):
    """Yields (line_no, fields) for each data line; skips comments and blanks."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            yield line_no, line.split("\t")


def kg_from_triples(rel_label_triples, attr_label_triples) -> KnowledgeGraph:
    """Build a graph from label triples, interning ids in appearance order.

    Duplicate triples are collapsed, keeping first-appearance order.
    """
    ents, rels, attrs, vals = _Interner(), _Interner(), _Interner(), _Interner()
    rel_triples: list[tuple[int, int, int]] = []
    attr_triples: list[tuple[int, int, int]] = []

    seen_rel: set[tuple[int, int, int]] = set()
    for head, rel, tail in rel_label_triples:
        triple = (ents.intern(head), rels.intern(rel), ents.intern(tail))
        if triple not in seen_rel:
            seen_rel.add(triple)
            rel_triples.append(triple)

    seen_attr: set[tuple[int, int, int]] = set()
    for ent, attr, val in attr_label_triples:
        triple = (ents.intern(ent), attrs.intern(attr), vals.intern(val))
        if triple not in seen_attr:
            seen_attr.add(triple)
            attr_triples.append(triple)

    return _make_kg(ents, rels, attrs, vals, rel_triples, attr_triples)


def load_kg(relation_triples_path, attribute_triples_path) -> KnowledgeGraph:
    """Load a knowledge graph from two TSV files.

    Each line of the relation file is ``head<TAB>relation<TAB>tail`` and each
    line of the attribute file is ``entity<TAB>attribute<TAB>value``; the
    value field may contain spaces but not tabs.  Duplicate triples are
    collapsed, keeping first-appearance order.  Lines starting with ``#`` are
    comments.
    """
    rel_label_triples = []
    for line_no, fields in _iter_triple_lines(relation_triples_path):
        if len(fields) != 3:
            raise ParseError(relation_triples_path, line_no,
                             f"expected 3 tab-separated fields, got {len(fields)}")
        head, rel, tail = fields
        if not head or not rel or not tail:
            raise ParseError(relation_triples_path, line_no, "empty field in relation triple")
        rel_label_triples.append((head, rel, tail))

    attr_label_triples = []
    for line_no, fields in _iter_triple_lines(attribute_triples_path):
        if len(fields) != 3:
            raise ParseError(attribute_triples_path, line_no,
                             f"expected 3 tab-separated fields, got {len(fields)}")
        ent, attr, val = fields
        if not ent or not attr:
            raise ParseError(attribute_triples_path, line_no,
                             "empty entity or attribute field")
        attr_label_triples.append((ent, attr, val))

    return kg_from_triples(rel_label_triples, attr_label_triples)


def write_kg(kg: KnowledgeGraph, relation_triples_path, attribute_triples_path) -> None:
    """Write a graph back to the TSV formats `load_kg` reads."""
    with open(relation_triples_path, "w", encoding="utf-8") as fh:
        for h, r, t in kg.relation_triples:
            fh.write(f"{kg.entity_labels[h]}\t{kg.relation_labels[r]}\t{kg.entity_labels[t]}\n")
    with open(attribute_triples_path, "w", encoding="utf-8") as fh:
        for e, a, v in kg.attribute_triples:
            fh.write(f"{kg.entity_labels[e]}\t{kg.attribute_labels[a]}\t{kg.value_labels[v]}\n")


def neighbors(kg: KnowledgeGraph, e: int) -> set[int]:
    """Entities connected to `e` by a relation triple in either direction."""
    if not 0 <= e < kg.n_entities:
        raise GraphLookupError(f"unknown entity id {e}")
    return set(kg.adjacency[e])


@dataclass(frozen=True)
class AlignmentSet:
    """Gold or seed entity pairs (KG1 id, KG2 id); 1-to-1 on both sides."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        left = [p[0] for p in self.pairs]
        right = [p[1] for p in self.pairs]
        if len(set(left)) != len(left):
            dup = _first_duplicate(left)
            raise ParseError("<pairs>", 0, f"KG1 entity {dup} appears in more than one pair")
        if len(set(right)) != len(right):
            dup = _first_duplicate(right)
            raise ParseError("<pairs>", 0, f"KG2 entity {dup} appears in more than one pair")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def left(self) -> tuple[int, ...]:
        return tuple(p[0] for p in self.pairs)

    @property
    def right(self) -> tuple[int, ...]:
        return tuple(p[1] for p in self.pairs)


def _first_duplicate(items):
    seen = set()
    for x in items:
        if x in seen:
            return x
        seen.add(x)
    return None


def load_alignment(path, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> AlignmentSet:
    """Load gold pairs from a file of ``entity1<TAB>entity2`` lines.

    Entities are resolved by surface label; pair order is preserved.
    """
    pairs: list[tuple[int, int]] = []
    seen_left: set[int] = set()
    seen_right: set[int] = set()
    for line_no, fields in _iter_triple_lines(path):
        if len(fields) != 2:
            raise ParseError(path, line_no, f"expected 2 tab-separated fields, got {len(fields)}")
        label1, label2 = fields
        try:
            e1 = kg1.entity_id(label1)
        except GraphLookupError:
            raise ParseError(path, line_no, f"entity {label1!r} not found in KG1") from None
        try:
            e2 = kg2.entity_id(label2)
        except GraphLookupError:
            raise ParseError(path, line_no, f"entity {label2!r} not found in KG2") from None
        if e1 in seen_left:
            raise ParseError(path, line_no, f"KG1 entity {label1!r} appears in more than one pair")
        if e2 in seen_right:
            raise ParseError(path, line_no, f"KG2 entity {label2!r} appears in more than one pair")
        seen_left.add(e1)
        seen_right.add(e2)
        pairs.append((e1, e2))
    return AlignmentSet(pairs=tuple(pairs))


def write_alignment(path, pairs: AlignmentSet, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e1, e2 in pairs:
            fh.write(f"{kg1.entity_labels[e1]}\t{kg2.entity_labels[e2]}\n")
