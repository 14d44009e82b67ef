"""Directed typed knowledge-graph store.

The graph keeps three tables (entities, relation types, edges) and three
indices over the edge table: per-entity outgoing and incoming edge-id lists
(kept sorted because edge ids only grow) and a hash index keyed on
``(head, relation, tail)``. Matrix views are derived on demand.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy import sparse

from .errors import InvalidInputError, NotFoundError, ParseError

ASSERTED = "asserted"
ACCEPTED = "accepted"
FLAGGED_CONFLICT = "flagged-conflict"
EDGE_STATUSES = (ASSERTED, ACCEPTED, FLAGGED_CONFLICT)

DEFAULT_ENTITY_TYPE = "entity"
DEFAULT_DENSE_LIMIT = 10_000

_WS = re.compile(r"\s+")


def normalize_label(label: str) -> str:
    """Lowercase, trim and collapse internal whitespace."""
    return _WS.sub(" ", label).strip().lower()


@dataclass(frozen=True)
class Entity:
    id: int
    label: str
    entity_type: str


@dataclass(frozen=True)
class RelationType:
    id: int
    name: str
    exclusivity_class: str | None = None


@dataclass
class Edge:
    id: int
    head: int
    relation: int
    tail: int
    confidence: float
    provenance: str
    status: str = ASSERTED


class KnowledgeGraph:
    """Directed typed multigraph with sparse adjacency indices.

    Mutations are expected from one writer at a time; callers that mutate
    from several threads should hold :attr:`lock`.
    """

    def __init__(self, allow_self_loops: bool = False, dense_limit: int = DEFAULT_DENSE_LIMIT):
        self.allow_self_loops = allow_self_loops
        self.dense_limit = dense_limit
        self.lock = threading.RLock()
        self.entities: list[Entity] = []
        self.relations: list[RelationType] = []
        self.edges: list[Edge] = []
        self.out_index: list[list[int]] = []
        self.in_index: list[list[int]] = []
        self.triple_index: dict[tuple[int, int, int], int] = {}
        self._entity_by_label: dict[str, int] = {}
        self._relation_by_name: dict[str, int] = {}

    # -- sizes -------------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def counts(self) -> tuple[int, int, int, int]:
        """Return ``(|V|, |E|, #entity types, #relation types)``."""
        types = {e.entity_type for e in self.entities}
        return self.n_entities, self.n_edges, len(types), self.n_relations

    # -- entities and relations --------------------------------------------

    def add_entity(self, label: str, entity_type: str = DEFAULT_ENTITY_TYPE) -> int:
        """Insert an entity, or return the id of the one with the same normalized label."""
        norm = normalize_label(label)
        if not norm:
            raise InvalidInputError(f"entity label {label!r} is empty after normalization")
        existing = self._entity_by_label.get(norm)
        if existing is not None:
            return existing
        eid = len(self.entities)
        self.entities.append(Entity(eid, norm, entity_type.strip() or DEFAULT_ENTITY_TYPE))
        self.out_index.append([])
        self.in_index.append([])
        self._entity_by_label[norm] = eid
        return eid

    def entity_id(self, label: str) -> int | None:
        return self._entity_by_label.get(normalize_label(label))

    def add_relation(self, name: str, exclusivity_class: str | None = None) -> int:
        norm = normalize_label(name)
        if not norm:
            raise InvalidInputError(f"relation name {name!r} is empty after normalization")
        existing = self._relation_by_name.get(norm)
        if existing is not None:
            return existing
        rid = len(self.relations)
        self.relations.append(RelationType(rid, norm, exclusivity_class))
        self._relation_by_name[norm] = rid
        return rid

    def relation_id(self, name: str) -> int | None:
        return self._relation_by_name.get(normalize_label(name))

    # -- edges -------------------------------------------------------------

    def add_edge(
        self,
        head: int,
        relation: int,
        tail: int,
        confidence: float = 1.0,
        provenance: str = "",
        status: str = ASSERTED,
    ) -> int:
        """Insert an edge, merging duplicates by keeping the larger confidence."""
        for eid in (head, tail):
            if not 0 <= eid < len(self.entities):
                raise NotFoundError(f"unknown entity id {eid}")
        if not 0 <= relation < len(self.relations):
            raise NotFoundError(f"unknown relation id {relation}")
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise InvalidInputError(f"confidence {confidence} outside [0, 1]")
        if head == tail and not self.allow_self_loops:
            raise InvalidInputError(f"self-loop on entity {head} rejected")
        if status not in EDGE_STATUSES:
            raise InvalidInputError(f"unknown edge status {status!r}")

        key = (head, relation, tail)
        existing = self.triple_index.get(key)
        if existing is not None:
            edge = self.edges[existing]
            if confidence > edge.confidence:
                edge.confidence = confidence
            return existing
        edge_id = len(self.edges)
        self.edges.append(Edge(edge_id, head, relation, tail, confidence, provenance, status))
        self.out_index[head].append(edge_id)
        self.in_index[tail].append(edge_id)
        self.triple_index[key] = edge_id
        return edge_id

    def add_triple(
        self,
        head: str,
        relation: str,
        tail: str,
        confidence: float = 1.0,
        provenance: str = "",
    ) -> int:
        """Label-level convenience wrapper around the id-level inserts."""
        h = self.add_entity(head)
        t = self.add_entity(tail)
        r = self.add_relation(relation)
        return self.add_edge(h, r, t, confidence, provenance)

    def has_edge(self, head: int, relation: int, tail: int) -> bool:
        return (head, relation, tail) in self.triple_index

    def get_edge(self, head: int, relation: int, tail: int) -> Edge | None:
        idx = self.triple_index.get((head, relation, tail))
        return None if idx is None else self.edges[idx]

    def out_edges(self, entity: int) -> Iterator[Edge]:
        return (self.edges[i] for i in self.out_index[entity])

    def in_edges(self, entity: int) -> Iterator[Edge]:
        return (self.edges[i] for i in self.in_index[entity])

    def triples(self) -> list[tuple[int, int, int]]:
        return [(e.head, e.relation, e.tail) for e in self.edges]

    def labelled_triples(self) -> set[tuple[str, str, str]]:
        ents, rels = self.entities, self.relations
        return {(ents[e.head].label, rels[e.relation].name, ents[e.tail].label) for e in self.edges}

    def triple_array(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 3), dtype=np.int64)
        return np.array(self.triples(), dtype=np.int64)

    # -- matrix views ------------------------------------------------------

    def adjacency_view(self) -> sparse.csr_matrix:
        """Relation-agnostic binary adjacency ``A[i, j] = 1`` iff some edge i->j exists."""
        n = self.n_entities
        pairs = {(e.head, e.tail) for e in self.edges}
        if not pairs:
            return sparse.csr_matrix((n, n), dtype=np.int8)
        rows, cols = zip(*sorted(pairs))
        data = np.ones(len(rows), dtype=np.int8)
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def confidence_view(self) -> sparse.csr_matrix:
        """Confidence-weighted matrix: per ordered pair, the max confidence over relations."""
        n = self.n_entities
        best: dict[tuple[int, int], float] = {}
        for e in self.edges:
            key = (e.head, e.tail)
            if e.confidence > best.get(key, -1.0):
                best[key] = e.confidence
        if not best:
            return sparse.csr_matrix((n, n), dtype=np.float64)
        keys = sorted(best)
        rows, cols = zip(*keys)
        data = np.array([best[k] for k in keys], dtype=np.float64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def dense_adjacency(self) -> np.ndarray:
        """Dense ``|V| x |V|`` boolean view; refused above ``dense_limit`` nodes."""
        if self.n_entities > self.dense_limit:
            raise InvalidInputError(
                f"dense view of {self.n_entities} nodes exceeds limit {self.dense_limit}"
            )
        return self.adjacency_view().toarray().astype(bool)

    # -- consistency -------------------------------------------------------

    def audit(self) -> list[str]:
        """Check every index against the edge table; return a list of problems (empty if sound)."""
        problems: list[str] = []
        if len(self.triple_index) != len(self.edges):
            problems.append(f"triple_index has {len(self.triple_index)} keys for {len(self.edges)} edges")
        if len(self.out_index) != len(self.entities) or len(self.in_index) != len(self.entities):
            problems.append("adjacency index length differs from entity table")
            return problems
        for i, ent in enumerate(self.entities):
            if ent.id != i:
                problems.append(f"entity at position {i} has id {ent.id}")
        out_seen = [set(lst) for lst in self.out_index]
        in_seen = [set(lst) for lst in self.in_index]
        for i, e in enumerate(self.edges):
            if e.id != i:
                problems.append(f"edge at position {i} has id {e.id}")
            if self.triple_index.get((e.head, e.relation, e.tail)) != i:
                problems.append(f"edge {i} missing from triple_index")
            if i not in out_seen[e.head]:
                problems.append(f"edge {i} missing from out_index[{e.head}]")
            if i not in in_seen[e.tail]:
                problems.append(f"edge {i} missing from in_index[{e.tail}]")
        n_out = sum(len(lst) for lst in self.out_index)
        n_in = sum(len(lst) for lst in self.in_index)
        if n_out != len(self.edges) or n_in != len(self.edges):
            problems.append("per-entity edge lists hold stray entries")
        for lst in self.out_index + self.in_index:
            if lst != sorted(lst):
                problems.append("per-entity edge list out of order")
                break
        return problems

    def copy(self) -> "KnowledgeGraph":
        g = KnowledgeGraph(self.allow_self_loops, self.dense_limit)
        for ent in self.entities:
            g.add_entity(ent.label, ent.entity_type)
        for rel in self.relations:
            g.add_relation(rel.name, rel.exclusivity_class)
        for e in self.edges:
            g.add_edge(e.head, e.relation, e.tail, e.confidence, e.provenance, e.status)
        return g


# -- TSV triple files ------------------------------------------------------


def parse_triples_tsv(lines: Iterable[str], graph: KnowledgeGraph | None = None) -> KnowledgeGraph:
    """Parse ``head<TAB>relation<TAB>tail[<TAB>confidence]`` lines into a graph."""
    graph = KnowledgeGraph() if graph is None else graph
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise ParseError(f"expected 3 or 4 tab-separated columns, got {len(cols)}", line_no)
        confidence = 1.0
        if len(cols) == 4:
            try:
                confidence = float(cols[3])
            except ValueError:
                raise ParseError(f"confidence {cols[3]!r} is not a number", line_no) from None
            if not 0.0 <= confidence <= 1.0:
                raise ParseError(f"confidence {confidence} outside [0, 1]", line_no)
        try:
            graph.add_triple(cols[0], cols[1], cols[2], confidence)
        except InvalidInputError as exc:
            raise ParseError(str(exc), line_no) from None
    return graph


def load_triples_tsv(path: str | os.PathLike, allow_self_loops: bool = False) -> KnowledgeGraph:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_triples_tsv(fh, KnowledgeGraph(allow_self_loops=allow_self_loops))


def format_triples_tsv(graph: KnowledgeGraph) -> str:
    ents, rels = graph.entities, graph.relations
    return "".join(
        f"{ents[e.head].label}\t{rels[e.relation].name}\t{ents[e.tail].label}\t{e.confidence!r}\n"
        for e in graph.edges
    )


def save_triples_tsv(graph: KnowledgeGraph, path: str | os.PathLike) -> None:
    Path(path).write_text(format_triples_tsv(graph), encoding="utf-8", newline="\n")
