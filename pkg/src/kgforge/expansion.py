"""Threshold-gated integration of candidate triples into a knowledge graph.

Candidates are visited in batch order. A candidate whose confidence is
below ``tau`` is dropped without touching the graph; otherwise its entities
are resolved (created if new) and its edge inserted with max-confidence
merge. Conflicts against declared mutually exclusive relation pairs are
either rejected or inserted with status ``flagged-conflict``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .analytics import density
from .errors import InvalidInputError, UndefinedMetricError
from .extraction import CandidateTriple, ExtractionBatch
from .store import ACCEPTED, FLAGGED_CONFLICT, Edge, KnowledgeGraph, normalize_label

DEFAULT_TAU = 0.7
CONFLICT_POLICIES = ("reject", "flag")


def _rule_set(rules: Iterable[Iterable[str]]) -> frozenset[frozenset[str]]:
    out = set()
    for pair in rules:
        names = frozenset(normalize_label(n) for n in pair)
        if len(names) != 2:
            raise InvalidInputError(f"exclusivity rule {tuple(pair)!r} must name two distinct relations")
        out.add(names)
    return frozenset(out)


@dataclass(frozen=True)
class ExpansionConfig:
    tau: float = DEFAULT_TAU
    conflict_policy: str = "flag"
    exclusivity_rules: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidInputError(f"tau {self.tau} outside [0, 1]")
        if self.conflict_policy not in CONFLICT_POLICIES:
            raise InvalidInputError(f"conflict_policy must be one of {CONFLICT_POLICIES}")
        object.__setattr__(self, "exclusivity_rules", _rule_set(self.exclusivity_rules))


@dataclass
class ExpansionReport:
    total_candidates: int = 0
    accepted_edges: int = 0
    merged_duplicates: int = 0
    rejected_below_tau: int = 0
    rejected_invalid: int = 0
    conflicts_detected: int = 0
    conflicts_rejected: int = 0
    new_entities: int = 0
    v_before: int = 0
    v_after: int = 0
    e_before: int = 0
    e_after: int = 0
    vertex_growth_pct: float | None = 0.0
    edge_growth_pct: float | None = 0.0
    density_before: float | None = None
    density_after: float | None = None
    conflict_rate_pct: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                value = "undefined"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


# -- scalar metrics ----------------------------------------------------------


def conflict_rate(conflicts: int, new_edges: int) -> float:
    """Conflicting share of newly added edges, in percent; zero when nothing was added."""
    if new_edges < 0 or conflicts < 0:
        raise InvalidInputError("counts must be non-negative")
    if new_edges == 0:
        return 0.0
    return conflicts / new_edges * 100.0


def _growth(before: int, after: int) -> float:
    if before <= 0:
        raise UndefinedMetricError("growth is undefined for an empty starting set")
    return (after - before) / before * 100.0


def vertex_growth(v_before: int, v_after: int) -> float:
    return _growth(v_before, v_after)


def edge_growth(e_before: int, e_after: int) -> float:
    return _growth(e_before, e_after)


def bayesian_link_probability(p: float) -> float:
    """Map an extractor confidence to the link-existence probability ``p / (1 + p)``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"probability {p} outside [0, 1]")
    return p / (1.0 + p)


# -- conflict detection -------------------------------------------------------


def _exclusive(graph: KnowledgeGraph, r1: int, r2: int, rules: frozenset[frozenset[str]]) -> bool:
    if r1 == r2:
        return False
    a, b = graph.relations[r1], graph.relations[r2]
    if frozenset((a.name, b.name)) in rules:
        return True
    return a.exclusivity_class is not None and a.exclusivity_class == b.exclusivity_class


def detect_conflict(
    graph: KnowledgeGraph,
    candidate: CandidateTriple,
    exclusivity_rules: Iterable[Iterable[str]] = (),
) -> Edge | None:
    """First existing edge on the same ordered pair whose relation excludes the candidate's."""
    rules = exclusivity_rules if isinstance(exclusivity_rules, frozenset) else _rule_set(exclusivity_rules)
    h = graph.entity_id(candidate.head_label)
    t = graph.entity_id(candidate.tail_label)
    if h is None or t is None:
        return None
    rel_name = normalize_label(candidate.relation_label)
    r = graph.relation_id(rel_name)
    for edge in graph.out_edges(h):
        if edge.tail != t:
            continue
        if r is not None:
            if _exclusive(graph, r, edge.relation, rules):
                return edge
        elif frozenset((rel_name, graph.relations[edge.relation].name)) in rules:
            return edge
    return None


# -- the expansion loop ---------------------------------------------------------


def expand(
    graph: KnowledgeGraph,
    batch: ExtractionBatch | Iterable[CandidateTriple],
    config: ExpansionConfig | None = None,
) -> ExpansionReport:
    """Integrate ``batch`` into ``graph`` in place and report what changed."""
    config = config or ExpansionConfig()
    rules = config.exclusivity_rules
    with graph.lock:
        rep = ExpansionReport(v_before=graph.n_entities, e_before=graph.n_edges)
        for cand in batch:
            rep.total_candidates += 1
            if cand.confidence < config.tau:
                rep.rejected_below_tau += 1
                continue

            head_label = normalize_label(cand.head_label)
            tail_label = normalize_label(cand.tail_label)
            if head_label == tail_label and not graph.allow_self_loops:
                rep.rejected_invalid += 1
                continue

            h = graph.entity_id(head_label)
            t = graph.entity_id(tail_label)
            r = graph.relation_id(cand.relation_label)
            if h is not None and t is not None and r is not None and graph.has_edge(h, r, t):
                graph.add_edge(h, r, t, cand.confidence, cand.source_doc)
                rep.merged_duplicates += 1
                continue

            status = ACCEPTED
            if rules and detect_conflict(graph, cand, rules) is not None:
                rep.conflicts_detected += 1
                if config.conflict_policy == "reject":
                    rep.conflicts_rejected += 1
                    continue
                status = FLAGGED_CONFLICT

            n_before = graph.n_entities
            h = graph.add_entity(head_label, cand.head_type)
            t = graph.add_entity(tail_label, cand.tail_type)
            r = graph.add_relation(cand.relation_label)
            graph.add_edge(h, r, t, cand.confidence, cand.source_doc, status)
            rep.new_entities += graph.n_entities - n_before
            rep.accepted_edges += 1

        rep.v_after = graph.n_entities
        rep.e_after = graph.n_edges
    _fill_metrics(rep)
    return rep


def _fill_metrics(rep: ExpansionReport) -> None:
    rep.vertex_growth_pct = _safe_growth(rep.v_before, rep.v_after)
    rep.edge_growth_pct = _safe_growth(rep.e_before, rep.e_after)
    rep.density_before = density(rep.v_before, rep.e_before) if rep.v_before >= 2 else None
    rep.density_after = density(rep.v_after, rep.e_after) if rep.v_after >= 2 else None
    rep.conflict_rate_pct = conflict_rate(rep.conflicts_detected, rep.accepted_edges + rep.conflicts_rejected)


def _safe_growth(before: int, after: int) -> float | None:
    if before == 0:
        return 0.0 if after == 0 else None
    return _growth(before, after)
