"""Complex-network statistics of a knowledge graph.

Density follows the directed formula ``|E| / (|V| (|V| - 1))`` over stored
edges. Clustering and diameter are computed on the undirected simple
projection: direction and relation type are dropped, parallel edges collapse
and self-loops are ignored.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import InvalidInputError, NotFoundError, UndefinedMetricError

NETWORK_COLUMNS = ("Name", "# Nodes", "# Edges", "Average clustering coefficient", "Diameter")


def density(n_nodes: int, n_edges: int) -> float:
    if n_nodes < 2:
        raise InvalidInputError("density needs at least two nodes")
    return n_edges / (n_nodes * (n_nodes - 1))


def undirected_projection(graph) -> list[set[int]]:
    """Neighbour sets of the undirected simple graph underlying ``graph``.

    Accepts a :class:`~kgforge.store.KnowledgeGraph` or an already built
    list of neighbour sets (returned unchanged).
    """
    if isinstance(graph, list):
        return graph
    nbrs: list[set[int]] = [set() for _ in range(graph.n_entities)]
    for e in graph.edges:
        if e.head != e.tail:
            nbrs[e.head].add(e.tail)
            nbrs[e.tail].add(e.head)
    return nbrs


def local_clustering(graph, node: int) -> float:
    nbrs = undirected_projection(graph)
    if not 0 <= node < len(nbrs):
        raise NotFoundError(f"unknown node {node}")
    return _local_clustering(nbrs, node)


def _links_and_pairs(nbrs: Sequence[set[int]], node: int) -> tuple[int, int]:
    mine = nbrs[node]
    deg = len(mine)
    links = 0
    for u in mine:
        # count each neighbour pair once
        links += sum(1 for w in nbrs[u] if w in mine and w > u)
    return links, deg * (deg - 1) // 2


def _local_clustering(nbrs: Sequence[set[int]], node: int) -> float:
    links, pairs = _links_and_pairs(nbrs, node)
    return links / pairs if pairs else 0.0


def average_clustering(graph) -> float:
    """Mean local clustering over all nodes; nodes of degree < 2 contribute 0.

    The mean is accumulated exactly as a rational and rounded once, so
    results such as 5/6 come out as the nearest float rather than drifting
    by an ulp with summation order.
    """
    nbrs = undirected_projection(graph)
    if not nbrs:
        raise InvalidInputError("average clustering of an empty graph")
    by_denominator: dict[int, int] = defaultdict(int)
    for v in range(len(nbrs)):
        links, pairs = _links_and_pairs(nbrs, v)
        if pairs:
            by_denominator[pairs] += links
    total = sum((Fraction(num, den) for den, num in by_denominator.items()), Fraction(0))
    return float(total / len(nbrs))


def connected_components(graph) -> list[list[int]]:
    nbrs = undirected_projection(graph)
    seen = [False] * len(nbrs)
    comps = []
    for s in range(len(nbrs)):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for w in nbrs[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def largest_component(graph) -> list[int]:
    comps = connected_components(graph)
    if not comps:
        return []
    # ties broken by smallest member id, which is the discovery order
    return max(comps, key=len)


def _csr(nbrs: Sequence[set[int]]) -> sparse.csr_matrix:
    n = len(nbrs)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(ns) for ns in nbrs])
    indices = np.fromiter((w for ns in nbrs for w in sorted(ns)), dtype=np.int32, count=int(indptr[-1]))
    return sparse.csr_matrix((np.ones(len(indices), dtype=np.int8), indices, indptr), shape=(n, n))


def _max_eccentricity(adj: sparse.csr_matrix, sources: np.ndarray) -> int:
    dist = csgraph.shortest_path(adj, method="D", directed=False, unweighted=True, indices=sources)
    finite = dist[np.isfinite(dist)]
    return int(finite.max()) if finite.size else 0


def diameter(graph, threads: int = 1, chunk: int = 256) -> int:
    """Exact diameter of the largest connected component, from all-sources unweighted shortest paths."""
    nbrs = undirected_projection(graph)
    lcc = largest_component(nbrs)
    if len(lcc) < 2:
        raise UndefinedMetricError("diameter needs a connected component of at least two nodes")
    adj = _csr(nbrs)
    sources = np.asarray(lcc, dtype=np.int32)
    chunks = [sources[i : i + chunk] for i in range(0, len(sources), chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            eccs = list(pool.map(lambda c: _max_eccentricity(adj, c), chunks))
    else:
        eccs = [_max_eccentricity(adj, c) for c in chunks]
    return max(eccs)


@dataclass
class NetworkReport:
    name: str
    n_nodes: int
    n_edges: int
    density: float | None
    avg_clustering: float
    diameter: int | None
    lcc_size: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table_row(self) -> tuple:
        diam = "" if self.diameter is None else str(self.diameter)
        return (self.name, str(self.n_nodes), str(self.n_edges), f"{self.avg_clustering:.6f}", diam)


def network_report(graph, name: str = "graph", threads: int = 1) -> NetworkReport:
    """All network statistics of ``graph``; diameter is ``None`` when the LCC is trivial."""
    nbrs = undirected_projection(graph)
    n = len(nbrs)
    if n == 0:
        raise InvalidInputError("network report of an empty graph")
    n_edges = graph.n_edges if not isinstance(graph, list) else sum(map(len, nbrs)) // 2
    lcc = largest_component(nbrs)
    diam = diameter(nbrs, threads) if len(lcc) >= 2 else None
    return NetworkReport(
        name=name,
        n_nodes=n,
        n_edges=n_edges,
        density=density(n, n_edges) if n >= 2 else None,
        avg_clustering=average_clustering(nbrs),
        diameter=diam,
        lcc_size=len(lcc),
    )


def format_network_table(reports: Sequence[NetworkReport]) -> str:
    lines = ["\t".join(NETWORK_COLUMNS)]
    lines.extend("\t".join(r.table_row()) for r in reports)
    return "\n".join(lines) + "\n"


def format_edge_list(graph) -> str:
    """Undirected ``u<TAB>v`` edge list (labels when available) for external network tools."""
    nbrs = undirected_projection(graph)
    labels = [e.label for e in graph.entities] if not isinstance(graph, list) else None
    out = []
    for u, ns in enumerate(nbrs):
        for v in sorted(ns):
            if u < v:
                out.append(f"{labels[u]}\t{labels[v]}" if labels else f"{u}\t{v}")
    return "\n".join(out) + ("\n" if out else "")
