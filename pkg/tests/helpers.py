import itertools
from pathlib import Path

import numpy as np

from kgforge.embeddings import KINDS, init_model
from kgforge.extraction import CandidateTriple
from kgforge.store import KnowledgeGraph

GOLDEN = Path(__file__).parent / "golden"


def graph_from_pairs(n, pairs, relation="linked_to"):
    """Build a graph with nodes ``node 0..n-1`` and one edge per (u, v) pair."""
    g = KnowledgeGraph()
    for i in range(n):
        g.add_entity(f"node {i}")
    r = g.add_relation(relation)
    for u, v in pairs:
        g.add_edge(u, r, v)
    return g


def complete_graph(n):
    return graph_from_pairs(n, itertools.combinations(range(n), 2))


def path_graph(n):
    return graph_from_pairs(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n_leaves):
    return graph_from_pairs(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)])


def k4_minus_edge():
    # nodes a=0, b=1, c=2, d=3; edge (c, d) missing
    return graph_from_pairs(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])


def random_pairs(rng, n, p):
    return [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < p]


def ring_triples(n=50):
    return np.array([(i, 0, (i + 1) % n) for i in range(n)], dtype=np.int64)


def write_tsv(path, rows):
    path.write_text("".join("\t".join(map(str, r)) + "\n" for r in rows), encoding="utf-8")
    return path


# -- independent oracles ------------------------------------------------------


def reference_expand(vertices, edges, candidates, tau):
    """Line-by-line execution of the thresholded expansion loop over plain sets.

    ``vertices`` is a set of labels and ``edges`` a dict (h, r, t) -> confidence.
    Returns new copies. Self-loops are skipped, since the store never holds one.
    """
    V, E = set(vertices), dict(edges)
    for c in candidates:
        h, r, t = (" ".join(x.lower().split()) for x in (c.head_label, c.relation_label, c.tail_label))
        p = c.confidence
        if p >= tau:
            if h == t:
                continue
            if h not in V:
                V = V | {h}
            if t not in V:
                V = V | {t}
            if (h, r, t) not in E:
                E[(h, r, t)] = p
            else:
                E[(h, r, t)] = max(E[(h, r, t)], p)
    return V, E


def label_state(graph):
    ents, rels = graph.entities, graph.relations
    V = {e.label for e in ents}
    E = {(ents[e.head].label, rels[e.relation].name, ents[e.tail].label): e.confidence for e in graph.edges}
    return V, E


def floyd_warshall_diameter(n, undirected_pairs):
    """Diameter of the largest connected component via O(n^3) Floyd-Warshall."""
    INF = float("inf")
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for u, v in undirected_pairs:
        if u != v:
            d[u][v] = d[v][u] = 1
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik == INF:
                continue
            di = d[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    # components from reachability, largest first, smallest id on ties
    comps, seen = [], set()
    for i in range(n):
        if i not in seen:
            comp = [j for j in range(n) if d[i][j] < INF]
            seen.update(comp)
            comps.append(comp)
    lcc = max(comps, key=len)
    return max(d[i][j] for i in lcc for j in lcc)


def brute_force_rank(score_fn, n_entities, triple, side, known):
    """Filtered rank by enumerating every replacement entity one by one."""
    h, r, t = triple
    true_score = score_fn(h, r, t)
    better = ties = 0
    for x in range(n_entities):
        cand = (x, r, t) if side == "replace-head" else (h, r, x)
        if cand == (h, r, t) or cand in known:
            continue
        s = score_fn(*cand)
        if s > true_score:
            better += 1
        elif s == true_score:
            ties += 1
    return 1 + better + ties / 2


# -- random fixtures ------------------------------------------------------

RELS = ["increases", "decreases", "treated_by", "associated_with"]


def random_case(rnd, max_nodes=20, max_batch=50):
    n = rnd.randint(0, max_nodes)
    g = KnowledgeGraph()
    for i in range(n):
        g.add_entity(f"n{i}")
    for _ in range(rnd.randint(0, 2 * n)):
        u, v = rnd.randrange(n), rnd.randrange(n)
        if u != v:
            g.add_triple(f"n{u}", rnd.choice(RELS), f"n{v}", round(rnd.random(), 2))
    pool = max(n + 5, 2)
    batch = [
        CandidateTriple(f"n{rnd.randrange(pool)}", rnd.choice(RELS), f"n{rnd.randrange(pool)}", rnd.choice(
            [0.0, 0.3, 0.7, 1.0, round(rnd.random(), 3)]))
        for _ in range(rnd.randint(0, max_batch))
    ]
    return g, batch


def random_setup(seed):
    rng = np.random.default_rng(seed)
    n_e = int(rng.integers(2, 31))
    n_r = int(rng.integers(1, 4))
    kind = KINDS[seed % 4]
    model = init_model(kind, 3, n_e, n_r, seed=seed, norm=("L1", "L2")[seed % 2])
    if seed % 3 == 0:
        # coarse integer tables force exact score ties
        model.entity_vecs[:] = np.round(model.entity_vecs)
        if kind != "RotatE":
            model.relation_vecs[:] = np.round(model.relation_vecs)
    n_t = int(rng.integers(1, 3 * n_e))
    triples = {(int(rng.integers(n_e)), int(rng.integers(n_r)), int(rng.integers(n_e))) for _ in range(n_t)}
    return model, sorted(triples), n_e
