"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a single ``PASS``/``FAIL`` line; the lines are printed
together at the end of the pytest run (see ``conftest.py``).
"""

import random
import time
from pathlib import Path

import numpy as np

from helpers import (
    GOLDEN,
    brute_force_rank,
    complete_graph,
    floyd_warshall_diameter,
    graph_from_pairs,
    k4_minus_edge,
    label_state,
    path_graph,
    random_case,
    random_pairs,
    random_setup,
    reference_expand,
    ring_triples,
)
from kgforge.analytics import average_clustering, density, diameter
from kgforge.cli import main
from kgforge.embeddings import (
    KINDS,
    TrainConfig,
    gradient_check,
    init_model,
    save_checkpoint,
    score,
    score_triples,
    train,
)
from kgforge.evaluation import (
    HEAD,
    RANKING_COLUMNS,
    TAIL,
    FilterIndex,
    RankingMetrics,
    evaluate_link_prediction,
    f1,
    filtered_rank,
)
from kgforge.expansion import (
    ExpansionConfig,
    bayesian_link_probability,
    conflict_rate,
    edge_growth,
    expand,
    vertex_growth,
)
from kgforge.extraction import CandidateTriple
from kgforge.store import KnowledgeGraph, save_triples_tsv

RESULTS: list[str] = []


def record(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_01_growth_arithmetic():
    with Timer() as tm:
        vg = vertex_growth(3426, 4150)
        eg = edge_growth(5526, 7290)
        d0, d1 = density(3426, 5526), density(4150, 7290)
        fa, fb = f1(0.80, 0.81), f1(0.75, 0.70)
    checks = {
        "vertex growth 21.13": abs(vg - 21.13) <= 0.01,
        "edge growth 31.92": abs(eg - 31.92) <= 0.01,
        "density 0.000471": round(d0, 6) == 0.000471 and round(d0, 5) == 0.00047,
        "density 0.000423": round(d1, 6) == 0.000423 and round(d1, 5) == 0.00042,
        "F1 0.805": abs(fa - 0.805) <= 0.0005,
        "F1 0.72": round(fb, 2) == 0.72,
        "runtime < 1 s": tm.seconds < 1,
    }
    detail = (f"growth {vg:.4f}% / {eg:.4f}%, density {d0:.6f} / {d1:.6f}, F1 {fa:.4f} / {fb:.4f}, "
              f"{tm.seconds:.3f}s")
    bad = [k for k, v in checks.items() if not v]
    record(1, "growth, density and F1 arithmetic", not bad, detail + (f"; failed {bad}" if bad else ""))


def test_criterion_02_expansion_oracle():
    rnd = random.Random(20240)
    taus = [0.0, 0.3, 0.7, 1.0]
    failures = []
    with Timer() as tm:
        for i in range(200):
            g, batch = random_case(rnd, max_nodes=20, max_batch=50)
            tau = taus[i % 4]
            V0, E0 = label_state(g)
            v0, e0 = g.n_entities, g.n_edges
            rep = expand(g, batch, ExpansionConfig(tau=tau))
            if label_state(g) != reference_expand(V0, E0, batch, tau):
                failures.append((i, "oracle"))
            allowed = set(E0) | {
                tuple(" ".join(x.lower().split()) for x in (c.head_label, c.relation_label, c.tail_label))
                for c in batch if c.confidence >= tau
            }
            if not set(label_state(g)[1]) <= allowed:
                failures.append((i, "edge below tau"))
            if g.n_entities < v0 or g.n_edges < e0 or rep.v_after < rep.v_before:
                failures.append((i, "monotone"))
            state = label_state(g)
            again = expand(g, batch, ExpansionConfig(tau=tau))
            if again.accepted_edges or again.new_entities or label_state(g) != state:
                failures.append((i, "second run"))
    ok = not failures and tm.seconds < 10
    record(2, "expansion oracle equivalence", ok,
           f"200 cases, {len(failures)} mismatches {failures[:3]}, {tm.seconds:.2f}s")


def test_criterion_03_bayesian_transform():
    with Timer() as tm:
        grid = np.linspace(0.0, 1.0, 1001)
        vals = np.array([bayesian_link_probability(float(p)) for p in grid])
        at0, at1 = bayesian_link_probability(0.0), bayesian_link_probability(1.0)
    ok = at0 == 0.0 and at1 == 0.5 and bool(np.all(np.diff(vals) > 0)) and tm.seconds < 1
    record(3, "Bayesian transform", ok,
           f"f(0)={at0}, f(1)={at1}, strictly increasing on 1001 points: {bool(np.all(np.diff(vals) > 0))}, "
           f"{tm.seconds:.3f}s")


def test_criterion_04_filtered_ranking_oracle():
    mismatches, checked = 0, 0
    with Timer() as tm:
        for seed in range(50):
            model, triples, n_e = random_setup(seed)
            known = FilterIndex(triples)
            fn = lambda h, r, t: score(model, h, r, t)  # noqa: E731
            for trip in triples:
                for side in (HEAD, TAIL):
                    checked += 1
                    if filtered_rank(model, trip, side, known) != brute_force_rank(fn, n_e, trip, side, known):
                        mismatches += 1
        m = RankingMetrics.from_ranks([1, 2, 4])
    want = {"MR": 7 / 3, "MRR": (1 + 0.5 + 0.25) / 3, "P@1": 1 / 3, "P@3": 2 / 3, "P@10": 1.0}
    assert abs(want["MR"] - 2.333) < 1e-3 and abs(want["MRR"] - 0.5833) < 1e-4
    got = dict(zip(RANKING_COLUMNS, m.row()))
    metric_ok = all(abs(got[k] - want[k]) <= 1e-4 for k in want)
    ok = mismatches == 0 and metric_ok and tm.seconds < 10
    record(4, "filtered-ranking oracle", ok,
           f"{checked} queries over 50 models, {mismatches} mismatches; ranks [1,2,4] -> "
           + ", ".join(f"{k} {v:.4f}" for k, v in got.items()) + f"; {tm.seconds:.2f}s")


def test_criterion_05_embedding_learnability():
    with Timer() as tm:
        trip = ring_triples(50)
        model = init_model("TransE", 16, 50, 1, seed=0, norm="L1")
        cfg = TrainConfig(epochs=200, batch_size=5, learning_rate=1.0, margin=0.5,
                          negatives_per_positive=50, seed=0)
        trained = train(model, trip, cfg, threads=1).model
        metrics = evaluate_link_prediction(trained, trip, FilterIndex(trip))
    ok = metrics.mrr >= 0.8 and metrics.p_at[1] >= 0.6 and tm.seconds < 30
    record(5, "embedding learnability (ring, TransE dim 16)", ok,
           f"filtered MRR {metrics.mrr:.4f} (need >= 0.8), P@1 {metrics.p_at[1]:.4f} (need >= 0.6), "
           f"{tm.seconds:.2f}s")


def _all_triples(n_e, n_r):
    return np.array([(h, r, t) for h in range(n_e) for r in range(n_r) for t in range(n_e)])


def test_criterion_06_numerical_validity():
    errors = {}
    for kind in KINDS:
        for norm in ("L1", "L2"):
            for seed in range(3):
                errors[(kind, norm, seed)] = gradient_check(kind, dim=4, seed=seed, norm=norm)
    worst = max(errors.values())

    trip = _all_triples(12, 3)
    c = init_model("ComplEx", 8, 12, 3, seed=1)
    c.entity_vecs[:, 8:] = 0
    c.relation_vecs[:, 8:] = 0
    d = init_model("DistMult", 8, 12, 3)
    d.entity_vecs[:] = c.entity_vecs[:, :8]
    d.relation_vecs[:] = c.relation_vecs[:, :8]
    complex_gap = float(np.max(np.abs(score_triples(c, trip) - score_triples(d, trip))))

    rot = init_model("RotatE", 8, 12, 3, seed=2)
    rot.relation_vecs[:] = 0
    z = rot.entity_vecs[:, :8] + 1j * rot.entity_vecs[:, 8:]
    expect = -np.linalg.norm(z[trip[:, 0]] - z[trip[:, 2]], axis=1)
    rotate_gap = float(np.max(np.abs(score_triples(rot, trip) - expect)))

    te = init_model("TransE", 8, 12, 3, seed=3)
    before = score_triples(te, trip)
    te.entity_vecs += np.random.default_rng(4).normal(size=8) * 3
    shift_gap = float(np.max(np.abs(score_triples(te, trip) - before)))

    ok = worst <= 1e-4 and complex_gap <= 1e-9 and rotate_gap <= 1e-9 and shift_gap <= 1e-9
    record(6, "numerical validity", ok,
           f"max grad rel. error {worst:.2e} over 4 models x 2 norms x 3 seeds; ComplEx~DistMult {complex_gap:.1e}; "
           f"RotatE zero phase {rotate_gap:.1e}; TransE shift {shift_gap:.1e}")


def test_criterion_07_graph_analytics_oracles():
    problems = []
    with Timer() as tm:
        for n in range(2, 11):
            g = complete_graph(n)
            cc, dm = average_clustering(g), diameter(g)
            if cc != 1.0:
                problems.append(f"K_{n} clustering {cc}")
            if dm != 1:
                problems.append(f"K_{n} diameter {dm}")
        for n in range(2, 65):
            g = path_graph(n)
            if average_clustering(g) != 0.0 or diameter(g) != n - 1:
                problems.append(f"path_{n}")
        k4m = average_clustering(k4_minus_edge())
        if k4m != 5 / 6:
            problems.append(f"K4-minus-edge {k4m}")
        rng = np.random.default_rng(777)
        for i in range(100):
            n = int(rng.integers(2, 51))
            pairs = random_pairs(rng, n, float(rng.uniform(0.02, 0.3))) or [(0, 1)]
            if diameter(graph_from_pairs(n, pairs)) != floyd_warshall_diameter(n, pairs):
                problems.append(f"random graph {i}")
    ok = not problems and tm.seconds < 10
    record(7, "graph-analytics oracles", ok,
           (f"mismatches: {problems}" if problems else "all fixtures exact") + f", {tm.seconds:.2f}s")


def _conflict_fixture(n_new, n_conflicts):
    g = KnowledgeGraph()
    for i in range(n_conflicts):
        g.add_triple(f"site {i}", "increases", f"marker {i}")
    cands = [CandidateTriple(f"site {i}", "decreases", f"marker {i}", 0.9) for i in range(n_conflicts)]
    cands += [CandidateTriple(f"fresh {i}", "associated_with", f"target {i}", 0.9)
              for i in range(n_new - n_conflicts)]
    return expand(g, cands, ExpansionConfig(exclusivity_rules=[("increases", "decreases")]))


def test_criterion_08_conflict_rate_fixtures():
    with Timer() as tm:
        direct = (conflict_rate(1, 20), conflict_rate(3, 50))
        a, b = _conflict_fixture(20, 1), _conflict_fixture(50, 3)
    ok = (direct == (5.0, 6.0) and (a.accepted_edges, a.conflicts_detected, a.conflict_rate_pct) == (20, 1, 5.0)
          and (b.accepted_edges, b.conflicts_detected, b.conflict_rate_pct) == (50, 3, 6.0) and tm.seconds < 1)
    record(8, "conflict rate fixtures", ok,
           f"direct {direct[0]}% / {direct[1]}%, expanded fixtures {a.conflict_rate_pct}% "
           f"({a.conflicts_detected}/{a.accepted_edges}) / {b.conflict_rate_pct}% "
           f"({b.conflicts_detected}/{b.accepted_edges}), {tm.seconds:.3f}s")


def test_criterion_09_output_schemas(tmp_path):
    problems = []
    for name, graph in (("k3", complete_graph(3)), ("path10", path_graph(10))):
        src = tmp_path / f"{name}.tsv"
        save_triples_tsv(graph, src)
        out = tmp_path / name
        if main(["analyze", "--graph", str(src), "--edge-list", "--out-dir", str(out)]) != 0:
            problems.append(f"analyze {name} failed")
            continue
        for f in ("network.tsv", "network.json", "edges.tsv"):
            if (out / f).read_text() != (GOLDEN / f"{name}_{f}").read_text():
                problems.append(f"{name}/{f} differs from golden")
        header = (out / "network.tsv").read_text().splitlines()[0].split("\t")
        if header != ["Name", "# Nodes", "# Edges", "Average clustering coefficient", "Diameter"]:
            problems.append(f"network table header {header}")

    labels = [f"n{i}" for i in range(6)]
    model = init_model("TransE", 2, 6, 1, entity_labels=labels, relation_labels=["next"])
    model.entity_vecs[:] = [[i, 0] for i in range(6)]
    model.relation_vecs[:] = [[1, 0]]
    ckpt = tmp_path / "chain.ckpt"
    save_checkpoint(model, ckpt)
    split = tmp_path / "chain.tsv"
    split.write_text("".join(f"{labels[i]}\tnext\t{labels[i + 1]}\n" for i in range(5)))
    out = tmp_path / "eval"
    code = main(["evaluate", "--checkpoint", str(ckpt), "--train", str(split), "--test", str(split),
                 "--dataset", "chain", "--out-dir", str(out)])
    if code != 0:
        problems.append("evaluate failed")
    else:
        text = (out / "metrics.tsv").read_text()
        if text != (GOLDEN / "chain_metrics.tsv").read_text():
            problems.append("metrics.tsv differs from golden")
        if text.splitlines()[0].split("\t")[2:] != ["MR", "MRR", "P@1", "P@3", "P@10"]:
            problems.append("ranking column order")
    record(9, "ranking and network output schemas (golden files)", not problems,
           "; ".join(problems) if problems else "analyze K3, path-10 and evaluate chain match golden files")


def _pipeline(root: Path, monkeypatch):
    root.mkdir()
    monkeypatch.chdir(root)
    steps = [
        ["--seed", "11", "--threads", "1", "synthesize", "--n-entities", "40", "--n-candidates", "300",
         "--output", "cands.jsonl"],
        ["--seed", "11", "--threads", "1", "expand", "--candidates", "cands.jsonl", "--tau", "0.4",
         "--exclusive", "increases,decreases", "--out-dir", "expand"],
        ["--seed", "11", "--threads", "1", "train", "--triples", "expand/expanded.tsv", "--model", "ComplEx",
         "--dim", "8", "--epochs", "15", "--batch-size", "32", "--checkpoint", "model/complex.ckpt"],
        ["--seed", "11", "--threads", "1", "evaluate", "--checkpoint", "model/complex.ckpt",
         "--train", "expand/expanded.tsv", "--test", "expand/expanded.tsv", "--dataset", "synthetic",
         "--out-dir", "eval"],
        ["--seed", "11", "--threads", "1", "analyze", "--graph", "expand/expanded.tsv", "--edge-list",
         "--out-dir", "analyze"],
        ["--seed", "11", "report", "--inputs", "expand/expansion_report.json", "--inputs", "eval/metrics.json",
         "--inputs", "analyze/network.json", "--output", "report.json"],
    ]
    codes = [main(s) for s in steps]
    files = {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
    return codes, files


def test_criterion_10_end_to_end_determinism(tmp_path, monkeypatch):
    codes_a, files_a = _pipeline(tmp_path / "run_a", monkeypatch)
    codes_b, files_b = _pipeline(tmp_path / "run_b", monkeypatch)
    differing = sorted(k for k in files_a if files_a.get(k) != files_b.get(k))
    ok = codes_a == codes_b == [0] * 6 and files_a.keys() == files_b.keys() and not differing and len(files_a) >= 10
    record(10, "end-to-end determinism", ok,
           f"exit codes {codes_a}, {len(files_a)} output files, byte-identical: {not differing}"
           + (f" (differ: {differing})" if differing else ""))
