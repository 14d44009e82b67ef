"""Filtered link-prediction ranking and scalar quality metrics."""

from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingModel, score_all_heads, score_all_tails
from .errors import InvalidInputError, UndefinedMetricError

HEAD, TAIL = "replace-head", "replace-tail"
SIDES = (HEAD, TAIL)
HITS_AT = (1, 3, 10)
RANKING_COLUMNS = ("MR", "MRR", "P@1", "P@3", "P@10")


class FilterIndex:
    """Known-true triples indexed by ``(h, r)`` and ``(r, t)`` for filtering."""

    def __init__(self, triples: Iterable[Sequence[int]] = ()):
        self.triples: set[tuple[int, int, int]] = set()
        self._tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        self._heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        for trip in triples:
            self.add(trip)

    def add(self, triple: Sequence[int]) -> None:
        h, r, t = (int(x) for x in triple)
        self.triples.add((h, r, t))
        self._tails[(h, r)].add(t)
        self._heads[(r, t)].add(h)

    def __contains__(self, triple) -> bool:
        return tuple(int(x) for x in triple) in self.triples

    def __len__(self) -> int:
        return len(self.triples)

    def tails(self, h: int, r: int) -> set[int]:
        return self._tails.get((h, r), set())

    def heads(self, r: int, t: int) -> set[int]:
        return self._heads.get((r, t), set())


@dataclass(frozen=True)
class RankedQuery:
    triple: tuple[int, int, int]
    side: str
    rank: float


def _rank_from_scores(scores: np.ndarray, target: int, exclude: Iterable[int]) -> float:
    s_true = scores[target]
    mask = np.ones(scores.shape[0], dtype=bool)
    mask[target] = False
    ex = list(exclude)
    if ex:
        mask[ex] = False
    rest = scores[mask]
    better = int(np.count_nonzero(rest > s_true))
    ties = int(np.count_nonzero(rest == s_true))
    return 1.0 + better + ties / 2.0


def filtered_rank(
    model: EmbeddingModel,
    triple: Sequence[int],
    side: str,
    known: FilterIndex,
    filtered: bool = True,
) -> float:
    """Rank of the true answer among all entity replacements on ``side``.

    Other known-true answers are removed before ranking (unless
    ``filtered`` is false). Ties count half: ``1 + #better + #ties / 2``.
    """
    h, r, t = (int(x) for x in triple)
    if (h, r, t) not in known:
        raise InvalidInputError(f"query {(h, r, t)} is not in the known-true set")
    if side == TAIL:
        scores, target = score_all_tails(model, h, r), t
        others = known.tails(h, r) if filtered else ()
    elif side == HEAD:
        scores, target = score_all_heads(model, r, t), h
        others = known.heads(r, t) if filtered else ()
    else:
        raise InvalidInputError(f"side must be one of {SIDES}")
    return _rank_from_scores(scores, target, (x for x in others if x != target))


# -- scalar metrics -----------------------------------------------------------


def _as_ranks(ranks) -> np.ndarray:
    arr = np.asarray(list(ranks) if not isinstance(ranks, np.ndarray) else ranks, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("no ranks given")
    return arr


def mean_rank(ranks) -> float:
    return float(_as_ranks(ranks).mean())


def mean_reciprocal_rank(ranks) -> float:
    return float((1.0 / _as_ranks(ranks)).mean())


def precision_at_k(ranks, k: int) -> float:
    """Share of queries whose answer ranks within the top ``k`` (Hits@k)."""
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    return float((_as_ranks(ranks) <= k).mean())


@dataclass
class RankingMetrics:
    mr: float
    mrr: float
    p_at: dict[int, float]
    n_queries: int
    skipped_queries: int = 0

    @classmethod
    def from_ranks(cls, ranks, skipped: int = 0) -> "RankingMetrics":
        arr = _as_ranks(ranks)
        return cls(
            mr=mean_rank(arr),
            mrr=mean_reciprocal_rank(arr),
            p_at={k: precision_at_k(arr, k) for k in HITS_AT},
            n_queries=int(arr.size),
            skipped_queries=skipped,
        )

    def row(self) -> tuple[float, ...]:
        return (self.mr, self.mrr, self.p_at[1], self.p_at[3], self.p_at[10])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_at"] = {str(k): v for k, v in self.p_at.items()}
        return d


def rank_queries(
    model: EmbeddingModel,
    test_triples: Iterable[Sequence[int]],
    known: FilterIndex,
    threads: int = 1,
    filtered: bool = True,
) -> list[RankedQuery]:
    """Head and tail queries for every test triple, in input order."""
    queries = [(tuple(int(x) for x in trip), side) for trip in test_triples for side in (HEAD, TAIL)]

    def one(q):
        return RankedQuery(q[0], q[1], filtered_rank(model, q[0], q[1], known, filtered))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, queries))
    return [one(q) for q in queries]


def evaluate_link_prediction(
    model: EmbeddingModel,
    test_triples: Iterable[Sequence[int]],
    known: FilterIndex,
    threads: int = 1,
    skipped: int = 0,
) -> RankingMetrics:
    ranked = rank_queries(model, test_triples, known, threads)
    return RankingMetrics.from_ranks([q.rank for q in ranked], skipped)


# -- edge-set quality ---------------------------------------------------------


def edge_set_precision_recall(predicted: Iterable, truth: Iterable) -> tuple[float, float]:
    pred, true = set(predicted), set(truth)
    if not pred:
        raise UndefinedMetricError("precision is undefined for an empty prediction set")
    if not true:
        raise UndefinedMetricError("recall is undefined for an empty ground-truth set")
    hit = len(pred & true)
    return hit / len(pred), hit / len(true)


def f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; defined as 0 when both are 0."""
    for v in (precision, recall):
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"{v} outside [0, 1]")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# -- reports ------------------------------------------------------------------


@dataclass
class MetricTable:
    """Rows of (dataset, model, metrics) laid out like a link-prediction results table."""

    rows: list[tuple[str, str, RankingMetrics]] = field(default_factory=list)

    def add(self, dataset: str, model: str, metrics: RankingMetrics) -> None:
        self.rows.append((dataset, model, metrics))

    def to_tsv(self) -> str:
        lines = ["\t".join(("Dataset", "Model") + RANKING_COLUMNS)]
        for dataset, model, m in self.rows:
            lines.append("\t".join([dataset, model] + [f"{v:.4f}" for v in m.row()]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "columns": list(RANKING_COLUMNS),
            "rows": [
                {"dataset": d, "model": mname, "values": dict(zip(RANKING_COLUMNS, m.row())), **m.to_dict()}
                for d, mname, m in self.rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
