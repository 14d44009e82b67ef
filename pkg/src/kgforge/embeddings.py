"""Link-prediction embedding models trained with negative sampling and plain SGD.

Four score functions are supported (higher is more plausible):

=========  ===========================================  ==================
kind       score(h, r, t)                               parameters
=========  ===========================================  ==================
TransE     ``-||h + r - t||``                           real h, r, t
RotatE     ``-||h * exp(i theta) - t||``                complex h, t; phases
DistMult   ``sum(h * r * t)``                           real h, r, t
ComplEx    ``Re(sum(h * r * conj(t)))``                 complex h, r, t
=========  ===========================================  ==================

Complex tables are stored as real arrays of width ``2 * dim`` holding the
real parts followed by the imaginary parts. RotatE relations are stored as
``dim`` phases in ``[0, 2 pi)``.

TransE and RotatE train on the margin ranking loss
``max(0, margin - s_pos + s_neg)``; DistMult and ComplEx on the logistic
loss ``softplus(-s_pos) + softplus(s_neg)`` plus L2 on the embeddings
touched by the batch.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, NotFoundError, ParseError, TrainingDivergedError

log = logging.getLogger(__name__)

KINDS = ("TransE", "RotatE", "DistMult", "ComplEx")
NORMS = ("L1", "L2")
MARGIN_KINDS = ("TransE", "RotatE")
COMPLEX_ENTITY_KINDS = ("RotatE", "ComplEx")

CHECKPOINT_MAGIC = b"KGFORGE-EMB 1\n"
_EPS = 1e-12


def _check_kind(kind: str) -> str:
    for k in KINDS:
        if k.lower() == str(kind).lower():
            return k
    raise InvalidInputError(f"unknown model kind {kind!r}; expected one of {KINDS}")


def entity_width(kind: str, dim: int) -> int:
    return 2 * dim if kind in COMPLEX_ENTITY_KINDS else dim


def relation_width(kind: str, dim: int) -> int:
    return 2 * dim if kind == "ComplEx" else dim


@dataclass
class EmbeddingModel:
    kind: str
    dim: int
    entity_vecs: np.ndarray
    relation_vecs: np.ndarray
    norm: str = "L2"
    seed: int = 0
    entity_labels: tuple[str, ...] = ()
    relation_labels: tuple[str, ...] = ()

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vecs.shape[0]

    def copy(self) -> "EmbeddingModel":
        return replace(self, entity_vecs=self.entity_vecs.copy(), relation_vecs=self.relation_vecs.copy())

    def validate(self) -> None:
        self.kind = _check_kind(self.kind)
        if self.norm not in NORMS:
            raise InvalidInputError(f"norm must be one of {NORMS}")
        if self.entity_vecs.shape[1] != entity_width(self.kind, self.dim):
            raise InvalidInputError("entity table width does not match kind/dim")
        if self.relation_vecs.shape[1] != relation_width(self.kind, self.dim):
            raise InvalidInputError("relation table width does not match kind/dim")
        if self.entity_labels and len(self.entity_labels) != self.n_entities:
            raise InvalidInputError("entity label count differs from entity table rows")
        if self.relation_labels and len(self.relation_labels) != self.n_relations:
            raise InvalidInputError("relation label count differs from relation table rows")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives_per_positive: int = 5
    l2_weight: float = 1e-5
    seed: int = 0
    max_negative_retries: int = 100

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidInputError("epochs must be non-negative")
        for name in ("batch_size", "negatives_per_positive"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be positive")
        for name in ("learning_rate", "margin"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.l2_weight < 0:
            raise InvalidInputError("l2_weight must be non-negative")


def init_model(
    kind: str,
    dim: int,
    n_entities: int,
    n_relations: int,
    seed: int = 0,
    norm: str = "L2",
    entity_labels: Sequence[str] = (),
    relation_labels: Sequence[str] = (),
) -> EmbeddingModel:
    """Seeded uniform init in ``[-6/sqrt(dim), 6/sqrt(dim)]``; RotatE phases uniform in ``[0, 2 pi)``."""
    kind = _check_kind(kind)
    if dim < 1:
        raise InvalidInputError("dim must be at least 1")
    if n_entities < 1 or n_relations < 1:
        raise InvalidInputError("a model needs at least one entity and one relation")
    rng = np.random.default_rng(seed)
    bound = 6.0 / math.sqrt(dim)
    ent = rng.uniform(-bound, bound, size=(n_entities, entity_width(kind, dim)))
    if kind == "RotatE":
        rel = rng.uniform(0.0, 2.0 * math.pi, size=(n_relations, dim))
    else:
        rel = rng.uniform(-bound, bound, size=(n_relations, relation_width(kind, dim)))
    model = EmbeddingModel(kind, dim, ent, rel, norm, seed, tuple(entity_labels), tuple(relation_labels))
    model.validate()
    return model


# -- score functions and their gradients ---------------------------------------
#
# All helpers take row-aligned arrays of shape (..., width) and broadcast.


def _split(x: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    return x[..., :dim], x[..., dim:]


def _scores(kind: str, norm: str, dim: int, H, R, T) -> np.ndarray:
    if kind == "TransE":
        d = H + R - T
        return -np.abs(d).sum(-1) if norm == "L1" else -np.sqrt((d * d).sum(-1))
    if kind == "RotatE":
        a, b = _split(H, dim)
        tr, ti = _split(T, dim)
        c, s = np.cos(R), np.sin(R)
        dr = a * c - b * s - tr
        di = a * s + b * c - ti
        sq = dr * dr + di * di
        return -np.sqrt(sq).sum(-1) if norm == "L1" else -np.sqrt(sq.sum(-1))
    if kind == "DistMult":
        # h*t first so that swapping h and t is bit-for-bit symmetric
        return (H * T * R).sum(-1)
    a, b = _split(H, dim)
    c, d = _split(R, dim)
    e, f = _split(T, dim)
    return ((a * c - b * d) * e + (a * d + b * c) * f).sum(-1)


def _score_grads(kind: str, norm: str, dim: int, H, R, T):
    """Scores and their gradients with respect to the h, r and t rows."""
    if kind == "TransE":
        d = H + R - T
        if norm == "L1":
            s = -np.abs(d).sum(-1)
            g = -np.sign(d)
        else:
            n = np.sqrt((d * d).sum(-1))
            s = -n
            g = -d / np.maximum(n, _EPS)[..., None]
        return s, g, g, -g
    if kind == "RotatE":
        a, b = _split(H, dim)
        tr, ti = _split(T, dim)
        c, sn = np.cos(R), np.sin(R)
        dr = a * c - b * sn - tr
        di = a * sn + b * c - ti
        sq = dr * dr + di * di
        if norm == "L1":
            mod = np.sqrt(sq)
            s = -mod.sum(-1)
            inv = 1.0 / np.maximum(mod, _EPS)
        else:
            n = np.sqrt(sq.sum(-1))
            s = -n
            inv = (1.0 / np.maximum(n, _EPS))[..., None]
        g_dr, g_di = -dr * inv, -di * inv
        dH = np.concatenate([g_dr * c + g_di * sn, -g_dr * sn + g_di * c], axis=-1)
        dR = g_dr * (-a * sn - b * c) + g_di * (a * c - b * sn)
        dT = np.concatenate([-g_dr, -g_di], axis=-1)
        return s, dH, dR, dT
    if kind == "DistMult":
        return (H * T * R).sum(-1), R * T, H * T, H * R
    a, b = _split(H, dim)
    c, d = _split(R, dim)
    e, f = _split(T, dim)
    s = ((a * c - b * d) * e + (a * d + b * c) * f).sum(-1)
    dH = np.concatenate([c * e + d * f, -d * e + c * f], axis=-1)
    dR = np.concatenate([a * e + b * f, -b * e + a * f], axis=-1)
    dT = np.concatenate([a * c - b * d, a * d + b * c], axis=-1)
    return s, dH, dR, dT


def _check_index(model: EmbeddingModel, h: int, r: int, t: int) -> None:
    if not (0 <= h < model.n_entities and 0 <= t < model.n_entities):
        raise NotFoundError(f"entity index out of range: ({h}, {t})")
    if not 0 <= r < model.n_relations:
        raise NotFoundError(f"relation index {r} out of range")


def score(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    _check_index(model, h, r, t)
    E, Rv = model.entity_vecs, model.relation_vecs
    return float(_scores(model.kind, model.norm, model.dim, E[h], Rv[r], E[t]))


def score_triples(model: EmbeddingModel, triples: np.ndarray) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    E, Rv = model.entity_vecs, model.relation_vecs
    return _scores(model.kind, model.norm, model.dim, E[triples[:, 0]], Rv[triples[:, 1]], E[triples[:, 2]])


def score_all_tails(model: EmbeddingModel, h: int, r: int) -> np.ndarray:
    """Scores of ``(h, r, x)`` for every entity ``x``."""
    E, Rv = model.entity_vecs, model.relation_vecs
    return _scores(model.kind, model.norm, model.dim, E[h][None, :], Rv[r][None, :], E)


def score_all_heads(model: EmbeddingModel, r: int, t: int) -> np.ndarray:
    """Scores of ``(x, r, t)`` for every entity ``x``."""
    E, Rv = model.entity_vecs, model.relation_vecs
    return _scores(model.kind, model.norm, model.dim, E, Rv[r][None, :], E[t][None, :])


# -- losses ---------------------------------------------------------------


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def batch_loss(model: EmbeddingModel, pos: np.ndarray, neg: np.ndarray, config: TrainConfig) -> float:
    """Loss of positives ``pos`` (B, 3) against their negatives ``neg`` (B, k, 3)."""
    E, Rv = model.entity_vecs, model.relation_vecs
    kind, norm, dim = model.kind, model.norm, model.dim
    s_pos = _scores(kind, norm, dim, E[pos[:, 0]], Rv[pos[:, 1]], E[pos[:, 2]])
    s_neg = _scores(kind, norm, dim, E[neg[..., 0]], Rv[neg[..., 1]], E[neg[..., 2]])
    if kind in MARGIN_KINDS:
        return float(np.maximum(0.0, config.margin - s_pos[:, None] + s_neg).mean())
    n = s_pos.size + s_neg.size
    data = (_softplus(-s_pos).sum() + _softplus(s_neg).sum()) / n
    sq = 0.0
    for trip in (pos, neg.reshape(-1, 3)):
        sq += (E[trip[:, 0]] ** 2).sum() + (Rv[trip[:, 1]] ** 2).sum() + (E[trip[:, 2]] ** 2).sum()
    return float(data + config.l2_weight * sq / n)


@dataclass
class SparseGrad:
    """Row gradients to be scatter-added into the entity and relation tables."""

    ent_idx: np.ndarray
    ent_rows: np.ndarray
    rel_idx: np.ndarray
    rel_rows: np.ndarray

    def dense(self, model: EmbeddingModel) -> tuple[np.ndarray, np.ndarray]:
        ge = np.zeros_like(model.entity_vecs)
        gr = np.zeros_like(model.relation_vecs)
        np.add.at(ge, self.ent_idx, self.ent_rows)
        np.add.at(gr, self.rel_idx, self.rel_rows)
        return ge, gr


def batch_loss_and_grad(
    model: EmbeddingModel, pos: np.ndarray, neg: np.ndarray, config: TrainConfig
) -> tuple[float, SparseGrad]:
    E, Rv = model.entity_vecs, model.relation_vecs
    kind, norm, dim = model.kind, model.norm, model.dim
    B, k = neg.shape[0], neg.shape[1]
    flat_neg = neg.reshape(-1, 3)
    sp, gph, gpr, gpt = _score_grads(kind, norm, dim, E[pos[:, 0]], Rv[pos[:, 1]], E[pos[:, 2]])
    Hn, Rn, Tn = E[flat_neg[:, 0]], Rv[flat_neg[:, 1]], E[flat_neg[:, 2]]
    sn, gnh, gnr, gnt = _score_grads(kind, norm, dim, Hn, Rn, Tn)

    if kind in MARGIN_KINDS:
        viol = config.margin - sp[:, None] + sn.reshape(B, k)
        active = (viol > 0).astype(np.float64)
        loss = float(np.maximum(0.0, viol).mean())
        scale = 1.0 / (B * k)
        w_pos = -active.sum(1) * scale
        w_neg = active.reshape(-1) * scale
        reg_pos = reg_neg = None
    else:
        n = B * (1 + k)
        loss = (_softplus(-sp).sum() + _softplus(sn).sum()) / n
        w_pos = -_sigmoid(-sp) / n
        w_neg = _sigmoid(sn) / n
        lam = config.l2_weight
        Hp, Rp, Tp = E[pos[:, 0]], Rv[pos[:, 1]], E[pos[:, 2]]
        loss += lam * (
            (Hp**2).sum() + (Rp**2).sum() + (Tp**2).sum() + (Hn**2).sum() + (Rn**2).sum() + (Tn**2).sum()
        ) / n
        loss = float(loss)
        c = 2.0 * lam / n
        reg_pos = (c * Hp, c * Rp, c * Tp)
        reg_neg = (c * Hn, c * Rn, c * Tn)

    wp, wn = w_pos[:, None], w_neg[:, None]
    ph, pr, pt = wp * gph, wp * gpr, wp * gpt
    nh, nr, nt = wn * gnh, wn * gnr, wn * gnt
    if reg_pos is not None:
        ph, pr, pt = ph + reg_pos[0], pr + reg_pos[1], pt + reg_pos[2]
        nh, nr, nt = nh + reg_neg[0], nr + reg_neg[1], nt + reg_neg[2]
    grad = SparseGrad(
        ent_idx=np.concatenate([pos[:, 0], pos[:, 2], flat_neg[:, 0], flat_neg[:, 2]]),
        ent_rows=np.concatenate([ph, pt, nh, nt]),
        rel_idx=np.concatenate([pos[:, 1], flat_neg[:, 1]]),
        rel_rows=np.concatenate([pr, nr]),
    )
    return loss, grad


# -- negative sampling ------------------------------------------------------


def _triple_keys(triples: np.ndarray, n_entities: int, n_relations: int) -> np.ndarray:
    t = np.asarray(triples, dtype=np.int64)
    return (t[..., 0] * n_relations + t[..., 1]) * n_entities + t[..., 2]


class KnownTriples:
    """Sorted int64 keys of known-true triples for vectorised membership tests."""

    def __init__(self, triples, n_entities: int, n_relations: int):
        self.n_entities = n_entities
        self.n_relations = n_relations
        arr = np.asarray(list(triples) if not isinstance(triples, np.ndarray) else triples, dtype=np.int64)
        self.keys = np.unique(_triple_keys(arr.reshape(-1, 3), n_entities, n_relations))

    def contains(self, triples: np.ndarray) -> np.ndarray:
        keys = _triple_keys(triples, self.n_entities, self.n_relations)
        if self.keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.keys.size - 1)
        return self.keys[pos] == keys

    def __contains__(self, triple) -> bool:
        return bool(self.contains(np.asarray(triple, dtype=np.int64)))


def _known_from(graph, n_entities: int | None = None, n_relations: int | None = None) -> KnownTriples:
    if isinstance(graph, KnownTriples):
        return graph
    if hasattr(graph, "triple_array"):
        return KnownTriples(graph.triple_array(), graph.n_entities, max(graph.n_relations, 1))
    triples = np.asarray(list(graph), dtype=np.int64).reshape(-1, 3)
    n_e = n_entities if n_entities is not None else int(triples[:, [0, 2]].max()) + 1
    n_r = n_relations if n_relations is not None else int(triples[:, 1].max()) + 1
    return KnownTriples(triples, n_e, n_r)


def sample_negatives(
    pos: np.ndarray,
    known: KnownTriples,
    k: int,
    rng: np.random.Generator,
    max_retries: int = 100,
) -> np.ndarray:
    """``k`` filtered corruptions per positive, shape (B, k, 3).

    Each corruption swaps the head or the tail (probability 1/2 each) for a
    different entity and is redrawn while it is a known triple; after
    ``max_retries`` redraws the last draw is kept even if known.
    """
    n = known.n_entities
    if n < 2:
        raise InvalidInputError("negative sampling needs at least two entities")
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 3)
    neg = np.repeat(pos[:, None, :], k, axis=1)
    corrupt_head = rng.random(neg.shape[:2]) < 0.5
    col = np.where(corrupt_head, 0, 2)
    orig = np.take_along_axis(neg, col[..., None], axis=2)[..., 0]

    todo = np.ones(neg.shape[:2], dtype=bool)
    for _ in range(max_retries + 1):
        idx = np.nonzero(todo)
        if idx[0].size == 0:
            break
        draw = rng.integers(0, n - 1, size=idx[0].size)
        o = orig[idx]
        draw = draw + (draw >= o)  # skip the original entity
        neg[idx[0], idx[1], col[idx]] = draw
        todo[idx] = known.contains(neg[idx])
    return neg


def negative_sample(triple, graph, rng: np.random.Generator, max_retries: int = 100) -> tuple[int, int, int]:
    """One filtered corruption of ``triple``; ``graph`` is a KnowledgeGraph or known-triple set."""
    known = _known_from(graph)
    out = sample_negatives(np.asarray(triple).reshape(1, 3), known, 1, rng, max_retries)
    return tuple(int(x) for x in out[0, 0])


# -- training -----------------------------------------------------------------


@dataclass
class TrainResult:
    model: EmbeddingModel
    losses: list[float] = field(default_factory=list)


def _apply(model: EmbeddingModel, grad: SparseGrad, lr: float) -> None:
    np.add.at(model.entity_vecs, grad.ent_idx, -lr * grad.ent_rows)
    np.add.at(model.relation_vecs, grad.rel_idx, -lr * grad.rel_rows)
    if model.kind == "RotatE":
        np.mod(model.relation_vecs, 2.0 * math.pi, out=model.relation_vecs)


def train(
    model: EmbeddingModel,
    triples,
    config: TrainConfig | None = None,
    known=None,
    threads: int = 1,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Train a copy of ``model`` on ``triples`` (array of entity/relation ids).

    ``known`` is the set of true triples used to filter negatives; it
    defaults to ``triples``. With ``threads > 1`` each batch is split into
    shards whose gradients are computed concurrently and applied in shard
    order; results then differ from the single-threaded run in the last bits.
    """
    config = config or TrainConfig()
    model = model.copy()
    model.validate()
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if triples.shape[0] == 0:
        raise InvalidInputError("cannot train on an empty triple set")
    if triples.min() < 0 or triples[:, [0, 2]].max() >= model.n_entities or triples[:, 1].max() >= model.n_relations:
        raise NotFoundError("training triple refers to an id outside the model tables")
    known = KnownTriples(triples, model.n_entities, model.n_relations) if known is None else _known_from(
        known, model.n_entities, model.n_relations
    )

    rng = np.random.default_rng(config.seed)
    losses: list[float] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(triples.shape[0])
            total, n_seen = 0.0, 0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                pos = triples[order[start : start + config.batch_size]]
                neg = sample_negatives(pos, known, config.negatives_per_positive, rng, config.max_negative_retries)
                if pool is None:
                    loss, grad = batch_loss_and_grad(model, pos, neg, config)
                    grads = [(1.0, grad)]
                else:
                    shards = [s for s in np.array_split(np.arange(len(pos)), threads) if s.size]
                    parts = list(pool.map(lambda s: batch_loss_and_grad(model, pos[s], neg[s], config), shards))
                    weights = [s.size / len(pos) for s in shards]
                    loss = sum(w * p[0] for w, p in zip(weights, parts))
                    grads = [(w, p[1]) for w, p in zip(weights, parts)]
                if not math.isfinite(loss):
                    raise TrainingDivergedError(epoch, b, loss)
                for w, g in grads:
                    _apply(model, g, config.learning_rate * w)
                total += loss * len(pos)
                n_seen += len(pos)
            epoch_loss = total / n_seen
            losses.append(epoch_loss)
            if on_epoch is not None:
                on_epoch(epoch, epoch_loss)
            log.debug("epoch %d loss %.6f", epoch, epoch_loss)
    finally:
        if pool is not None:
            pool.shutdown()
    if not (np.isfinite(model.entity_vecs).all() and np.isfinite(model.relation_vecs).all()):
        raise TrainingDivergedError(config.epochs - 1, -1, math.nan)
    return TrainResult(model, losses)


# -- numerical validation ---------------------------------------------------


def finite_difference_grad(f: Callable[[], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of ``f`` with respect to every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def gradient_check(
    model_kind: str,
    dim: int = 4,
    seed: int = 0,
    norm: str = "L2",
    step: float = 1e-5,
    n_points: int = 3,
) -> float:
    """Max relative error between analytic and central-difference loss gradients.

    Evaluated at ``n_points`` random parameter settings of a small model;
    the error of each table is ``||g_a - g_fd|| / (||g_a|| + ||g_fd||)``.
    The margin is set large so the hinge is active and the loss smooth.
    """
    kind = _check_kind(model_kind)
    rng = np.random.default_rng(seed)
    n_ent, n_rel, B, k = 6, 3, 4, 3
    config = TrainConfig(margin=100.0, l2_weight=0.1)
    worst = 0.0
    for p in range(n_points):
        model = init_model(kind, dim, n_ent, n_rel, seed=seed * 1000 + p, norm=norm)
        pos = np.stack(
            [rng.integers(0, n_ent, B), rng.integers(0, n_rel, B), rng.integers(0, n_ent, B)], axis=1
        )
        neg = np.repeat(pos[:, None, :], k, axis=1)
        neg[..., 0] = rng.integers(0, n_ent, (B, k))
        neg[..., 2] = rng.integers(0, n_ent, (B, k))
        _, grad = batch_loss_and_grad(model, pos, neg, config)
        ge, gr = grad.dense(model)
        f = lambda: batch_loss(model, pos, neg, config)  # noqa: E731
        fe = finite_difference_grad(f, model.entity_vecs, step)
        fr = finite_difference_grad(f, model.relation_vecs, step)
        worst = max(worst, _rel_error(ge, fe), _rel_error(gr, fr))
    return worst


# -- checkpoints -----------------------------------------------------------------


def checkpoint_bytes(model: EmbeddingModel) -> bytes:
    model.validate()
    header = {
        "kind": model.kind,
        "dim": model.dim,
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "norm": model.norm,
        "seed": model.seed,
        "entity_width": model.entity_vecs.shape[1],
        "relation_width": model.relation_vecs.shape[1],
        "entity_labels": list(model.entity_labels),
        "relation_labels": list(model.relation_labels),
    }
    head = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return (
        CHECKPOINT_MAGIC
        + head
        + b"\n"
        + np.ascontiguousarray(model.entity_vecs, dtype="<f8").tobytes()
        + np.ascontiguousarray(model.relation_vecs, dtype="<f8").tobytes()
    )


def model_from_bytes(data: bytes) -> EmbeddingModel:
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ParseError("not a kgforge embedding checkpoint")
    rest = data[len(CHECKPOINT_MAGIC) :]
    nl = rest.find(b"\n")
    if nl < 0:
        raise ParseError("truncated checkpoint header")
    try:
        h = json.loads(rest[:nl].decode("utf-8"))
        n_e, w_e = int(h["n_entities"]), int(h["entity_width"])
        n_r, w_r = int(h["n_relations"]), int(h["relation_width"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}") from None
    body = rest[nl + 1 :]
    need = 8 * (n_e * w_e + n_r * w_r)
    if len(body) != need:
        raise ParseError(f"checkpoint body has {len(body)} bytes, expected {need}")
    arr = np.frombuffer(body, dtype="<f8").astype(np.float64)
    model = EmbeddingModel(
        kind=h["kind"],
        dim=int(h["dim"]),
        entity_vecs=arr[: n_e * w_e].reshape(n_e, w_e).copy(),
        relation_vecs=arr[n_e * w_e :].reshape(n_r, w_r).copy(),
        norm=h["norm"],
        seed=int(h["seed"]),
        entity_labels=tuple(h.get("entity_labels", ())),
        relation_labels=tuple(h.get("relation_labels", ())),
    )
    model.validate()
    return model


def save_checkpoint(model: EmbeddingModel, path: str | os.PathLike) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path: str | os.PathLike) -> EmbeddingModel:
    return model_from_bytes(Path(path).read_bytes())
