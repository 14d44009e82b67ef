"""Sources of candidate triples: JSONL streams, a seeded generator, and an HTTP extractor."""

from __future__ import annotations

import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EndpointError, InvalidInputError, ParseError, TransportError
from .store import DEFAULT_ENTITY_TYPE, normalize_label

log = logging.getLogger(__name__)

TOKEN_ENV_VAR = "KGFORGE_EXTRACTOR_TOKEN"


@dataclass(frozen=True)
class CandidateTriple:
    head_label: str
    relation_label: str
    tail_label: str
    confidence: float
    head_type: str = DEFAULT_ENTITY_TYPE
    tail_type: str = DEFAULT_ENTITY_TYPE
    source_doc: str = ""

    def __post_init__(self):
        if not (isinstance(self.confidence, (int, float)) and 0.0 <= self.confidence <= 1.0):
            raise InvalidInputError(f"confidence {self.confidence!r} outside [0, 1]")
        for name in ("head_label", "relation_label", "tail_label"):
            if not normalize_label(getattr(self, name)):
                raise InvalidInputError(f"{name} is empty after normalization")

    def to_json(self) -> str:
        obj = {
            "head": self.head_label,
            "relation": self.relation_label,
            "tail": self.tail_label,
            "confidence": self.confidence,
            "head_type": self.head_type,
            "tail_type": self.tail_type,
            "source": self.source_doc,
        }
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class Reject:
    line_no: int
    reason: str
    raw: str


@dataclass(frozen=True)
class ExtractionBatch:
    candidates: tuple[CandidateTriple, ...] = ()
    corpus_id: str = ""
    extractor_id: str = ""
    rejects: tuple[Reject, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


def serialize_candidates(batch: ExtractionBatch | Iterable[CandidateTriple]) -> str:
    """Render candidates in the JSONL wire format, one object per line."""
    return "".join(c.to_json() + "\n" for c in batch)


def _parse_line(obj: object, line_no: int) -> CandidateTriple:
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line_no)
    missing = [k for k in ("head", "relation", "tail", "confidence") if k not in obj]
    if missing:
        raise ParseError(f"missing keys {missing}", line_no)
    labels = []
    for key in ("head", "relation", "tail"):
        value = obj[key]
        if not isinstance(value, str) or not normalize_label(value):
            raise ParseError(f"{key!r} must be a non-empty string", line_no)
        labels.append(normalize_label(value))
    conf = obj["confidence"]
    if isinstance(conf, bool) or not isinstance(conf, (int, float)):
        raise ParseError(f"confidence {conf!r} is not a number", line_no)
    extras = {}
    for key, default in (("head_type", DEFAULT_ENTITY_TYPE), ("tail_type", DEFAULT_ENTITY_TYPE), ("source", "")):
        value = obj.get(key, default)
        if value is None:
            value = default
        if not isinstance(value, str):
            raise ParseError(f"{key!r} must be a string", line_no)
        # types are tags and get trimmed; the source id is kept verbatim
        extras[key] = value if key == "source" else (value.strip() or default)
    return CandidateTriple(
        labels[0],
        labels[1],
        labels[2],
        float(conf),
        extras["head_type"],
        extras["tail_type"],
        extras["source"],
    )


def parse_candidates(
    lines: Iterable[str] | str,
    corpus_id: str = "",
    extractor_id: str = "",
) -> ExtractionBatch:
    """Parse a JSONL candidate stream.

    Structurally malformed lines raise :class:`ParseError`. Lines whose only
    fault is a confidence outside ``[0, 1]`` are recorded in
    ``batch.rejects`` and skipped.
    """
    if isinstance(lines, str):
        # split on LF only: str.splitlines would also break on U+2028 etc.,
        # which may legally appear unescaped inside a JSON string
        lines = lines.split("\n")
    candidates: list[CandidateTriple] = []
    rejects: list[Reject] = []
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line_no) from None
        try:
            cand = _parse_line(obj, line_no)
        except InvalidInputError as exc:
            rejects.append(Reject(line_no, str(exc), text))
            continue
        candidates.append(cand)
    if rejects:
        log.info("rejected %d candidate line(s) with out-of-range confidence", len(rejects))
    return ExtractionBatch(tuple(candidates), corpus_id, extractor_id, tuple(rejects))


def read_candidates_jsonl(path: str | os.PathLike) -> ExtractionBatch:
    with open(path, encoding="utf-8") as fh:
        return parse_candidates(fh, corpus_id=os.fspath(path), extractor_id="jsonl")


# -- synthetic source ------------------------------------------------------

_SYNTH_TYPES = ("disease", "biomarker", "treatment", "region")
_SYNTH_RELATIONS = ("associated_with", "increases", "decreases", "treated_by", "located_in")


@dataclass(frozen=True)
class ConfidenceLaw:
    """``uniform`` on [0, 1], or ``two-point``: p_high with probability ``mix``, else p_low."""

    kind: str = "uniform"
    p_low: float = 0.3
    p_high: float = 0.9
    mix: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "two-point"):
            raise InvalidInputError(f"unknown confidence law {self.kind!r}")
        for name in ("p_low", "p_high", "mix"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1]")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.random(n)
        high = rng.random(n) < self.mix
        return np.where(high, self.p_high, self.p_low)


def synthesize_candidates(
    seed: int,
    n_entities: int,
    n_candidates: int,
    confidence_law: ConfidenceLaw | None = None,
    n_relations: int = 3,
) -> ExtractionBatch:
    """Deterministic pseudo-random candidate batch over ``n_entities`` labels."""
    if n_entities < 2:
        raise InvalidInputError("n_entities must be at least 2")
    if n_candidates < 0:
        raise InvalidInputError("n_candidates must be non-negative")
    if not 1 <= n_relations <= len(_SYNTH_RELATIONS):
        raise InvalidInputError(f"n_relations must lie in [1, {len(_SYNTH_RELATIONS)}]")
    law = confidence_law or ConfidenceLaw()
    rng = np.random.default_rng(seed)
    heads = rng.integers(0, n_entities, n_candidates)
    # offset in [1, n) guarantees tail != head
    tails = (heads + rng.integers(1, n_entities, n_candidates)) % n_entities
    rels = rng.integers(0, n_relations, n_candidates)
    confs = law.sample(rng, n_candidates)
    out = []
    for i in range(n_candidates):
        h, t = int(heads[i]), int(tails[i])
        out.append(
            CandidateTriple(
                f"entity {h}",
                _SYNTH_RELATIONS[int(rels[i])],
                f"entity {t}",
                float(confs[i]),
                _SYNTH_TYPES[h % len(_SYNTH_TYPES)],
                _SYNTH_TYPES[t % len(_SYNTH_TYPES)],
                f"synthetic:{seed}:{i}",
            )
        )
    return ExtractionBatch(tuple(out), corpus_id=f"synthetic-{seed}", extractor_id="synthetic")


# -- HTTP source -----------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 0.5
    multiplier: float = 2.0

    def delays(self) -> list[float]:
        return [self.backoff * self.multiplier**i for i in range(max(self.attempts - 1, 0))]


def fetch_candidates(
    endpoint_url: str,
    documents: Sequence[str],
    timeout: float = 30.0,
    retry_policy: RetryPolicy | None = None,
    token: str | None = None,
) -> ExtractionBatch:
    """POST ``{"documents": [...]}`` to an extractor and parse its JSONL reply.

    Only transport failures are retried; an HTTP error status raises
    :class:`EndpointError` immediately and nothing is returned.
    """
    policy = retry_policy or RetryPolicy()
    if token is None:
        token = os.environ.get(TOKEN_ENV_VAR)
    headers = {"Content-Type": "application/json", "Accept": "application/x-ndjson"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = json.dumps({"documents": list(documents)}).encode("utf-8")

    delays = policy.delays()
    last_exc: Exception | None = None
    for attempt in range(max(policy.attempts, 1)):
        req = urllib.request.Request(endpoint_url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                payload = resp.read()
            break
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", "replace")
            raise EndpointError(exc.code, detail) from None
        except (urllib.error.URLError, OSError) as exc:
            last_exc = exc
            log.warning("extractor request failed (attempt %d): %s", attempt + 1, exc)
            if attempt < len(delays):
                time.sleep(delays[attempt])
    else:
        raise TransportError(f"{endpoint_url}: {last_exc}") from last_exc

    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("response body is not UTF-8") from None
    return parse_candidates(text, corpus_id=f"{len(documents)} document(s)", extractor_id=endpoint_url)


def batch_confidence_summary(batch: ExtractionBatch) -> dict[str, float]:
    confs = [c.confidence for c in batch]
    if not confs:
        return {"n": 0, "mean": math.nan, "min": math.nan, "max": math.nan}
    return {"n": len(confs), "mean": float(np.mean(confs)), "min": min(confs), "max": max(confs)}


__all__ = [
    "CandidateTriple",
    "ConfidenceLaw",
    "ExtractionBatch",
    "Reject",
    "RetryPolicy",
    "TOKEN_ENV_VAR",
    "batch_confidence_summary",
    "fetch_candidates",
    "parse_candidates",
    "read_candidates_jsonl",
    "serialize_candidates",
    "synthesize_candidates",
]
