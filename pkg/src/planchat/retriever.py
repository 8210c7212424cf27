"""Semantic tool retrieval: embed the catalog once, nearest-neighbor queries.

Each tool's description and example queries are concatenated and embedded;
a user query is embedded the same way and the tool at minimum squared-L2
distance wins. All embedders emit unit vectors, so squared L2 is a monotone
transform of cosine similarity (d2 = 2 - 2 cos).

The default embedder is a seeded hashed bag-of-words: lowercase, split on
non-alphanumerics, drop a fixed 30-word stop list, hash every token into one
of 256 buckets with a seeded stable hash, count, L2-normalize. It is fully
deterministic and dependency-free, which is what the offline tests need; a
remote HTTP embedder preserves the hosted-encoder architecture.

Retrievals whose best distance exceeds the confidence threshold are flagged
so the conversation layer can log a tool gap instead of guessing.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contracts import Catalog

DEFAULT_DIMENSION = 256
CONFIDENCE_THRESHOLD = 1.2  # squared L2 on unit vectors; ~cosine 0.4

# Exactly 30 high-frequency function words; kept short so domain words like
# "plan" and "if" stay in the signal.
STOP_WORDS = frozenset(
    """the a an of to in on for is are be with at by and or as it this that
    what how my me i do does will would can""".split()
)

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")
_HASH_SEED = b"planchat-embedder-v1:"


class RetrieverError(Exception):
    pass


class EmptyText(RetrieverError):
    pass


class EmptyIndex(RetrieverError):
    pass


class EndpointUnavailable(RetrieverError):
    pass


class UnknownGoldId(RetrieverError):
    def __init__(self, tool_id: str):
        self.tool_id = tool_id
        super().__init__(f"annotated set references unknown tool {tool_id!r}")


class EmptySet(RetrieverError):
    pass


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOP_WORDS]


def _bucket(token: str, dimension: int) -> int:
    digest = hashlib.sha256(_HASH_SEED + token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dimension


class HashedBagEmbedder:
    """Deterministic offline embedder; same text always gives the same vector."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        tokens = content_tokens(text)
        if not tokens:
            # Everything was a stop word; hash the raw text so the vector
            # still has unit norm and stays deterministic.
            tokens = [text.strip().lower()]
        vector = np.zeros(self.dimension)
        for token in tokens:
            vector[_bucket(token, self.dimension)] += 1.0
        return vector / np.linalg.norm(vector)


class RemoteEmbedder:
    """HTTP embedder: POST {"text": ...} -> {"vector": [...]}, then normalize."""

    def __init__(self, endpoint: str, timeout: float = 10.0, transport=None):
        import httpx

        self.endpoint = endpoint
        self.timeout = timeout
        self.dimension: int | None = None
        self._client = httpx.Client(transport=transport, timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        try:
            response = self._client.post(self.endpoint, json={"text": text})
            response.raise_for_status()
            values = response.json()["vector"]
        except Exception as err:  # connection, timeout, bad payload
            raise EndpointUnavailable(str(err)) from err
        vector = np.asarray(values, dtype=float)
        norm = np.linalg.norm(vector)
        if vector.ndim != 1 or norm == 0:
            raise EndpointUnavailable("endpoint returned an unusable vector")
        if self.dimension is None:
            self.dimension = int(vector.shape[0])
        elif vector.shape[0] != self.dimension:
            raise EndpointUnavailable("endpoint changed its vector dimension")
        return vector / norm


def embed_text(text: str, embedder=None) -> np.ndarray:
    """Unit-norm embedding of the text under the given (default: offline) embedder."""
    return (embedder or HashedBagEmbedder()).embed(text)


def embedder_from_env(env: dict | None = None):
    """EMBED_ENDPOINT set -> remote embedder; unset -> offline hashing."""
    import os

    env = dict(os.environ if env is None else env)
    endpoint = env.get("EMBED_ENDPOINT", "").strip()
    if endpoint:
        return RemoteEmbedder(endpoint)
    return HashedBagEmbedder()


@dataclass(frozen=True)
class VectorIndex:
    entries: tuple[tuple[str, np.ndarray], ...]
    dimension: int

    def ids(self) -> list[str]:
        return [tool_id for tool_id, _ in self.entries]


@dataclass(frozen=True)
class RetrievalResult:
    ranked: tuple[tuple[str, float], ...]  # (tool id, squared L2), ascending
    confident: bool

    @property
    def best_id(self) -> str:
        return self.ranked[0][0]

    @property
    def best_distance(self) -> float:
        return self.ranked[0][1]


def index_catalog(catalog: Catalog, embedder=None) -> VectorIndex:
    """Embed description+examples of every tool, eagerly, at startup."""
    embedder = embedder or HashedBagEmbedder()
    entries = tuple(
        (contract.id, embedder.embed(contract.retrieval_text())) for contract in catalog
    )
    if not entries:
        raise EmptyIndex("catalog has no tools to index")
    return VectorIndex(entries, int(entries[0][1].shape[0]))


def retrieve(
    query: str,
    index: VectorIndex,
    k: int = 1,
    embedder=None,
    threshold: float = CONFIDENCE_THRESHOLD,
) -> RetrievalResult:
    """Exact scan over the index; ties broken by ascending tool id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.entries:
        raise EmptyIndex("index is empty")
    query_vector = (embedder or HashedBagEmbedder()).embed(query)
    scored = sorted(
        (
            (tool_id, float(np.sum((query_vector - vector) ** 2)))
            for tool_id, vector in index.entries
        ),
        key=lambda pair: (pair[1], pair[0]),
    )
    ranked = tuple(scored[:k])
    return RetrievalResult(ranked, confident=scored[0][1] <= threshold)


@dataclass(frozen=True)
class AccuracyReport:
    total: int
    correct: int
    per_category: dict[str, tuple[int, int]]  # category -> (correct, total)
    mistakes: tuple[tuple[str, str, str], ...]  # (query, gold, predicted)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def category_accuracy(self, category: str) -> float:
        correct, total = self.per_category[category]
        return correct / total


def evaluate_retrieval(
    annotated: list[tuple[str, str]],
    index: VectorIndex,
    embedder=None,
    categories: dict[str, str] | None = None,
) -> AccuracyReport:
    """Top-1 accuracy overall and per tool category; fully deterministic."""
    if not annotated:
        raise EmptySet("annotated set is empty")
    known = set(index.ids())
    embedder = embedder or HashedBagEmbedder()
    categories = categories or {}

    correct = 0
    per_category: dict[str, list[int]] = {}
    mistakes: list[tuple[str, str, str]] = []
    for query, gold in annotated:
        if gold not in known:
            raise UnknownGoldId(gold)
        predicted = retrieve(query, index, k=1, embedder=embedder).best_id
        category = categories.get(gold, "uncategorized")
        bucket = per_category.setdefault(category, [0, 0])
        bucket[1] += 1
        if predicted == gold:
            correct += 1
            bucket[0] += 1
        else:
            mistakes.append((query, gold, predicted))
    return AccuracyReport(
        total=len(annotated),
        correct=correct,
        per_category={cat: (c, t) for cat, (c, t) in sorted(per_category.items())},
        mistakes=tuple(mistakes),
    )


def load_annotated_set(path: str | Path) -> list[tuple[str, str]]:
    """CSV with header query,gold_tool_id."""
    rows: list[tuple[str, str]] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["query", "gold_tool_id"]:
            raise RetrieverError(
                f"annotated set must have header query,gold_tool_id, got {reader.fieldnames}"
            )
        for row in reader:
            rows.append((row["query"], row["gold_tool_id"]))
    return rows
