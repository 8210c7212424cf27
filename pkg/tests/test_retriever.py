"""Embedding, nearest-neighbor retrieval, and the annotated-corpus harness."""

import random

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planchat.contracts import load_catalog
from planchat.resources import bundled_annotated_set, bundled_catalog_dir
from planchat.retriever import (
    CONFIDENCE_THRESHOLD,
    STOP_WORDS,
    EmptySet,
    EmptyText,
    EndpointUnavailable,
    HashedBagEmbedder,
    RemoteEmbedder,
    UnknownGoldId,
    VectorIndex,
    embed_text,
    embedder_from_env,
    evaluate_retrieval,
    index_catalog,
    load_annotated_set,
    retrieve,
)

# Frozen after the corpus was authored and first measured; a change here means
# the embedder, the catalog texts, or the corpus drifted.
FROZEN_CORRECT = 142
FROZEN_TOTAL = 150


@pytest.fixture(scope="module")
def catalog():
    return load_catalog(bundled_catalog_dir())


@pytest.fixture(scope="module")
def embedder():
    return HashedBagEmbedder()


@pytest.fixture(scope="module")
def index(catalog, embedder):
    return index_catalog(catalog, embedder)


# --- embedding ------------------------------------------------------------------


def test_stop_list_has_exactly_30_words():
    assert len(STOP_WORDS) == 30


def test_embedding_deterministic(embedder):
    text = "how many winter tires are made on 2024-04-16"
    assert np.array_equal(embedder.embed(text), embedder.embed(text))


def test_embedding_unit_norm(embedder):
    for text in ("show plan", "receive 100 kg of rubber", "zzz qqq", "the of and"):
        assert np.linalg.norm(embedder.embed(text)) == pytest.approx(1.0, abs=1e-6)


def test_embedding_rejects_empty(embedder):
    with pytest.raises(EmptyText):
        embedder.embed("   ")


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="abcdefgh 0123", min_size=1, max_size=40))
def test_embedding_unit_norm_property(text):
    if not text.strip():
        return
    vector = embed_text(text)
    assert np.linalg.norm(vector) == pytest.approx(1.0, abs=1e-6)


def test_distance_is_two_minus_two_cosine():
    rng = np.random.RandomState(11)
    for _ in range(50):
        u = rng.randn(32)
        v = rng.randn(32)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        d2 = float(np.sum((u - v) ** 2))
        assert d2 == pytest.approx(2.0 - 2.0 * float(u @ v), abs=1e-9)
        assert d2 >= 0.0


# --- indexing --------------------------------------------------------------------


def test_index_one_entry_per_contract(catalog, index):
    assert len(index.entries) == len(catalog)
    assert index.dimension == 256


def test_identical_texts_identical_vectors(embedder):
    a = embedder.embed("display the production schedule")
    b = embedder.embed("display the production schedule")
    assert np.array_equal(a, b)


# --- retrieval -------------------------------------------------------------------


def test_exact_text_retrieves_at_distance_zero(catalog, index, embedder):
    contract = catalog.get("compare_plans")
    result = retrieve(contract.retrieval_text(), index, embedder=embedder)
    assert result.best_id == "compare_plans"
    assert result.best_distance == pytest.approx(0.0, abs=1e-12)


def test_operations_plan_query_hits_display_tool(index, embedder):
    result = retrieve("Show me the operations plan", index, embedder=embedder)
    assert result.best_id == "show_plan_table"
    assert result.confident


def test_nonsense_query_is_unconfident(index, embedder):
    result = retrieve("qqq zzz xxx", index, embedder=embedder)
    assert not result.confident
    assert result.best_distance > CONFIDENCE_THRESHOLD


def test_show_plan_closer_than_receipt_text(embedder):
    # Frozen relative-distance regression for the default embedder.
    anchor = embed_text("show plan", embedder)
    near = embed_text("display the operations plan", embedder)
    far = embed_text("add a material receipt", embedder)
    d_near = float(np.sum((anchor - near) ** 2))
    d_far = float(np.sum((anchor - far) ** 2))
    assert d_near < d_far


def test_tie_broken_by_tool_id(embedder):
    vector = embedder.embed("identical text")
    index = VectorIndex((("zeta", vector), ("alpha", vector)), 256)
    result = retrieve("identical text", index, k=2, embedder=embedder)
    assert [tool for tool, _ in result.ranked] == ["alpha", "zeta"]


def test_permutation_invariance(catalog, embedder, index):
    entries = list(index.entries)
    rng = random.Random(3)
    query = "limit winter tire production"
    baseline = retrieve(query, index, k=5, embedder=embedder)
    for _ in range(5):
        rng.shuffle(entries)
        shuffled = VectorIndex(tuple(entries), index.dimension)
        assert retrieve(query, shuffled, k=5, embedder=embedder).ranked == baseline.ranked


def test_top_k_ascending(index, embedder):
    result = retrieve("compare the plans", index, k=4, embedder=embedder)
    distances = [d for _, d in result.ranked]
    assert distances == sorted(distances)
    assert len(result.ranked) == 4


# --- evaluation harness -------------------------------------------------------------


def test_own_examples_score_perfectly(catalog, index, embedder):
    rows = [(ex, c.id) for c in catalog for ex in c.examples]
    report = evaluate_retrieval(rows, index, embedder, catalog.categories())
    assert report.accuracy == 1.0


def test_empty_set_rejected(index, embedder):
    with pytest.raises(EmptySet):
        evaluate_retrieval([], index, embedder)


def test_unknown_gold_id_rejected(index, embedder):
    with pytest.raises(UnknownGoldId):
        evaluate_retrieval([("a query", "no_such_tool")], index, embedder)


def test_bundled_corpus_regression(catalog, index, embedder):
    rows = load_annotated_set(bundled_annotated_set())
    assert len(rows) == FROZEN_TOTAL
    report = evaluate_retrieval(rows, index, embedder, catalog.categories())
    assert report.total == FROZEN_TOTAL
    assert report.correct == FROZEN_CORRECT
    assert report.accuracy >= 0.80
    # Every category is represented and reported.
    assert set(report.per_category) == set(catalog.categories().values())


def test_corpus_evaluation_reproducible(catalog, index, embedder):
    rows = load_annotated_set(bundled_annotated_set())
    first = evaluate_retrieval(rows, index, embedder, catalog.categories())
    second = evaluate_retrieval(rows, index, embedder, catalog.categories())
    assert first == second


# --- remote embedder --------------------------------------------------------------


def test_remote_embedder_normalizes_and_pins_dimension():
    def handler(request: httpx.Request) -> httpx.Response:
        import json as json_mod

        assert json_mod.loads(request.content) == {"text": "show plan"}
        return httpx.Response(200, json={"vector": [3.0, 4.0]})

    remote = RemoteEmbedder("http://embed.test/v1", transport=httpx.MockTransport(handler))
    vector = remote.embed("show plan")
    assert vector == pytest.approx([0.6, 0.8])
    assert remote.dimension == 2


def test_remote_embedder_rejects_dimension_drift():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        size = 2 if calls["n"] == 1 else 3
        return httpx.Response(200, json={"vector": [1.0] * size})

    remote = RemoteEmbedder("http://embed.test/v1", transport=httpx.MockTransport(handler))
    remote.embed("first")
    with pytest.raises(EndpointUnavailable):
        remote.embed("second")


def test_remote_embedder_unavailable_endpoint():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    remote = RemoteEmbedder("http://embed.test/v1", transport=httpx.MockTransport(handler))
    with pytest.raises(EndpointUnavailable):
        remote.embed("anything")


def test_embedder_from_env():
    assert isinstance(embedder_from_env({}), HashedBagEmbedder)
    remote = embedder_from_env({"EMBED_ENDPOINT": "http://embed.test/v1"})
    assert isinstance(remote, RemoteEmbedder)
    assert remote.endpoint == "http://embed.test/v1"
