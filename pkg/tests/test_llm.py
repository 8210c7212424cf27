"""Gateway tasks: intent, refinement, parameter extraction, model selection."""

import httpx
import pytest

from planchat.contracts import ParamSpec, load_catalog
from planchat.llm import (
    CASUAL_CONVERSATION,
    CHAT_FALLBACK_REPLY,
    COMPLETION,
    LATEST_FALLBACK,
    MENTION,
    ONLY_CANDIDATE,
    OPERATIONS_PLANNING,
    UNDETERMINED,
    ClientFailure,
    HttpCompletionClient,
    StubClient,
    catalog_keywords,
    classify_intent,
    client_from_env,
    extract_parameters,
    first_balanced_block,
    load_templates,
    refine_response,
    select_model,
)
from planchat.resources import bundled_catalog_dir


class FakeClient:
    """Canned completion client for the parser tests."""

    def __init__(self, text=None, error=False):
        self.text = text
        self.error = error
        self.calls = 0

    def complete(self, prompt, max_tokens=256):
        self.calls += 1
        if self.error:
            raise ClientFailure("endpoint down")
        return self.text


@pytest.fixture(scope="module")
def catalog():
    return load_catalog(bundled_catalog_dir())


@pytest.fixture(scope="module")
def keywords(catalog, tire_plant_module):
    return catalog_keywords(catalog, tire_plant_module)


@pytest.fixture(scope="module")
def tire_plant_module():
    from planchat.dataset import parse_instance
    from planchat.resources import bundled_dataset_dir

    return parse_instance(bundled_dataset_dir())


STUB = StubClient()


# --- templates -------------------------------------------------------------------


def test_all_templates_load_and_declare_slots():
    templates = load_templates()
    assert set(templates) == {
        "intent_classification",
        "refine_response",
        "parameter_extraction",
        "model_selection",
    }
    filled = templates["intent_classification"].fill(
        conversation="user: hi", query="hello", options="A, B"
    )
    assert "hello" in filled and "A, B" in filled


# --- intent ----------------------------------------------------------------------


def test_stub_intent_planning_query(keywords):
    label = classify_intent([], "How many sets of tires are made today?", STUB, keywords)
    assert label == OPERATIONS_PLANNING


def test_stub_intent_greeting(keywords):
    assert classify_intent([], "hello!", STUB, keywords) == CASUAL_CONVERSATION


def test_stub_intent_plain_english_chitchat(keywords):
    label = classify_intent([], "so, when is the lunch break around here", STUB, keywords)
    assert label == CASUAL_CONVERSATION


def test_stub_intent_unknown_jargon_routes_to_planning(keywords):
    # Unknown vocabulary goes to the retrieval gate, which will log a tool gap.
    assert classify_intent([], "qqq zzz xxx", STUB, keywords) == OPERATIONS_PLANNING


def test_completion_intent_containment():
    client = FakeClient("The intent is operations_planning.")
    assert classify_intent([], "whatever", client) == OPERATIONS_PLANNING


def test_completion_intent_first_label_wins():
    client = FakeClient("CASUAL_CONVERSATION, definitely not OPERATIONS_PLANNING")
    assert classify_intent([], "whatever", client) == CASUAL_CONVERSATION


def test_completion_intent_unparseable_defaults_casual():
    assert classify_intent([], "whatever", FakeClient("no label here")) == CASUAL_CONVERSATION


def test_intent_degrades_on_client_failure():
    assert classify_intent([], "whatever", FakeClient(error=True)) == CASUAL_CONVERSATION


def test_intent_always_binary(keywords):
    for query in ("hello", "tires", "qqq", "the the the", "plan something"):
        label = classify_intent([], query, STUB, keywords)
        assert label in (CASUAL_CONVERSATION, OPERATIONS_PLANNING)


# --- refinement ------------------------------------------------------------------


def test_stub_refine_wraps_last_question():
    conversation = [("user", "status of order O1?")]
    text = refine_response(conversation, "0 hours extra delay", STUB)
    assert text == "Regarding your question: status of order O1? — 0 hours extra delay"


def test_stub_refine_contextualizes_delay_output():
    conversation = [("user", "what happens if order B is prioritized over order A?")]
    text = refine_response(conversation, "5 hours extra delay", STUB)
    assert "5 hours extra delay" in text
    assert "order" in text.lower()


def test_stub_refine_empty_marker_is_chat():
    assert refine_response([("user", "hello")], "", STUB) == CHAT_FALLBACK_REPLY


def test_refine_falls_back_on_client_failure():
    text = refine_response([("user", "hi")], "3 units short", FakeClient(error=True))
    assert text == "3 units short"


def test_refine_returns_trimmed_completion():
    client = FakeClient("  Order A slips by 5 hours if B goes first.  ")
    text = refine_response([("user", "hm")], "5 hours extra delay", client)
    assert text == "Order A slips by 5 hours if B goes first."


# --- parameter extraction -----------------------------------------------------------


ADD_RECEIPT_SCHEMA = (
    ParamSpec("material", "entity", True, "material being received", "material"),
    ParamSpec("quantity", "number", True, "kilograms received"),
    ParamSpec("date", "date", True, "arrival date"),
)


def test_stub_extracts_rubber_what_if(tire_plant_module):
    query = "How would receiving 100 kg of natural rubber on 2024-04-17 impact my plan?"
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], query, STUB, tire_plant_module
    )
    assert params == {"material": "natural_rubber", "quantity": 100.0, "date": "2024-04-17"}
    assert missing == []


def test_stub_extracts_nothing_from_bare_request(tire_plant_module):
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], "add a receipt", STUB, tire_plant_module
    )
    assert params == {}
    assert missing == ["material", "quantity", "date"]


def test_stub_number_not_confused_by_entity_digits(tire_plant_module):
    schema = (
        ParamSpec("order", "entity", True, "order", "order"),
        ParamSpec("date", "date", True, "new due date"),
    )
    params, missing = extract_parameters(
        schema, [], "move order O1 to 2024-04-20", STUB, tire_plant_module
    )
    assert params == {"order": "O1", "date": "2024-04-20"}
    assert missing == []


def test_stub_resolves_plan_ids_from_extras(tire_plant_module):
    schema = (
        ParamSpec("plan_a", "entity", True, "reference plan", "plan"),
        ParamSpec("plan_b", "entity", True, "new plan", "plan"),
    )
    extras = {"plan": [("baseline", "baseline"), ("plan-1", "receipt scenario")]}
    params, missing = extract_parameters(
        schema,
        [],
        "compare baseline with plan-1",
        STUB,
        tire_plant_module,
        extras,
    )
    assert params == {"plan_a": "baseline", "plan_b": "plan-1"}
    assert missing == []


def test_completion_extraction_validates_values(tire_plant_module):
    client = FakeClient('Sure: {"quantity": "abc", "date": "2024-04-17", "material": "natural rubber"}')
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], "irrelevant", client, tire_plant_module
    )
    assert params == {"date": "2024-04-17", "material": "natural_rubber"}
    assert missing == ["quantity"]


def test_completion_without_block_reports_all_required(tire_plant_module):
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], "x", FakeClient("no json at all"), tire_plant_module
    )
    assert params == {}
    assert missing == ["material", "quantity", "date"]


def test_completion_entity_never_fabricated(tire_plant_module):
    client = FakeClient('{"material": "unobtainium", "quantity": 5, "date": "2024-04-16"}')
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], "x", client, tire_plant_module
    )
    assert "material" in missing
    material_ids = {m.id for m in tire_plant_module.materials}
    assert all(
        params.get("material") is None or params["material"] in material_ids
        for _ in [0]
    )


def test_extraction_degrades_on_client_failure(tire_plant_module):
    params, missing = extract_parameters(
        ADD_RECEIPT_SCHEMA, [], "x", FakeClient(error=True), tire_plant_module
    )
    assert params == {}
    assert missing == ["material", "quantity", "date"]


def test_first_balanced_block():
    assert first_balanced_block('noise {"a": {"b": 1}} more') == '{"a": {"b": 1}}'
    assert first_balanced_block("no braces") is None
    assert first_balanced_block("{unclosed") is None


# --- model selection -----------------------------------------------------------------


class ExplodingClient:
    def complete(self, prompt, max_tokens=256):
        raise AssertionError("client must not be called")


def test_single_candidate_short_circuits():
    result = select_model([], [("baseline", "baseline")], ExplodingClient())
    assert result.id == "baseline"
    assert result.via == ONLY_CANDIDATE


def test_stub_selects_mentioned_scenario():
    conversation = [
        ("user", "run the restriction"),
        ("assistant", "done"),
        ("user", "now show me the Vancouver-only scenario results"),
    ]
    candidates = [("baseline", "baseline"), ("vancouver_only", "vancouver_only")]
    result = select_model(conversation, candidates, STUB)
    assert result.id == "vancouver_only"
    assert result.via == MENTION


def test_stub_most_recent_mention_wins():
    conversation = [
        ("user", "use plan-1 please"),
        ("user", "actually, back to the baseline"),
    ]
    candidates = [("baseline", "baseline"), ("plan-1", "scenario one")]
    result = select_model(conversation, candidates, STUB)
    assert result.id == "baseline"


def test_stub_no_mention_falls_back_to_latest():
    conversation = [("user", "show me the numbers")]
    candidates = [("baseline", "baseline"), ("plan-1", "scenario one")]
    result = select_model(conversation, candidates, STUB)
    assert result.id == "plan-1"
    assert result.via == LATEST_FALLBACK


def test_completion_selection_by_id():
    client = FakeClient("I think it is baseline.")
    result = select_model(
        [("user", "?")], [("baseline", "b"), ("plan-1", "p")], client
    )
    assert result.id == "baseline"
    assert result.via == COMPLETION


def test_completion_selection_no_match_undetermined():
    client = FakeClient("cannot tell")
    result = select_model(
        [("user", "?")], [("baseline", "b"), ("plan-1", "p")], client
    )
    assert result.id is None
    assert result.via == UNDETERMINED


def test_selection_undetermined_on_client_failure():
    result = select_model(
        [("user", "?")], [("a", "a"), ("b", "b")], FakeClient(error=True)
    )
    assert result.via == UNDETERMINED


# --- HTTP client ----------------------------------------------------------------------


def test_http_client_success():
    def handler(request: httpx.Request) -> httpx.Response:
        assert request.url.path == "/complete"
        import json as json_mod

        body = json_mod.loads(request.content)
        assert body["prompt"] == "ping"
        assert body["max_tokens"] == 256
        return httpx.Response(200, json={"text": "pong"})

    client = HttpCompletionClient(
        "http://llm.test/complete", transport=httpx.MockTransport(handler)
    )
    assert client.complete("ping") == "pong"


def test_http_client_retries_then_succeeds(monkeypatch):
    sleeps: list[float] = []
    monkeypatch.setattr("planchat.llm.time.sleep", sleeps.append)
    attempts = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        attempts["n"] += 1
        if attempts["n"] < 3:
            return httpx.Response(500)
        return httpx.Response(200, json={"text": "late pong"})

    client = HttpCompletionClient(
        "http://llm.test/complete", retries=2, transport=httpx.MockTransport(handler)
    )
    assert client.complete("ping") == "late pong"
    assert attempts["n"] == 3
    assert sleeps == [1, 2]  # exponential backoff between the three attempts


def test_http_client_exhausts_retries(monkeypatch):
    monkeypatch.setattr("planchat.llm.time.sleep", lambda _x: None)

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    client = HttpCompletionClient(
        "http://llm.test/complete", retries=1, transport=httpx.MockTransport(handler)
    )
    with pytest.raises(ClientFailure):
        client.complete("ping")


def test_client_from_env():
    assert isinstance(client_from_env({}), StubClient)
    client = client_from_env({"LLM_ENDPOINT": "http://llm.test/c", "LLM_TIMEOUT_S": "7"})
    assert isinstance(client, HttpCompletionClient)
    assert client.timeout == 7.0
