"""Language-model gateway: prompt templates, clients, and robust parsers.

Four narrow tasks go through a completion endpoint: intent classification,
response refinement, parameter extraction, and model selection. Each task
has a prompt template (an editable text file, so wording can be iterated
without touching code) and a parser that tolerates chatty completions.

Every task also has a deterministic rule-based path used when no endpoint is
configured (the :class:`StubClient`). That path keeps the whole pipeline
runnable and testable offline, and doubles as the degraded mode when the
endpoint fails.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Protocol, Sequence

from .contracts import ParamSpec
from .dataset import AmbiguousMention, EntityRef, NoMatch, PlanningInstance, resolve_entity
from .resources import bundled_prompt_dir
from .retriever import STOP_WORDS, content_tokens, tokenize

CASUAL_CONVERSATION = "CASUAL_CONVERSATION"
OPERATIONS_PLANNING = "OPERATIONS_PLANNING"
INTENT_OPTIONS = (CASUAL_CONVERSATION, OPERATIONS_PLANNING)

CONVERSATION_TAIL = 10  # messages of context fed into prompts

# Greetings and pleasantries the offline intent rule treats as chat.
SMALLTALK = frozenset(
    """hello hi hey howdy greetings thanks thank bye goodbye morning afternoon
    evening night welcome cheers please sorry yes no ok okay cool nice great
    good fine sure""".split()
)

CHAT_FALLBACK_REPLY = (
    "Happy to help with your production planning. Ask me about the plan, "
    "orders, materials, or try a what-if scenario."
)

_DATE_PATTERN = re.compile(r"\b\d{4}-\d{2}-\d{2}\b")
_NUMBER_PATTERN = re.compile(r"\b\d+(?:\.\d+)?\b")

# Category nouns that must not resolve as entity mentions by substring
# ("the new plan" is not a reference to the id "plan-1").
_GENERIC_MENTIONS = frozenset(
    "plan plans scenario scenarios model models schedule schedules".split()
)

TEMPLATE_SLOTS = {
    "intent_classification": ("conversation", "query", "options"),
    "refine_response": ("conversation", "tool_output"),
    "parameter_extraction": ("conversation", "query", "schema"),
    "model_selection": ("conversation", "query", "candidates"),
}


class GatewayError(Exception):
    pass


class ClientFailure(GatewayError):
    pass


class UnknownTemplate(GatewayError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    def fill(self, **slots: str) -> str:
        allowed = set(TEMPLATE_SLOTS[self.name])
        if set(slots) - allowed:
            raise GatewayError(f"template {self.name} does not take {set(slots) - allowed}")
        out = self.text
        for key, value in slots.items():
            out = out.replace("{" + key + "}", value)
        return out


def load_templates(prompt_dir: str | Path | None = None) -> dict[str, PromptTemplate]:
    root = Path(prompt_dir) if prompt_dir else bundled_prompt_dir()
    templates: dict[str, PromptTemplate] = {}
    for name, slots in TEMPLATE_SLOTS.items():
        path = root / f"{name}.txt"
        if not path.is_file():
            raise UnknownTemplate(f"missing prompt template {path.name}")
        text = path.read_text(encoding="utf-8")
        used = set(re.findall(r"\{([a-z_]+)\}", text))
        if not used <= set(slots):
            raise UnknownTemplate(
                f"template {name} uses undeclared slots {sorted(used - set(slots))}"
            )
        templates[name] = PromptTemplate(name, text)
    return templates


_TEMPLATES: dict[str, PromptTemplate] | None = None


def _template(name: str) -> PromptTemplate:
    global _TEMPLATES
    if _TEMPLATES is None:
        _TEMPLATES = load_templates()
    return _TEMPLATES[name]


class CompletionClient(Protocol):
    def complete(self, prompt: str, max_tokens: int = 256) -> str: ...


class StubClient:
    """Marker for offline mode; the gateway answers with rule-based logic."""


class HttpCompletionClient:
    """POST {"prompt", "max_tokens"} -> {"text"} with retries and backoff.

    A call never blocks longer than timeout * (retries + 1) plus the fixed
    1 s / 2 s backoff pauses.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retries: int = 2,
        transport=None,
    ):
        import httpx

        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self._client = httpx.Client(transport=transport, timeout=timeout)

    def complete(self, prompt: str, max_tokens: int = 256) -> str:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(2 ** (attempt - 1))  # 1 s then 2 s
            try:
                response = self._client.post(
                    self.endpoint,
                    json={"prompt": prompt, "max_tokens": max_tokens},
                )
                response.raise_for_status()
                return str(response.json()["text"])
            except Exception as err:
                last_error = err
        raise ClientFailure(str(last_error))


def client_from_env(env: dict | None = None) -> CompletionClient:
    """LLM_ENDPOINT set -> HTTP client; unset -> offline stub."""
    env = dict(os.environ if env is None else env)
    endpoint = env.get("LLM_ENDPOINT", "").strip()
    if not endpoint:
        return StubClient()
    timeout = float(env.get("LLM_TIMEOUT_S", "30"))
    return HttpCompletionClient(endpoint, timeout=timeout)


def is_stub(client) -> bool:
    return client is None or isinstance(client, StubClient)


def _render_conversation(conversation: Sequence[tuple[str, str]]) -> str:
    tail = list(conversation)[-CONVERSATION_TAIL:]
    return "\n".join(f"{role}: {text}" for role, text in tail) or "(empty)"


def _last_user_text(conversation: Sequence[tuple[str, str]]) -> str:
    for role, text in reversed(list(conversation)):
        if role == "user":
            return text
    return ""


def catalog_keywords(catalog, instance: PlanningInstance | None = None) -> frozenset[str]:
    """Vocabulary that marks a query as operations talk: tool example tokens
    plus the ids and names of everything in the active instance."""
    words: set[str] = set()
    for contract in catalog:
        for example in contract.examples:
            words.update(content_tokens(example))
    if instance is not None:
        for name in instance.entity_names():
            words.update(content_tokens(name))
    return frozenset(words)


# --- intent classification ------------------------------------------------------


def classify_intent(
    conversation: Sequence[tuple[str, str]],
    query: str,
    client: CompletionClient | StubClient,
    keywords: frozenset[str] = frozenset(),
) -> str:
    """One of the two intent labels, always; failures degrade to casual.

    Offline rule: a catalog/instance keyword makes it planning talk;
    smalltalk or ordinary function words make it casual; a query made of
    tokens we have never seen anywhere is treated as a planning attempt so
    the retrieval confidence gate gets to judge (and log) it.
    """
    if not query.strip():
        raise GatewayError("query must be non-empty")
    if is_stub(client):
        tokens = set(tokenize(query))
        if tokens & keywords:
            return OPERATIONS_PLANNING
        if tokens & SMALLTALK:
            return CASUAL_CONVERSATION
        if tokens & STOP_WORDS:
            return CASUAL_CONVERSATION
        return OPERATIONS_PLANNING

    prompt = _template("intent_classification").fill(
        conversation=_render_conversation(conversation),
        query=query,
        options=", ".join(INTENT_OPTIONS),
    )
    try:
        completion = client.complete(prompt)
    except ClientFailure:
        return CASUAL_CONVERSATION
    lowered = completion.lower()
    positions = {
        label: lowered.find(label.lower())
        for label in INTENT_OPTIONS
        if lowered.find(label.lower()) >= 0
    }
    if not positions:
        return CASUAL_CONVERSATION
    return min(positions, key=positions.get)


# --- response refinement -----------------------------------------------------------


def refine_response(
    conversation: Sequence[tuple[str, str]],
    tool_nl_text: str,
    client: CompletionClient | StubClient,
) -> str:
    """Contextualize a tool's raw sentence; empty text means plain chat."""
    if is_stub(client):
        if not tool_nl_text:
            return CHAT_FALLBACK_REPLY
        question = _last_user_text(conversation)
        if not question:
            return tool_nl_text
        return f"Regarding your question: {question} — {tool_nl_text}"

    prompt = _template("refine_response").fill(
        conversation=_render_conversation(conversation),
        tool_output=tool_nl_text or "(none)",
    )
    try:
        return client.complete(prompt).strip()
    except ClientFailure:
        return tool_nl_text


# --- parameter extraction ------------------------------------------------------------


def _normalize(text: str) -> str:
    return " ".join(tokenize(text))


def _resolve_in_extras(mention: str, entries: Sequence[tuple[str, str]]):
    """Same matching ladder as resolve_entity, over (id, name) pairs.

    Comparison is on normalized text so "plan 1" still hits id "plan-1".
    """
    needle = _normalize(mention)
    if not needle:
        return None
    normalized = [(e[0], _normalize(e[0]), _normalize(e[1])) for e in entries]
    exact = [e for e in normalized if needle in (e[1], e[2])]
    if len(exact) == 1:
        return exact[0][0]
    if len(exact) > 1:
        return None
    partial = [e for e in normalized if needle in e[1] or needle in e[2]]
    if len(partial) == 1:
        return partial[0][0]
    return None


def _resolve_entity_value(
    mention: str,
    kind: str,
    instance: PlanningInstance | None,
    extra_entities: dict[str, Sequence[tuple[str, str]]],
) -> str | None:
    if kind in extra_entities:
        return _resolve_in_extras(mention, extra_entities[kind])
    if instance is None:
        return None
    try:
        ref = resolve_entity(mention, instance, kinds=(kind,))
    except (AmbiguousMention, ValueError):
        return None
    if isinstance(ref, NoMatch):
        return None
    return ref.entity_id


def _validate_value(
    spec: ParamSpec,
    value,
    instance: PlanningInstance | None,
    extra_entities: dict[str, Sequence[tuple[str, str]]],
):
    """Coerce to a JSON-safe primitive; None when the value does not check out."""
    if value is None:
        return None
    if spec.type == "date":
        try:
            return date.fromisoformat(str(value).strip()).isoformat()
        except ValueError:
            return None
    if spec.type == "number":
        try:
            number = float(value)
        except (TypeError, ValueError):
            return None
        if number != number or number in (float("inf"), float("-inf")):
            return None
        return number
    if spec.type == "enum":
        text = str(value).strip().lower()
        for allowed in spec.values:
            if text == allowed.lower():
                return allowed
        return None
    if spec.type == "entity":
        return _resolve_entity_value(str(value), spec.entity_kind or "", instance, extra_entities)
    return str(value)


def _stub_extract(
    schema: Sequence[ParamSpec],
    query: str,
    instance: PlanningInstance | None,
    extra_entities: dict[str, Sequence[tuple[str, str]]],
) -> dict:
    found: dict[str, object] = {}

    dates = _DATE_PATTERN.findall(query)
    remainder = _DATE_PATTERN.sub(" ", query)
    numbers = _NUMBER_PATTERN.findall(remainder)

    tokens = tokenize(query)

    def entity_matches(kind: str) -> list[str]:
        """Resolved ids in query order; longest n-gram wins at each position."""
        claimed: list[tuple[int, int]] = []
        matches: list[tuple[int, str]] = []
        max_n = min(4, len(tokens))
        for n in range(max_n, 0, -1):
            for start in range(0, len(tokens) - n + 1):
                end = start + n
                if any(start < c_end and end > c_start for c_start, c_end in claimed):
                    continue
                gram = " ".join(tokens[start:end])
                if n == 1 and (gram in STOP_WORDS or gram in _GENERIC_MENTIONS):
                    continue  # "on" would substring-match "toronto"
                resolved = _resolve_entity_value(gram, kind, instance, extra_entities)
                if resolved is not None and resolved not in (m[1] for m in matches):
                    matches.append((start, resolved))
                    claimed.append((start, end))
        return [rid for _, rid in sorted(matches)]

    date_cursor = 0
    number_cursor = 0
    entity_cursor: dict[str, int] = {}
    entity_found: dict[str, list[str]] = {}
    for spec in schema:
        if spec.type == "date":
            while date_cursor < len(dates):
                value = _validate_value(spec, dates[date_cursor], instance, extra_entities)
                date_cursor += 1
                if value is not None:
                    found[spec.name] = value
                    break
        elif spec.type == "number" and number_cursor < len(numbers):
            value = _validate_value(spec, numbers[number_cursor], instance, extra_entities)
            if value is not None:
                found[spec.name] = value
                number_cursor += 1
        elif spec.type == "entity":
            kind = spec.entity_kind or ""
            if kind not in entity_found:
                entity_found[kind] = entity_matches(kind)
                entity_cursor[kind] = 0
            if entity_cursor[kind] < len(entity_found[kind]):
                found[spec.name] = entity_found[kind][entity_cursor[kind]]
                entity_cursor[kind] += 1
        elif spec.type == "enum":
            lowered = set(tokens)
            for allowed in spec.values:
                if allowed.lower() in lowered:
                    found[spec.name] = allowed
                    break
    return found


def first_balanced_block(text: str) -> str | None:
    """The first balanced {...} block, or None."""
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def extract_parameters(
    schema: Sequence[ParamSpec],
    conversation: Sequence[tuple[str, str]],
    query: str,
    client: CompletionClient | StubClient,
    instance: PlanningInstance | None = None,
    extra_entities: dict[str, Sequence[tuple[str, str]]] | None = None,
) -> tuple[dict, list[str]]:
    """Fill the tool's parameters from the query; report required absentees.

    Values are JSON-safe primitives: dates as ISO strings, numbers as floats,
    entities as resolved ids (never fabricated: an entity value that does not
    resolve is discarded and reported missing).
    """
    extra_entities = extra_entities or {}

    if is_stub(client):
        found = _stub_extract(schema, query, instance, extra_entities)
    else:
        schema_lines = "\n".join(
            f"- {spec.name} ({spec.type}"
            + (f" of kind {spec.entity_kind}" if spec.type == "entity" else "")
            + (f", one of {', '.join(spec.values)}" if spec.type == "enum" else "")
            + (", required" if spec.required else ", optional")
            + f"): {spec.description}"
            for spec in schema
        )
        prompt = _template("parameter_extraction").fill(
            conversation=_render_conversation(conversation),
            query=query,
            schema=schema_lines,
        )
        found = {}
        try:
            completion = client.complete(prompt)
            block = first_balanced_block(completion)
            if block is not None:
                try:
                    raw = json.loads(block)
                except json.JSONDecodeError:
                    raw = {}
                if isinstance(raw, dict):
                    by_name = {spec.name: spec for spec in schema}
                    for name, value in raw.items():
                        spec = by_name.get(name)
                        if spec is None:
                            continue
                        validated = _validate_value(spec, value, instance, extra_entities)
                        if validated is not None:
                            found[name] = validated
        except ClientFailure:
            found = {}

    missing = [spec.name for spec in schema if spec.required and spec.name not in found]
    return found, missing


# --- model selection -----------------------------------------------------------------


UNDETERMINED = "undetermined"
ONLY_CANDIDATE = "only_candidate"
MENTION = "mention"
COMPLETION = "completion"
LATEST_FALLBACK = "latest_fallback"


@dataclass(frozen=True)
class SelectionResult:
    """Chosen candidate id plus how it was chosen; id None when undetermined."""

    id: str | None
    via: str


def select_model(
    conversation: Sequence[tuple[str, str]],
    candidates: Sequence[tuple[str, str]],
    client: CompletionClient | StubClient,
) -> SelectionResult:
    """Pick which saved model/plan the user means.

    Candidates are (id, name) in creation order. A single candidate returns
    immediately with no client call. The offline rule scans the most recent
    messages first for an id or name mention; with no mention anywhere it
    falls back to the most recently created candidate, flagged as such so
    callers can decide whether a default is acceptable.
    """
    if not candidates:
        raise GatewayError("candidates must be non-empty")
    if len(candidates) == 1:
        return SelectionResult(candidates[0][0], ONLY_CANDIDATE)

    if is_stub(client):
        normalized = [
            (cid, _normalize(cid), _normalize(name)) for cid, name in candidates
        ]
        for _, text in reversed(list(conversation)):
            hay = _normalize(text)
            best: tuple[int, str] | None = None
            for cid, norm_id, norm_name in normalized:
                position = -1
                if norm_id and norm_id in hay:
                    position = hay.rfind(norm_id)
                if norm_name and norm_name in hay:
                    position = max(position, hay.rfind(norm_name))
                if position >= 0 and (best is None or position > best[0]):
                    best = (position, cid)
            if best is not None:
                return SelectionResult(best[1], MENTION)
        return SelectionResult(candidates[-1][0], LATEST_FALLBACK)

    listing = "\n".join(f"{cid}: {name}" for cid, name in candidates)
    prompt = _template("model_selection").fill(
        conversation=_render_conversation(conversation),
        query=_last_user_text(conversation),
        candidates=listing,
    )
    try:
        completion = client.complete(prompt)
    except ClientFailure:
        return SelectionResult(None, UNDETERMINED)
    for cid, _name in candidates:
        if cid in completion:
            return SelectionResult(cid, COMPLETION)
    lowered = completion.lower()
    for cid, name in candidates:
        if name and name.lower() in lowered:
            return SelectionResult(cid, COMPLETION)
    return SelectionResult(None, UNDETERMINED)
