"""Conversation engine: the full message-handling pipeline.

One user message flows through: pending-clarification resume (if any),
intent classification, tool retrieval with a confidence gate, invocation
preparation, execution, and response refinement. Every stage appends a
human-readable step to the trace the client renders as "Took N steps", and
every tool run lands in the session's task log.

Unsupported queries are not guessed at: a retrieval whose best distance
exceeds the threshold produces a tool-gap record (the raw material for a
consultant to author a new tool) plus an honest reply naming the nearest
existing tool.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .contracts import BoundCatalog, ToolContract, ToolOutput, bind_handlers, format_value, load_catalog
from .dataset import PlanningInstance, parse_instance
from .handlers import REGISTRY, HandlerError
from .llm import (
    CASUAL_CONVERSATION,
    OPERATIONS_PLANNING,
    catalog_keywords,
    classify_intent,
    client_from_env,
    refine_response,
)
from .manager import (
    MODEL_PARAM,
    MODEL_PARAM_DESCRIPTION,
    Invocation,
    MissingParams,
    NoInstanceLoaded,
    execute,
    prepare_invocation,
)
from .planner import solve_plan
from .resources import bundled_catalog_dir
from .retriever import CONFIDENCE_THRESHOLD, embedder_from_env, index_catalog, retrieve
from .session import (
    DONE,
    FAILED,
    RUNNING,
    Message,
    ModelSpec,
    PendingClarification,
    SessionState,
    ToolGapRecord,
    record_task,
)

MAX_CLARIFICATION_RETRIES = 2  # initial attempt plus two retries, then abandon


@dataclass
class AssistantResponse:
    text: str
    renderables: list[dict] = field(default_factory=list)
    steps: list[str] = field(default_factory=list)
    task_records: list = field(default_factory=list)


class Engine:
    """Stateless pipeline over stateful sessions.

    Holds the bound catalog, the retrieval index (built eagerly), the
    completion client, and the embedder. Sessions are passed in per call, so
    one engine serves any number of concurrent sessions.

    Defaults honor the environment: LLM_ENDPOINT / EMBED_ENDPOINT select the
    remote client and embedder; unset means fully offline stubs.
    """

    def __init__(
        self,
        catalog: BoundCatalog | None = None,
        embedder=None,
        client=None,
        threshold: float = CONFIDENCE_THRESHOLD,
    ):
        if catalog is None:
            catalog = bind_handlers(load_catalog(bundled_catalog_dir()), REGISTRY)
        self.catalog = catalog
        self.embedder = embedder if embedder is not None else embedder_from_env()
        self.index = index_catalog(catalog, self.embedder)
        self.client = client if client is not None else client_from_env()
        self.threshold = threshold
        self._keyword_cache: dict[str | None, frozenset[str]] = {}

    # --- session lifecycle -------------------------------------------------

    def create_session(self, session_id: str | None = None) -> SessionState:
        return SessionState(session_id=session_id or uuid.uuid4().hex[:12])

    def ingest_dataset(self, session: SessionState, dataset_dir: str | Path) -> str:
        """Load a dataset, solve its baseline plan, and register both."""
        instance = parse_instance(dataset_dir)
        return self.ingest_instance(session, instance)

    def ingest_instance(self, session: SessionState, instance: PlanningInstance) -> str:
        session.instances[instance.id] = instance
        plan_key = "baseline" if "baseline" not in session.plans else session.next_plan_id()
        plan = solve_plan(instance, plan_id=plan_key, provenance="baseline")
        session.plans[plan_key] = plan
        session.models[plan_key] = ModelSpec(
            id=plan_key,
            name=plan_key,
            instance_id=instance.id,
            mods=(),
            plan_id=plan_key,
        )
        return instance.id

    def _keywords(self, session: SessionState) -> frozenset[str]:
        instance = session.active_instance()
        key = instance.id if instance is not None else None
        if key not in self._keyword_cache:
            self._keyword_cache[key] = catalog_keywords(self.catalog, instance)
        return self._keyword_cache[key]

    # --- pipeline ------------------------------------------------------------

    def handle_message(self, session: SessionState, text: str) -> AssistantResponse:
        """Process one user turn; never raises, always answers."""
        if not text.strip():
            raise ValueError("message text must be non-empty")
        session.append_message(Message(role="user", text=text, timestamp=time.time()))

        if session.pending is not None:
            response = self._resume_clarification(session, text)
        else:
            response = self._fresh_turn(session, text)

        session.append_message(
            Message(
                role="assistant",
                text=response.text,
                timestamp=time.time(),
                renderables=list(response.renderables),
                steps=list(response.steps),
            )
        )
        return response

    def _fresh_turn(self, session: SessionState, text: str) -> AssistantResponse:
        steps: list[str] = []
        intent = classify_intent(
            session.conversation_pairs(), text, self.client, self._keywords(session)
        )
        steps.append(f"Classified intent as {intent}")

        if intent == CASUAL_CONVERSATION:
            reply = refine_response(session.conversation_pairs(), "", self.client)
            steps.append("Replied conversationally")
            return AssistantResponse(text=reply, steps=steps)

        result = retrieve(text, self.index, k=1, embedder=self.embedder, threshold=self.threshold)
        tool_id, distance = result.ranked[0]
        steps.append(f"Retrieved tool {tool_id} (distance {distance:.4f})")

        if not result.confident:
            gap = ToolGapRecord(
                query=text,
                best_tool_id=tool_id,
                best_distance=distance,
                timestamp=time.time(),
            )
            session.tool_gaps.append(gap)
            steps.append("Logged a tool gap for consultant review")
            contract = self.catalog.get(tool_id)
            reply = (
                "I don't have a tool that matches that request yet, so I've "
                f"logged it for review. The closest existing tool is "
                f"{tool_id}: {contract.description}"
            )
            return AssistantResponse(text=reply, steps=steps)

        contract = self.catalog.get(tool_id)
        return self._attempt_tool(session, contract, text, steps, collected=None)

    def _resume_clarification(self, session: SessionState, text: str) -> AssistantResponse:
        pending = session.pending
        assert pending is not None
        contract = self.catalog.get(pending.tool_id)
        steps = [f"Resumed clarification for {contract.id}"]
        session.pending = None  # re-set below if still incomplete
        return self._attempt_tool(
            session,
            contract,
            text,
            steps,
            collected=dict(pending.collected),
            attempts=pending.attempts,
        )

    def _attempt_tool(
        self,
        session: SessionState,
        contract: ToolContract,
        text: str,
        steps: list[str],
        collected: dict | None,
        attempts: int = 0,
    ) -> AssistantResponse:
        try:
            outcome = prepare_invocation(
                self.catalog, contract, session, text, self.client, collected
            )
        except NoInstanceLoaded as err:
            record_task(session, contract.id, RUNNING)
            record = record_task(session, contract.id, FAILED)
            record.summary = str(err)
            steps.append("Execution failed while preparing (no dataset loaded)")
            reply = (
                f"Sorry, I can't run {contract.id} yet: {err} "
                "Please load a dataset first."
            )
            return AssistantResponse(text=reply, steps=steps, task_records=[record])

        if isinstance(outcome, MissingParams):
            resuming = collected is not None
            if resuming and attempts >= MAX_CLARIFICATION_RETRIES:
                # Third failed attempt: stop asking.
                steps.append("Gave up on clarification after repeated attempts")
                reply = (
                    f"I still couldn't collect everything {contract.id} needs "
                    f"(missing: {', '.join(outcome.missing)}), so I'm setting it "
                    "aside. Feel free to start over with a fuller request."
                )
                return AssistantResponse(text=reply, steps=steps)
            session.pending = PendingClarification(
                tool_id=contract.id,
                collected=outcome.collected,
                missing=outcome.missing,
                attempts=attempts + 1 if resuming else 1,
            )
            steps.append(
                "Asked for missing parameters: " + ", ".join(outcome.missing)
            )
            reply = self.ask_clarification(session.pending)
            return AssistantResponse(text=reply, steps=steps)

        invocation = outcome
        described = self._describe_params(contract, invocation)
        steps.append(f"Extracted parameters: {described}" if described else "No parameters needed")
        if invocation.model_id is not None:
            steps.append(
                f"Selected model {invocation.model_id} (instance {invocation.instance_id})"
            )

        record = record_task(session, contract.id, RUNNING)
        try:
            output = execute(self.catalog, session, invocation)
        except HandlerError as err:
            record = record_task(session, contract.id, FAILED)
            record.summary = err.detail
            steps.append(f"Execution failed during {err.stage}")
            reply = (
                f"Sorry, the {contract.id} tool failed while running "
                f"({err.stage}): {err.detail}"
            )
            return AssistantResponse(text=reply, steps=steps, task_records=[record])

        record = record_task(session, contract.id, DONE)
        record.summary = output.nl_text
        steps.append(f"Executed {contract.id}")

        reply = refine_response(session.conversation_pairs(), output.nl_text, self.client)
        steps.append("Refined the tool output into a reply")
        return AssistantResponse(
            text=reply,
            renderables=list(output.renderables),
            steps=steps,
            task_records=[record],
        )

    def _describe_params(self, contract: ToolContract, invocation: Invocation) -> str:
        parts = []
        for spec in contract.input:
            if spec.name in invocation.params:
                parts.append(f"{spec.name}={format_value(invocation.params[spec.name])}")
        return ", ".join(parts)

    def ask_clarification(self, pending: PendingClarification) -> str:
        """Deterministic question: confirm the tool, enumerate what is missing."""
        contract = self.catalog.get(pending.tool_id)
        descriptions = {spec.name: spec.description for spec in contract.input}
        descriptions[MODEL_PARAM] = MODEL_PARAM_DESCRIPTION
        wanted = "; ".join(
            f"{name} ({descriptions.get(name, name)})" for name in pending.missing
        )
        return (
            f"I think you want the {contract.id} tool. To run it I still need: "
            f"{wanted}. Could you provide that?"
        )
