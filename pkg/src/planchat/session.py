"""Conversation session state: messages, saved models/plans, task log.

A session owns everything a planner accumulates while chatting: the loaded
dataset snapshots, named models (an instance plus the scenario moves applied
to it), solved plans, the ordered task log shown in the side panel, any
clarification still waiting for an answer, and the tool-gap log of queries
nothing in the catalog could serve.

Sessions are plain data and fully JSON-serializable so the service can
snapshot them to disk after every turn and reload them byte-identically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .dataset import PlanningInstance, instance_from_dict, instance_to_dict
from .planner import Plan, ScenarioSpec, plan_from_dict, plan_to_dict, scenario_from_dict, scenario_to_dict

RUNNING = "running"
DONE = "done"
FAILED = "failed"


class InvalidTransition(Exception):
    pass


@dataclass
class Message:
    role: str  # user | assistant
    text: str
    timestamp: float
    renderables: list[dict] = field(default_factory=list)
    steps: list[str] = field(default_factory=list)


@dataclass
class TaskRecord:
    seq: int
    tool_id: str
    status: str
    started: float
    finished: float | None = None
    summary: str = ""


@dataclass
class PendingClarification:
    tool_id: str
    collected: dict
    missing: list[str]
    attempts: int = 0


@dataclass
class ToolGapRecord:
    query: str
    best_tool_id: str
    best_distance: float
    timestamp: float


@dataclass
class ModelSpec:
    """A named optimization model: which instance it plans over, which
    scenario moves shape it, and the plan solved from it."""

    id: str
    name: str
    instance_id: str
    mods: tuple[ScenarioSpec, ...] = ()
    plan_id: str | None = None


@dataclass
class SessionState:
    session_id: str
    messages: list[Message] = field(default_factory=list)
    instances: dict[str, PlanningInstance] = field(default_factory=dict)
    models: dict[str, ModelSpec] = field(default_factory=dict)
    plans: dict[str, Plan] = field(default_factory=dict)
    task_log: list[TaskRecord] = field(default_factory=list)
    pending: PendingClarification | None = None
    tool_gaps: list[ToolGapRecord] = field(default_factory=list)
    plan_counter: int = 0

    def next_plan_id(self) -> str:
        self.plan_counter += 1
        return f"plan-{self.plan_counter}"

    def active_instance(self) -> PlanningInstance | None:
        """Most recently ingested instance, if any."""
        if not self.instances:
            return None
        return next(reversed(self.instances.values()))

    def newest_plan_ids(self) -> list[str]:
        """Plan ids in creation order (dict insertion order is creation order)."""
        return list(self.plans)

    def append_message(self, message: Message) -> None:
        self.messages.append(message)

    def conversation_pairs(self) -> list[tuple[str, str]]:
        return [(m.role, m.text) for m in self.messages]


def record_task(session: SessionState, tool_id: str, transition: str) -> TaskRecord:
    """Append a running record, or finish the latest running one for the tool.

    Valid transitions: "running" opens a record; "done"/"failed" close the
    most recent running record of that tool. Everything else is invalid, and
    finished records never change again.
    """
    now = time.time()
    if transition == RUNNING:
        record = TaskRecord(
            seq=len(session.task_log) + 1,
            tool_id=tool_id,
            status=RUNNING,
            started=now,
        )
        session.task_log.append(record)
        return record
    if transition not in (DONE, FAILED):
        raise InvalidTransition(f"unknown transition {transition!r}")
    for record in reversed(session.task_log):
        if record.tool_id == tool_id:
            if record.status != RUNNING:
                raise InvalidTransition(
                    f"task {record.seq} for {tool_id} is already {record.status}"
                )
            record.status = transition
            record.finished = max(now, record.started)
            return record
    raise InvalidTransition(f"no running task for {tool_id}")


# --- persistence -----------------------------------------------------------------


def session_to_dict(session: SessionState) -> dict:
    return {
        "session_id": session.session_id,
        "messages": [
            {
                "role": m.role,
                "text": m.text,
                "timestamp": m.timestamp,
                "renderables": m.renderables,
                "steps": m.steps,
            }
            for m in session.messages
        ],
        "instances": {key: instance_to_dict(i) for key, i in session.instances.items()},
        "models": [
            {
                "id": m.id,
                "name": m.name,
                "instance_id": m.instance_id,
                "mods": [scenario_to_dict(s) for s in m.mods],
                "plan_id": m.plan_id,
            }
            for m in session.models.values()
        ],
        "plans": {key: plan_to_dict(p) for key, p in session.plans.items()},
        "task_log": [
            {
                "seq": t.seq,
                "tool_id": t.tool_id,
                "status": t.status,
                "started": t.started,
                "finished": t.finished,
                "summary": t.summary,
            }
            for t in session.task_log
        ],
        "pending": None
        if session.pending is None
        else {
            "tool_id": session.pending.tool_id,
            "collected": session.pending.collected,
            "missing": session.pending.missing,
            "attempts": session.pending.attempts,
        },
        "tool_gaps": [
            {
                "query": g.query,
                "best_tool_id": g.best_tool_id,
                "best_distance": g.best_distance,
                "timestamp": g.timestamp,
            }
            for g in session.tool_gaps
        ],
        "plan_counter": session.plan_counter,
    }


def session_from_dict(payload: dict) -> SessionState:
    session = SessionState(session_id=payload["session_id"])
    session.messages = [
        Message(
            role=m["role"],
            text=m["text"],
            timestamp=m["timestamp"],
            renderables=m["renderables"],
            steps=m["steps"],
        )
        for m in payload["messages"]
    ]
    session.instances = {
        key: instance_from_dict(raw) for key, raw in payload["instances"].items()
    }
    session.models = {
        m["id"]: ModelSpec(
            id=m["id"],
            name=m["name"],
            instance_id=m["instance_id"],
            mods=tuple(scenario_from_dict(s) for s in m["mods"]),
            plan_id=m["plan_id"],
        )
        for m in payload["models"]
    }
    session.plans = {key: plan_from_dict(raw) for key, raw in payload["plans"].items()}
    session.task_log = [
        TaskRecord(
            seq=t["seq"],
            tool_id=t["tool_id"],
            status=t["status"],
            started=t["started"],
            finished=t["finished"],
            summary=t["summary"],
        )
        for t in payload["task_log"]
    ]
    raw_pending = payload["pending"]
    if raw_pending is not None:
        session.pending = PendingClarification(
            tool_id=raw_pending["tool_id"],
            collected=raw_pending["collected"],
            missing=raw_pending["missing"],
            attempts=raw_pending["attempts"],
        )
    session.tool_gaps = [
        ToolGapRecord(
            query=g["query"],
            best_tool_id=g["best_tool_id"],
            best_distance=g["best_distance"],
            timestamp=g["timestamp"],
        )
        for g in payload["tool_gaps"]
    ]
    session.plan_counter = payload["plan_counter"]
    return session
