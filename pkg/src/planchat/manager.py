"""Tool manager: prepare a validated invocation, then execute the handler.

Preparing an invocation means: pick the model (and with it the dataset) the
query refers to, extract the tool's parameters from the query and the
conversation, default plan references by recency, and validate the result
against the contract. Anything required that cannot be determined comes back
as MissingParams so the conversation layer can ask instead of guessing.

Scenario tools (what-if, why-not) are model-bound: they need a selected
model to mutate or restrict. Query, display, and compare tools work off
saved plans; a plan pins its own dataset, so no model selection happens and
"show me the plan" never stalls on which model the user means. With two or
more saved models and no mention of either, a scenario tool reports the
model itself as a missing parameter rather than silently defaulting.
"""

from __future__ import annotations

from dataclasses import dataclass

from .contracts import BoundCatalog, ToolContract, ToolOutput, render_nl_output
from .handlers import HandlerContext, HandlerError
from .llm import LATEST_FALLBACK, extract_parameters, select_model
from .session import SessionState

MODEL_BOUND_CATEGORIES = ("what_if", "why_not")
MODEL_PARAM = "model"
MODEL_PARAM_DESCRIPTION = "which saved model to start from (for example: baseline)"


class NoInstanceLoaded(Exception):
    pass


@dataclass(frozen=True)
class Invocation:
    tool_id: str
    model_id: str | None
    instance_id: str | None
    params: dict


@dataclass(frozen=True)
class MissingParams:
    missing: list[str]
    collected: dict


def _reference_instance(session: SessionState, instance_id: str | None):
    if instance_id is not None:
        return session.instances.get(instance_id)
    plan_ids = session.newest_plan_ids()
    if plan_ids:
        newest = session.plans[plan_ids[-1]]
        return session.instances.get(newest.instance_id)
    return session.active_instance()


def _default_plan_params(contract: ToolContract, params: dict, session: SessionState) -> None:
    """Fill absent plan-kind params by recency.

    With enough plans, the last such param gets the newest plan, the one
    before it the previous plan, and so on ("compare the new plan" pairs the
    newest against its predecessor). With fewer plans than params, earlier
    params are served first so it is the newest-plan slot that gets reported
    missing.
    """
    plan_specs = [
        s for s in contract.input if s.type == "entity" and s.entity_kind == "plan"
    ]
    absent = [s.name for s in plan_specs if s.name not in params]
    if not absent:
        return
    taken = {params[s.name] for s in plan_specs if s.name in params}
    free = [pid for pid in session.newest_plan_ids() if pid not in taken]
    if len(free) >= len(absent):
        free = free[len(free) - len(absent):]
    for name, plan_id in zip(absent, free):
        params[name] = plan_id


def prepare_invocation(
    catalog: BoundCatalog,
    contract: ToolContract,
    session: SessionState,
    query: str,
    client,
    collected: dict | None = None,
) -> Invocation | MissingParams:
    """Resolve model, extract and validate params, or name what is missing.

    ``collected`` carries parameters gathered in earlier clarification turns;
    newly extracted values win on conflict.
    """
    conversation = session.conversation_pairs()
    missing_model = False
    model_id: str | None = None
    instance_id: str | None = None

    if contract.category in MODEL_BOUND_CATEGORIES:
        if not session.models:
            raise NoInstanceLoaded("no dataset has been loaded into this session")
        candidates = [(m.id, m.name) for m in session.models.values()]
        selection = select_model(conversation, candidates, client)
        defaulted = selection.via == LATEST_FALLBACK and len(candidates) >= 2
        if selection.id is None or defaulted:
            missing_model = True
        else:
            model_id = selection.id
            instance_id = session.models[model_id].instance_id

    instance = _reference_instance(session, instance_id)
    extras = {
        "plan": [(pid, pid) for pid in session.plans],
        "model": [(m.id, m.name) for m in session.models.values()],
    }
    found, _ = extract_parameters(
        contract.input, conversation, query, client, instance, extras
    )
    params = dict(collected or {})
    params.update(found)

    _default_plan_params(contract, params, session)
    missing = [s.name for s in contract.input if s.required and s.name not in params]
    if missing_model:
        missing = [MODEL_PARAM] + missing
    if missing:
        return MissingParams(missing, params)

    if contract.category not in MODEL_BOUND_CATEGORIES:
        # A plan param pins the dataset; fall back to the newest ingested.
        for spec in contract.input:
            if spec.type == "entity" and spec.entity_kind == "plan" and spec.name in params:
                plan = session.plans.get(params[spec.name])
                if plan is not None:
                    instance_id = plan.instance_id
                    break
        if instance_id is None and session.instances:
            instance_id = next(reversed(session.instances))

    return Invocation(contract.id, model_id, instance_id, params)


def execute(catalog: BoundCatalog, session: SessionState, invocation: Invocation) -> ToolOutput:
    """Dispatch to the bound handler and shape its payload into a ToolOutput.

    The payload is checked against the contract's output schema; the NL
    template is filled from the scalar fields; table fields become the
    renderables.
    """
    contract = catalog.get(invocation.tool_id)
    handler = catalog.handler(contract)
    ctx = HandlerContext(
        session=session,
        contract=contract,
        params=dict(invocation.params),
        model_id=invocation.model_id,
        instance_id=invocation.instance_id,
    )
    try:
        payload = handler(ctx)
    except HandlerError:
        raise
    except Exception as err:
        raise HandlerError("execute", str(err)) from err

    renderables = []
    for spec in contract.output:
        if spec.name not in payload:
            raise HandlerError(
                "output", f"handler omitted declared field {spec.name!r}"
            )
        if spec.type == "table":
            table = payload[spec.name]
            width = len(spec.columns)
            if any(len(row) != width for row in table["rows"]):
                raise HandlerError("output", f"table {spec.name!r} row width mismatch")
            renderables.append(table)

    scalars = {
        spec.name: payload[spec.name] for spec in contract.output if spec.type != "table"
    }
    nl_text = render_nl_output(contract.nl_output, scalars)
    return ToolOutput(nl_text=nl_text, renderables=tuple(renderables), payload=payload)
