"""Executable handlers behind the bundled tool contracts.

Each handler receives a :class:`HandlerContext` (session, validated params,
selected model) and returns the payload dict matching its contract's output
schema; table-typed fields hold renderable table payloads. Scenario handlers
solve a new plan, store it in the session under a generated id, register a
model entry for it, and report the diff against the plan they started from.

A why-not move that turns the model infeasible (a hard deadline that cannot
be met) is not an error: the handler falls back to the elastic relaxation
and reports which constraints block the deadline and by how much.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

from .contracts import FieldSpec, ToolContract, format_value, make_table
from .dataset import PlanningInstance
from .planner import (
    WHAT_IF,
    WHY_NOT,
    AddReceipt,
    ChangeDueDate,
    HardDeadline,
    MaxProduction,
    Plan,
    PlannerError,
    RelaxationReport,
    RestrictToPlants,
    ScenarioSpec,
    SetCapacity,
    apply_what_if,
    build_lp,
    diff_plans,
    explain_delay,
    extract_plan,
    relax_infeasible,
)
from .session import ModelSpec, SessionState
from .simplex import INFEASIBLE, OPTIMAL, solve_lp


class HandlerError(Exception):
    def __init__(self, stage: str, detail: str):
        self.stage = stage
        self.detail = detail
        super().__init__(f"{stage}: {detail}")


@dataclass
class HandlerContext:
    session: SessionState
    contract: ToolContract
    params: dict
    model_id: str | None = None
    instance_id: str | None = None

    def plan(self, plan_id: str) -> Plan:
        try:
            return self.session.plans[plan_id]
        except KeyError:
            raise HandlerError("execute", f"no plan named {plan_id!r}") from None

    def model(self) -> ModelSpec:
        if self.model_id is None or self.model_id not in self.session.models:
            raise HandlerError("execute", "no model selected")
        return self.session.models[self.model_id]

    def table(self, field_name: str, rows: list[list]) -> dict:
        spec = self._field(field_name)
        return make_table(field_name, spec, rows)

    def _field(self, name: str) -> FieldSpec:
        for spec in self.contract.output:
            if spec.name == name:
                return spec
        raise HandlerError("execute", f"contract has no output field {name!r}")


def effective_instance(session: SessionState, plan: Plan) -> PlanningInstance:
    """The data the plan was actually solved on: base instance plus any
    what-if changes recorded in the plan's provenance."""
    try:
        instance = session.instances[plan.instance_id]
    except KeyError:
        raise HandlerError("execute", f"plan {plan.id} references unknown instance") from None
    if isinstance(plan.provenance, str):
        return instance
    for spec in plan.provenance:
        if spec.kind == WHAT_IF:
            instance = apply_what_if(instance, spec.change)
    return instance


def plan_restrictions(plan: Plan) -> tuple[ScenarioSpec, ...]:
    if isinstance(plan.provenance, str):
        return ()
    return tuple(s for s in plan.provenance if s.kind == WHY_NOT)


def _round(value: float, digits: int = 4) -> float:
    rounded = round(float(value), digits)
    return 0.0 if rounded == 0 else rounded


def _parse_date(ctx: HandlerContext, value: str) -> date:
    try:
        return date.fromisoformat(value)
    except (TypeError, ValueError):
        raise HandlerError("execute", f"bad date {value!r}") from None


def _tardiness_total(plan: Plan) -> float:
    return sum(plan.tardiness.values())


@dataclass
class ScenarioOutcome:
    plan: Plan | None
    base_plan: Plan
    relaxation: RelaxationReport | None = None  # set when infeasible


def run_scenario(ctx: HandlerContext, spec: ScenarioSpec, name: str) -> ScenarioOutcome:
    """Solve the selected model plus one more move; store plan and model.

    Infeasible outcomes return the elastic relaxation instead of a plan.
    """
    model = ctx.model()
    instance = ctx.session.instances[model.instance_id]
    mods = model.mods + (spec,)
    try:
        problem = build_lp(instance, mods)
    except PlannerError as err:
        raise HandlerError("build", str(err)) from err
    solution = solve_lp(problem)
    if model.plan_id is None or model.plan_id not in ctx.session.plans:
        raise HandlerError("execute", f"model {model.id} has no solved plan")
    base_plan = ctx.session.plans[model.plan_id]

    if solution.status == INFEASIBLE:
        report = relax_infeasible(problem)
        return ScenarioOutcome(None, base_plan, report)
    if solution.status != OPTIMAL:
        raise HandlerError("solve", f"solver finished with status {solution.status}")

    plan_id = ctx.session.next_plan_id()
    plan = extract_plan(instance, problem, solution, mods, plan_id)
    ctx.session.plans[plan_id] = plan
    ctx.session.models[plan_id] = ModelSpec(
        id=plan_id,
        name=name,
        instance_id=model.instance_id,
        mods=mods,
        plan_id=plan_id,
    )
    return ScenarioOutcome(plan, base_plan)


def _scenario_payload(ctx: HandlerContext, outcome: ScenarioOutcome) -> dict:
    """Shared fields of the what-if/why-not outputs: deltas and order table."""
    assert outcome.plan is not None
    diff = diff_plans(outcome.base_plan, outcome.plan)
    orders_rows = [
        [order_id, _round(outcome.base_plan.tardiness[order_id]), _round(outcome.plan.tardiness[order_id])]
        for order_id in sorted(outcome.base_plan.tardiness)
    ]
    return {
        "plan": outcome.plan.id,
        "objective_delta": _round(diff.objective_delta),
        "tardiness_delta": _round(sum(diff.per_order_tardiness_delta.values())),
        "orders_rows": orders_rows,
        "diff": diff,
    }


def _changes_table(ctx: HandlerContext, diff) -> dict:
    rows = [
        [plant, product, day.isoformat(), _round(old), _round(new)]
        for plant, product, day, old, new in diff.changed_cells
    ]
    return ctx.table("changes", rows)


# --- query_plan ----------------------------------------------------------------


def production_on_date(ctx: HandlerContext) -> dict:
    plan = ctx.plan(ctx.params["plan"])
    instance = effective_instance(ctx.session, plan)
    product_id = ctx.params["product"]
    day = _parse_date(ctx, ctx.params["date"])
    per_plant: dict[str, float] = {}
    for (plant_id, pid, d), units in plan.production.items():
        if pid == product_id and d == day:
            per_plant[plant_id] = per_plant.get(plant_id, 0.0) + units
    total = sum(per_plant.values())
    return {
        "units": _round(total),
        "product": instance.product(product_id).name,
        "date": day.isoformat(),
        "plan": plan.id,
        "by_plant": ctx.table(
            "by_plant", [[p, _round(u)] for p, u in sorted(per_plant.items())]
        ),
    }


def order_status(ctx: HandlerContext) -> dict:
    plan = ctx.plan(ctx.params["plan"])
    instance = effective_instance(ctx.session, plan)
    order_id = ctx.params["order"]
    order = instance.order(order_id)

    on_time = late = 0.0
    deliveries = []
    for (oid, day), units in sorted(plan.allocation.items(), key=lambda kv: kv[0][1]):
        if oid != order_id:
            continue
        days_late = max(0, (day - order.due_date).days)
        deliveries.append([day.isoformat(), _round(units), days_late])
        if days_late:
            late += units
        else:
            on_time += units
    short = plan.shortage.get(order_id, 0.0)

    explanation = explain_delay(
        instance, plan, order_id, mods=plan_restrictions(plan)
    )
    return {
        "order": order_id,
        "plan": plan.id,
        "on_time_units": _round(on_time),
        "late_units": _round(late),
        "short_units": _round(short),
        "delay_reason": explanation.reason.describe(),
        "deliveries": ctx.table("deliveries", deliveries),
    }


def material_inventory(ctx: HandlerContext) -> dict:
    plan = ctx.plan(ctx.params["plan"])
    instance = effective_instance(ctx.session, plan)
    material = instance.material(ctx.params["material"])
    asked = _parse_date(ctx, ctx.params["date"])

    consumption_of = {p.id: p.bom.get(material.id, 0.0) for p in instance.products}
    rows = []
    remaining = material.initial_inventory
    asked_remaining = material.initial_inventory
    for day in instance.horizon:
        received = material.receipts.get(day, 0.0)
        consumed = sum(
            consumption_of[pid] * units
            for (_, pid, d), units in plan.production.items()
            if d == day
        )
        remaining += received - consumed
        rows.append([day.isoformat(), _round(received), _round(consumed), _round(remaining)])
        if day <= asked:
            asked_remaining = remaining
    return {
        "kg": _round(asked_remaining),
        "material": material.name,
        "date": asked.isoformat(),
        "plan": plan.id,
        "by_day": ctx.table("by_day", rows),
    }


# --- why_not ----------------------------------------------------------------------


def restrict_to_plants(ctx: HandlerContext) -> dict:
    plant_id = ctx.params["plant"]
    spec = ScenarioSpec(WHY_NOT, RestrictToPlants(frozenset({plant_id})))
    outcome = run_scenario(ctx, spec, f"only {plant_id}")
    if outcome.plan is None:
        raise HandlerError("solve", "restriction makes the model infeasible")
    shared = _scenario_payload(ctx, outcome)
    return {
        "plan": shared["plan"],
        "plant": plant_id,
        "objective_delta": shared["objective_delta"],
        "tardiness_delta": shared["tardiness_delta"],
        "orders": ctx.table("orders", shared["orders_rows"]),
    }


def hard_deadline(ctx: HandlerContext) -> dict:
    order_id = ctx.params["order"]
    spec = ScenarioSpec(WHY_NOT, HardDeadline(order_id))
    outcome = run_scenario(ctx, spec, f"hard deadline {order_id}")
    if outcome.plan is not None:
        shared = _scenario_payload(ctx, outcome)
        delta = shared["objective_delta"]
        summary = (
            f"plan {shared['plan']} meets it; objective changes by {format_value(delta)}"
        )
        return {
            "order": order_id,
            "feasible": "yes",
            "summary": summary,
            "objective_delta": delta,
            "violations": ctx.table("violations", []),
        }
    report = outcome.relaxation
    rows = [[tag.label(), _round(amount)] for tag, amount in report.violated]
    delta = _round(report.relaxed_objective - outcome.base_plan.objective)
    noun = "constraint" if len(report.violated) == 1 else "constraints"
    summary = (
        f"no feasible plan exists; a minimum of {format_value(_round(report.total_violation))} "
        f"units of constraint violation remain across {len(report.violated)} {noun}"
    )
    return {
        "order": order_id,
        "feasible": "no",
        "summary": summary,
        "objective_delta": delta,
        "violations": ctx.table("violations", rows),
    }


def max_production(ctx: HandlerContext) -> dict:
    product_id = ctx.params["product"]
    units = float(ctx.params["units"])
    spec = ScenarioSpec(WHY_NOT, MaxProduction(product_id, units))
    outcome = run_scenario(ctx, spec, f"cap {product_id} at {format_value(units)}")
    if outcome.plan is None:
        raise HandlerError("solve", "production cap makes the model infeasible")
    shared = _scenario_payload(ctx, outcome)
    return {
        "plan": shared["plan"],
        "product": product_id,
        "units": _round(units),
        "objective_delta": shared["objective_delta"],
        "tardiness_delta": shared["tardiness_delta"],
        "orders": ctx.table("orders", shared["orders_rows"]),
    }


# --- what_if ---------------------------------------------------------------------


def add_receipt(ctx: HandlerContext) -> dict:
    material_id = ctx.params["material"]
    quantity = float(ctx.params["quantity"])
    day = _parse_date(ctx, ctx.params["date"])
    spec = ScenarioSpec(WHAT_IF, AddReceipt(material_id, day, quantity))
    outcome = run_scenario(
        ctx, spec, f"receipt +{format_value(quantity)} kg {material_id}"
    )
    if outcome.plan is None:
        raise HandlerError("solve", "receipt change makes the model infeasible")
    shared = _scenario_payload(ctx, outcome)
    return {
        "plan": shared["plan"],
        "material": material_id,
        "quantity": _round(quantity),
        "date": day.isoformat(),
        "objective_delta": shared["objective_delta"],
        "tardiness_delta": shared["tardiness_delta"],
        "changes": _changes_table(ctx, shared["diff"]),
    }


def change_capacity(ctx: HandlerContext) -> dict:
    plant_id = ctx.params["plant"]
    hours = float(ctx.params["hours"])
    day = _parse_date(ctx, ctx.params["date"])
    spec = ScenarioSpec(WHAT_IF, SetCapacity(plant_id, day, hours))
    outcome = run_scenario(
        ctx, spec, f"{plant_id} at {format_value(hours)} h on {day.isoformat()}"
    )
    if outcome.plan is None:
        raise HandlerError("solve", "capacity change makes the model infeasible")
    shared = _scenario_payload(ctx, outcome)
    return {
        "plan": shared["plan"],
        "plant": plant_id,
        "hours": _round(hours),
        "date": day.isoformat(),
        "objective_delta": shared["objective_delta"],
        "tardiness_delta": shared["tardiness_delta"],
        "changes": _changes_table(ctx, shared["diff"]),
    }


def change_due_date(ctx: HandlerContext) -> dict:
    order_id = ctx.params["order"]
    day = _parse_date(ctx, ctx.params["date"])
    spec = ScenarioSpec(WHAT_IF, ChangeDueDate(order_id, day))
    outcome = run_scenario(ctx, spec, f"{order_id} due {day.isoformat()}")
    if outcome.plan is None:
        raise HandlerError("solve", "due-date change makes the model infeasible")
    shared = _scenario_payload(ctx, outcome)
    return {
        "plan": shared["plan"],
        "order": order_id,
        "date": day.isoformat(),
        "objective_delta": shared["objective_delta"],
        "tardiness_delta": shared["tardiness_delta"],
        "changes": _changes_table(ctx, shared["diff"]),
    }


# --- compare_plan ------------------------------------------------------------------


def compare_plans(ctx: HandlerContext) -> dict:
    plan_a = ctx.plan(ctx.params["plan_a"])
    plan_b = ctx.plan(ctx.params["plan_b"])
    try:
        diff = diff_plans(plan_a, plan_b)
    except PlannerError as err:
        raise HandlerError("execute", str(err)) from err

    product_rows = []
    biggest: tuple[float, str] | None = None
    for product_id, delta in sorted(diff.per_product_total_delta.items()):
        units_a = plan_a.total_production(product_id)
        units_b = plan_b.total_production(product_id)
        product_rows.append(
            [product_id, _round(units_a), _round(units_b), _round(delta)]
        )
        if biggest is None or abs(delta) > abs(biggest[0]):
            biggest = (delta, product_id)

    if biggest is None or abs(biggest[0]) <= 1e-6:
        note = "Production totals are unchanged."
    else:
        delta, product_id = biggest
        direction = "more" if delta > 0 else "fewer"
        note = (
            f"{format_value(abs(_round(delta)))} {direction} units of {product_id} "
            f"are produced in {plan_b.id}."
        )

    order_rows = [
        [
            order_id,
            _round(plan_a.tardiness[order_id]),
            _round(plan_b.tardiness[order_id]),
            _round(delta),
        ]
        for order_id, delta in sorted(diff.per_order_tardiness_delta.items())
    ]
    return {
        "plan_a": plan_a.id,
        "plan_b": plan_b.id,
        "objective_delta": _round(diff.objective_delta),
        "production_note": note,
        "products": ctx.table("products", product_rows),
        "orders": ctx.table("orders", order_rows),
    }


# --- display_plan -----------------------------------------------------------------


def show_plan_table(ctx: HandlerContext) -> dict:
    plan = ctx.plan(ctx.params["plan"])
    instance = effective_instance(ctx.session, plan)
    schedule = [
        [plant, product, day.isoformat(), _round(units)]
        for (plant, product, day), units in sorted(
            plan.production.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])
        )
    ]
    daily: dict[str, float] = {day.isoformat(): 0.0 for day in instance.horizon}
    for (_, _, day), units in plan.production.items():
        daily[day.isoformat()] = daily.get(day.isoformat(), 0.0) + units
    return {
        "plan": plan.id,
        "total_units": _round(plan.total_production()),
        "days": len(instance.horizon),
        "objective": _round(plan.objective),
        "schedule": ctx.table("schedule", schedule),
        "daily_production": ctx.table(
            "daily_production", [[d, _round(u)] for d, u in sorted(daily.items())]
        ),
    }


def show_order_table(ctx: HandlerContext) -> dict:
    plan = ctx.plan(ctx.params["plan"])
    instance = effective_instance(ctx.session, plan)
    rows = []
    on_time_orders = 0
    for order in instance.orders:
        delivered_by_due = sum(
            units
            for (oid, day), units in plan.allocation.items()
            if oid == order.id and day <= order.due_date
        )
        tardiness = plan.tardiness.get(order.id, 0.0)
        shortage = plan.shortage.get(order.id, 0.0)
        if tardiness <= 1e-6 and shortage <= 1e-6:
            on_time_orders += 1
        rows.append(
            [
                order.id,
                order.product_id,
                _round(order.quantity),
                order.due_date.isoformat(),
                _round(delivered_by_due),
                _round(tardiness),
                _round(shortage),
            ]
        )
    return {
        "plan": plan.id,
        "on_time_orders": on_time_orders,
        "total_orders": len(instance.orders),
        "orders": ctx.table("orders", rows),
    }


REGISTRY = {
    "production_on_date": production_on_date,
    "order_status": order_status,
    "material_inventory": material_inventory,
    "restrict_to_plants": restrict_to_plants,
    "hard_deadline": hard_deadline,
    "max_production": max_production,
    "add_receipt": add_receipt,
    "change_capacity": change_capacity,
    "change_due_date": change_due_date,
    "compare_plans": compare_plans,
    "show_plan_table": show_plan_table,
    "show_order_table": show_order_table,
}
