"""Production-planning model: LP construction, solving, and plan analytics.

The planning model decides per-day production x[plant, product, day],
per-day order deliveries a[order, day], and per-order shortfall s[order]:

    min   sum_o w_o * days_late(t) * a[o,t]   (tardiness)
        + PI * sum_o s[o]                     (shortage, PI >> any weight)
        + sum cost[p,i] * x[p,i,t]            (production cost)

    s.t.  capacity:  sum_i proc[p,i] * x[p,i,t] <= cap[p,t]          all p,t
          material:  cumulative consumption(m, t) <= cumulative supply(m, t)
          linking:   cumulative deliveries(i, t) <= cumulative production(i, t)
          demand:    sum_t a[o,t] + s[o] = quantity(o)               all o

Everything is continuous, so the baseline is always feasible (shortage soaks
demand) and scenario analysis stays a pure LP. Hard infeasibility only
appears under hard-deadline restrictions, which is what the elastic
relaxation is for.

Scenario changes come in two families: data changes (what-if) that mutate a
copy of the instance before the LP is built, and restrictions (why-not) that
reshape the model itself by deleting columns or adding rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .dataset import Material, Order, PlanningInstance
from .simplex import (
    EQ,
    GE,
    LE,
    OPTIMAL,
    ConstraintTag,
    LPProblem,
    LPSolution,
    solve_lp,
)

SHORTAGE_WEIGHT_FACTOR = 1e4
TIGHT_TOL = 1e-6


class PlannerError(Exception):
    pass


class UnknownEntity(PlannerError):
    def __init__(self, kind: str, entity_id: str):
        self.kind = kind
        self.entity_id = entity_id
        super().__init__(f"unknown {kind} {entity_id!r}")


class EmptyHorizon(PlannerError):
    pass


class DateOutsideHorizon(PlannerError):
    def __init__(self, day: date):
        self.day = day
        super().__init__(f"{day} is outside the planning horizon")


class NegativeQuantity(PlannerError):
    pass


class NotOptimal(PlannerError):
    def __init__(self, status: str):
        self.status = status
        super().__init__(f"no plan to extract: solver status is {status}")


class UnknownOrder(PlannerError):
    def __init__(self, order_id: str):
        self.order_id = order_id
        super().__init__(f"unknown order {order_id!r}")


class IncompatiblePlans(PlannerError):
    pass


class SolveFailed(PlannerError):
    def __init__(self, status: str):
        self.status = status
        super().__init__(f"solver finished with status {status}")


# --- scenario moves -----------------------------------------------------------

WHAT_IF = "what_if"
WHY_NOT = "why_not"


@dataclass(frozen=True)
class AddReceipt:
    material_id: str
    day: date
    kg: float


@dataclass(frozen=True)
class SetCapacity:
    plant_id: str
    day: date
    hours: float


@dataclass(frozen=True)
class ChangeOrderQty:
    order_id: str
    quantity: float


@dataclass(frozen=True)
class ChangeDueDate:
    order_id: str
    day: date


@dataclass(frozen=True)
class RestrictToPlants:
    plant_ids: frozenset[str]


@dataclass(frozen=True)
class ForbidPlant:
    plant_id: str


@dataclass(frozen=True)
class HardDeadline:
    order_id: str


@dataclass(frozen=True)
class MaxProduction:
    product_id: str
    units: float


DataChange = AddReceipt | SetCapacity | ChangeOrderQty | ChangeDueDate
Restriction = RestrictToPlants | ForbidPlant | HardDeadline | MaxProduction


@dataclass(frozen=True)
class ScenarioSpec:
    """One scenario move: kind 'what_if' carries a DataChange, 'why_not' a Restriction."""

    kind: str
    change: DataChange | Restriction

    def describe(self) -> str:
        c = self.change
        if isinstance(c, AddReceipt):
            return f"receipt +{_fmt(c.kg)} kg {c.material_id} on {c.day.isoformat()}"
        if isinstance(c, SetCapacity):
            return f"capacity {c.plant_id} = {_fmt(c.hours)} h on {c.day.isoformat()}"
        if isinstance(c, ChangeOrderQty):
            return f"order {c.order_id} quantity -> {_fmt(c.quantity)}"
        if isinstance(c, ChangeDueDate):
            return f"order {c.order_id} due -> {c.day.isoformat()}"
        if isinstance(c, RestrictToPlants):
            return "only plants: " + ", ".join(sorted(c.plant_ids))
        if isinstance(c, ForbidPlant):
            return f"without plant {c.plant_id}"
        if isinstance(c, HardDeadline):
            return f"hard deadline on {c.order_id}"
        if isinstance(c, MaxProduction):
            return f"at most {_fmt(c.units)} units of {c.product_id}"
        return str(c)


def _fmt(value: float) -> str:
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    return text if text else "0"


_CHANGE_TYPES = {
    "add_receipt": AddReceipt,
    "set_capacity": SetCapacity,
    "change_order_qty": ChangeOrderQty,
    "change_due_date": ChangeDueDate,
    "restrict_to_plants": RestrictToPlants,
    "forbid_plant": ForbidPlant,
    "hard_deadline": HardDeadline,
    "max_production": MaxProduction,
}
_CHANGE_NAMES = {cls: name for name, cls in _CHANGE_TYPES.items()}


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    payload: dict = {"kind": spec.kind, "change": _CHANGE_NAMES[type(spec.change)]}
    for key, value in vars(spec.change).items():
        if isinstance(value, date):
            payload[key] = value.isoformat()
        elif isinstance(value, frozenset):
            payload[key] = sorted(value)
        else:
            payload[key] = value
    return payload


def scenario_from_dict(payload: dict) -> ScenarioSpec:
    cls = _CHANGE_TYPES[payload["change"]]
    kwargs = {}
    for f in cls.__dataclass_fields__.values():  # type: ignore[attr-defined]
        raw = payload[f.name]
        if f.name == "day":
            kwargs[f.name] = date.fromisoformat(raw)
        elif f.name == "plant_ids":
            kwargs[f.name] = frozenset(raw)
        else:
            kwargs[f.name] = raw
    return ScenarioSpec(kind=payload["kind"], change=cls(**kwargs))


# --- plan and analysis result types ------------------------------------------


@dataclass(frozen=True)
class Plan:
    """A solved schedule: production, deliveries, and per-order outcomes."""

    id: str
    instance_id: str
    production: dict[tuple[str, str, date], float]
    allocation: dict[tuple[str, date], float]
    tardiness: dict[str, float]
    shortage: dict[str, float]
    objective: float
    objective_breakdown: dict[str, float]
    provenance: str | tuple[ScenarioSpec, ...]

    def total_production(self, product_id: str | None = None) -> float:
        return sum(
            units
            for (_, prod, _), units in self.production.items()
            if product_id is None or prod == product_id
        )


@dataclass(frozen=True)
class RelaxationReport:
    total_violation: float
    violated: tuple[tuple[ConstraintTag, float], ...]
    relaxed_objective: float


@dataclass(frozen=True)
class PlanDiff:
    objective_delta: float
    per_product_total_delta: dict[str, float]
    per_order_tardiness_delta: dict[str, float]
    changed_cells: tuple[tuple[str, str, date, float, float], ...]


NOT_TARDY = "not_tardy"
MATERIAL_SHORTAGE = "material_shortage"
CAPACITY_SHORTAGE = "capacity_shortage"
MATERIAL_AND_CAPACITY_SHORTAGE = "material_and_capacity_shortage"
COMPETING_ORDERS = "competing_orders"


@dataclass(frozen=True)
class DelayReason:
    kind: str
    materials: tuple[str, ...] = ()
    plants: tuple[str, ...] = ()

    def describe(self) -> str:
        if self.kind == NOT_TARDY:
            return "the order is on time"
        if self.kind == MATERIAL_SHORTAGE:
            return "material shortage: " + ", ".join(self.materials)
        if self.kind == CAPACITY_SHORTAGE:
            return "capacity shortage at: " + ", ".join(self.plants)
        if self.kind == MATERIAL_AND_CAPACITY_SHORTAGE:
            return (
                "material shortage: "
                + ", ".join(self.materials)
                + " and capacity shortage at: "
                + ", ".join(self.plants)
            )
        return "competing orders consume the shared capacity and materials"


@dataclass(frozen=True)
class DelayExplanation:
    order_id: str
    tardy_units: float
    reason: DelayReason
    evidence: dict[str, float]  # objective of each diagnostic re-solve


# --- what-if data changes -----------------------------------------------------


def apply_what_if(instance: PlanningInstance, change: DataChange) -> PlanningInstance:
    """Return a new instance with the data change applied; the input is untouched."""
    horizon = instance.horizon
    if isinstance(change, AddReceipt):
        material = _require_material(instance, change.material_id)
        if change.kg < 0:
            raise NegativeQuantity(f"receipt of {change.kg} kg")
        _require_in_horizon(change.day, horizon)
        receipts = dict(material.receipts)
        receipts[change.day] = receipts.get(change.day, 0.0) + change.kg
        if change.kg == 0 and change.day not in material.receipts:
            receipts.pop(change.day)
        materials = tuple(
            replace(m, receipts=receipts) if m.id == material.id else m
            for m in instance.materials
        )
        return replace(instance, materials=materials)

    if isinstance(change, SetCapacity):
        if not any(p.id == change.plant_id for p in instance.plants):
            raise UnknownEntity("plant", change.plant_id)
        if change.hours < 0:
            raise NegativeQuantity(f"capacity of {change.hours} hours")
        _require_in_horizon(change.day, horizon)
        plants = tuple(
            replace(p, capacity={**p.capacity, change.day: change.hours})
            if p.id == change.plant_id
            else p
            for p in instance.plants
        )
        return replace(instance, plants=plants)

    if isinstance(change, ChangeOrderQty):
        order = _require_order(instance, change.order_id)
        if change.quantity <= 0:
            raise NegativeQuantity(f"order quantity {change.quantity}")
        orders = tuple(
            replace(o, quantity=change.quantity) if o.id == order.id else o
            for o in instance.orders
        )
        return replace(instance, orders=orders)

    if isinstance(change, ChangeDueDate):
        order = _require_order(instance, change.order_id)
        _require_in_horizon(change.day, horizon)
        orders = tuple(
            replace(o, due_date=change.day) if o.id == order.id else o
            for o in instance.orders
        )
        return replace(instance, orders=orders)

    raise PlannerError(f"not a data change: {change!r}")


def _require_material(instance: PlanningInstance, material_id: str) -> Material:
    for m in instance.materials:
        if m.id == material_id:
            return m
    raise UnknownEntity("material", material_id)


def _require_order(instance: PlanningInstance, order_id: str) -> Order:
    for o in instance.orders:
        if o.id == order_id:
            return o
    raise UnknownOrder(order_id)


def _require_in_horizon(day: date, horizon: tuple[date, ...]) -> None:
    if not horizon or day < horizon[0] or day > horizon[-1]:
        raise DateOutsideHorizon(day)


# --- LP construction ----------------------------------------------------------


def _check_mods(instance: PlanningInstance, mods) -> None:
    plant_ids = {p.id for p in instance.plants}
    product_ids = {p.id for p in instance.products}
    order_ids = {o.id for o in instance.orders}
    material_ids = {m.id for m in instance.materials}
    for spec in mods:
        c = spec.change
        if isinstance(c, AddReceipt) and c.material_id not in material_ids:
            raise UnknownEntity("material", c.material_id)
        if isinstance(c, SetCapacity) and c.plant_id not in plant_ids:
            raise UnknownEntity("plant", c.plant_id)
        if isinstance(c, (ChangeOrderQty, ChangeDueDate)) and c.order_id not in order_ids:
            raise UnknownEntity("order", c.order_id)
        if isinstance(c, RestrictToPlants) and not c.plant_ids <= plant_ids:
            raise UnknownEntity("plant", ", ".join(sorted(c.plant_ids - plant_ids)))
        if isinstance(c, ForbidPlant) and c.plant_id not in plant_ids:
            raise UnknownEntity("plant", c.plant_id)
        if isinstance(c, HardDeadline) and c.order_id not in order_ids:
            raise UnknownEntity("order", c.order_id)
        if isinstance(c, MaxProduction) and c.product_id not in product_ids:
            raise UnknownEntity("product", c.product_id)


def build_lp(instance: PlanningInstance, mods: list[ScenarioSpec] | tuple = ()) -> LPProblem:
    """Assemble the planning LP for an instance plus scenario moves.

    What-if data changes are applied to a copy of the instance first;
    why-not restrictions then shape the model: plant restrictions drop
    production columns, a hard deadline drops late delivery columns and the
    shortage column, and a production cap adds a row.
    """
    _check_mods(instance, mods)
    for spec in mods:
        if spec.kind == WHAT_IF:
            instance = apply_what_if(instance, spec.change)

    if not instance.horizon:
        raise EmptyHorizon("instance has an empty horizon")
    horizon = list(instance.horizon)

    allowed_plants = {p.id for p in instance.plants}
    deadline_orders: set[str] = set()
    caps: list[MaxProduction] = []
    for spec in mods:
        if spec.kind != WHY_NOT:
            continue
        c = spec.change
        if isinstance(c, RestrictToPlants):
            allowed_plants &= set(c.plant_ids)
        elif isinstance(c, ForbidPlant):
            allowed_plants.discard(c.plant_id)
        elif isinstance(c, HardDeadline):
            deadline_orders.add(c.order_id)
        elif isinstance(c, MaxProduction):
            caps.append(c)

    names: list[str] = []
    columns: list[tuple] = []
    objective: list[float] = []

    max_weight = max((o.weight for o in instance.orders), default=1.0)
    shortage_penalty = SHORTAGE_WEIGHT_FACTOR * max_weight

    x_index: dict[tuple[str, str, date], int] = {}
    for plant in instance.plants:
        if plant.id not in allowed_plants:
            continue
        for product in instance.products:
            if product.id not in plant.proc_time:
                continue
            for day in horizon:
                x_index[(plant.id, product.id, day)] = len(names)
                names.append(f"x[{plant.id},{product.id},{day.isoformat()}]")
                columns.append(("x", plant.id, product.id, day))
                objective.append(plant.unit_cost.get(product.id, 0.0))

    a_index: dict[tuple[str, date], int] = {}
    for order in instance.orders:
        for day in horizon:
            if order.id in deadline_orders and day > order.due_date:
                continue
            a_index[(order.id, day)] = len(names)
            names.append(f"a[{order.id},{day.isoformat()}]")
            columns.append(("a", order.id, day))
            late_days = max(0, (day - order.due_date).days)
            objective.append(order.weight * late_days)

    s_index: dict[str, int] = {}
    for order in instance.orders:
        if order.id in deadline_orders:
            continue
        s_index[order.id] = len(names)
        names.append(f"s[{order.id}]")
        columns.append(("s", order.id))
        objective.append(shortage_penalty)

    n = len(names)
    rows: list[np.ndarray] = []
    senses: list[str] = []
    rhs: list[float] = []
    tags: list[ConstraintTag] = []

    def add_row(coeffs: dict[int, float], sense: str, b: float, tag: ConstraintTag) -> None:
        row = np.zeros(n)
        for j, v in coeffs.items():
            row[j] = v
        trivially_true = (sense == LE and b >= 0) or (sense == EQ and b == 0)
        if not coeffs and trivially_true:
            return  # structurally empty row
        rows.append(row)
        senses.append(sense)
        rhs.append(b)
        tags.append(tag)

    for plant in instance.plants:
        if plant.id not in allowed_plants:
            continue
        for day in horizon:
            coeffs = {
                x_index[(plant.id, product.id, day)]: plant.proc_time[product.id]
                for product in instance.products
                if (plant.id, product.id, day) in x_index
            }
            add_row(
                coeffs,
                LE,
                plant.capacity[day],
                ConstraintTag("capacity", (plant.id, day.isoformat())),
            )

    consumers: dict[str, list[tuple[str, float]]] = {m.id: [] for m in instance.materials}
    for product in instance.products:
        for material_id, kg in product.bom.items():
            if kg > 0:
                consumers.setdefault(material_id, []).append((product.id, kg))

    for material in instance.materials:
        supply = material.initial_inventory
        coeffs: dict[int, float] = {}
        for day in horizon:
            supply += material.receipts.get(day, 0.0)
            for product_id, kg in consumers.get(material.id, []):
                for plant in instance.plants:
                    key = (plant.id, product_id, day)
                    if key in x_index:
                        coeffs[x_index[key]] = coeffs.get(x_index[key], 0.0) + kg
            add_row(
                dict(coeffs),
                LE,
                supply,
                ConstraintTag("material", (material.id, day.isoformat())),
            )

    for product in instance.products:
        coeffs = {}
        for day in horizon:
            for plant in instance.plants:
                key = (plant.id, product.id, day)
                if key in x_index:
                    coeffs[x_index[key]] = -1.0
            for order in instance.orders:
                if order.product_id != product.id:
                    continue
                key = (order.id, day)
                if key in a_index:
                    coeffs[a_index[key]] = 1.0
            add_row(
                dict(coeffs),
                LE,
                0.0,
                ConstraintTag("linking", (product.id, day.isoformat())),
            )

    for order in instance.orders:
        coeffs = {
            a_index[(order.id, day)]: 1.0
            for day in horizon
            if (order.id, day) in a_index
        }
        if order.id in s_index:
            coeffs[s_index[order.id]] = 1.0
        add_row(coeffs, EQ, order.quantity, ConstraintTag("demand", (order.id,)))

    for cap in caps:
        coeffs = {
            j: 1.0
            for (plant_id, product_id, _day), j in x_index.items()
            if product_id == cap.product_id
        }
        add_row(
            coeffs,
            LE,
            cap.units,
            ConstraintTag("capacity", (cap.product_id,)),
        )

    A = np.vstack(rows) if rows else np.zeros((0, n))
    problem = LPProblem(
        variables=names,
        c=np.array(objective),
        A=A,
        senses=senses,
        b=np.array(rhs),
        tags=tags,
        columns=columns,
    )
    problem.check()
    return problem


# --- plan extraction and analysis ----------------------------------------------


def extract_plan(
    instance: PlanningInstance,
    problem: LPProblem,
    solution: LPSolution,
    provenance: str | tuple[ScenarioSpec, ...] = "baseline",
    plan_id: str = "plan",
) -> Plan:
    """Turn a solved LP back into named production/allocation cells.

    The objective breakdown (tardiness, shortage, production cost) sums back
    to the solver objective within 1e-6.
    """
    if solution.status != OPTIMAL:
        raise NotOptimal(solution.status)

    due = {o.id: o.due_date for o in instance.orders}
    weight = {o.id: o.weight for o in instance.orders}
    production: dict[tuple[str, str, date], float] = {}
    allocation: dict[tuple[str, date], float] = {}
    tardiness = {o.id: 0.0 for o in instance.orders}
    shortage = {o.id: 0.0 for o in instance.orders}
    tardiness_cost = 0.0
    shortage_cost = 0.0
    production_cost = 0.0

    # Same penalty build_lp used; recomputable because weights never mutate.
    penalty = SHORTAGE_WEIGHT_FACTOR * max((o.weight for o in instance.orders), default=1.0)
    for key, raw, cost in zip(problem.columns, solution.x, problem.c):
        if raw <= 1e-9:
            continue
        value = float(raw)
        if key[0] == "x":
            _, plant_id, product_id, day = key
            production[(plant_id, product_id, day)] = value
            production_cost += float(cost) * value
        elif key[0] == "a":
            _, order_id, day = key
            allocation[(order_id, day)] = value
            late = max(0, (day - due[order_id]).days)
            tardiness[order_id] += weight[order_id] * late * value
            tardiness_cost += weight[order_id] * late * value
        else:
            _, order_id = key
            shortage[order_id] = value
            shortage_cost += penalty * value

    return Plan(
        id=plan_id,
        instance_id=instance.id,
        production=production,
        allocation=allocation,
        tardiness=tardiness,
        shortage=shortage,
        objective=solution.objective,
        objective_breakdown={
            "tardiness_cost": tardiness_cost,
            "shortage_cost": shortage_cost,
            "production_cost": production_cost,
        },
        provenance=provenance,
    )


def solve_plan(
    instance: PlanningInstance,
    mods: tuple[ScenarioSpec, ...] = (),
    plan_id: str = "plan",
    provenance: str | tuple[ScenarioSpec, ...] | None = None,
) -> Plan:
    """Convenience: build, solve, extract. Raises SolveFailed unless optimal."""
    problem = build_lp(instance, mods)
    solution = solve_lp(problem)
    if solution.status != OPTIMAL:
        raise SolveFailed(solution.status)
    if provenance is None:
        provenance = tuple(mods) if mods else "baseline"
    return extract_plan(instance, problem, solution, provenance, plan_id)


def relax_infeasible(problem: LPProblem) -> RelaxationReport:
    """Elastic re-solve: allow every row to be violated, at heavy cost.

    Each row gets a slack moving it just enough to restore feasibility
    (a pair of slacks for equalities). The combined objective prices one
    unit of violation far above any achievable swing of the original
    objective, so violations are minimized first and the original objective
    second. Rows that still need slack above 1e-6 are reported.
    """
    m = len(problem.b)
    n = len(problem.c)
    max_cost = float(np.max(np.abs(problem.c))) if n else 0.0
    big_w = 1e6 * (1.0 + max_cost)

    elastic_cols: list[np.ndarray] = []
    elastic_meta: list[int] = []  # row index per elastic column
    for i, sense in enumerate(problem.senses):
        col = np.zeros((m, 1))
        if sense == LE:
            col[i, 0] = -1.0
            elastic_cols.append(col)
            elastic_meta.append(i)
        elif sense == GE:
            col[i, 0] = 1.0
            elastic_cols.append(col)
            elastic_meta.append(i)
        else:
            up = np.zeros((m, 1))
            up[i, 0] = 1.0
            down = np.zeros((m, 1))
            down[i, 0] = -1.0
            elastic_cols.extend([up, down])
            elastic_meta.extend([i, i])

    A = np.hstack([np.asarray(problem.A, dtype=float).reshape(m, n)] + elastic_cols)
    c = np.concatenate([np.asarray(problem.c, dtype=float), np.full(len(elastic_cols), big_w)])
    relaxed = LPProblem(
        variables=list(problem.variables) + [f"_e{k}" for k in range(len(elastic_cols))],
        c=c,
        A=A,
        senses=list(problem.senses),
        b=np.asarray(problem.b, dtype=float),
        tags=list(problem.tags),
    )
    solution = solve_lp(relaxed)
    if solution.status != OPTIMAL:
        raise SolveFailed(solution.status)

    violation_by_row: dict[int, float] = {}
    for k, row_index in enumerate(elastic_meta):
        amount = float(solution.x[n + k])
        if amount > 0:
            violation_by_row[row_index] = violation_by_row.get(row_index, 0.0) + amount

    violated = tuple(
        (problem.tags[i], amount)
        for i, amount in sorted(violation_by_row.items())
        if amount > 1e-6
    )
    total = float(sum(amount for _, amount in violated))
    relaxed_objective = float(np.dot(problem.c, solution.x[:n]))
    return RelaxationReport(total, violated, relaxed_objective)


def _order_tardy_units(instance: PlanningInstance, plan: Plan, order_id: str) -> float:
    order = _require_order(instance, order_id)
    late = sum(
        units
        for (oid, day), units in plan.allocation.items()
        if oid == order_id and day > order.due_date
    )
    return late + plan.shortage.get(order_id, 0.0)


def _filtered_problem(problem: LPProblem, drop_kind: str) -> LPProblem:
    keep = [i for i, tag in enumerate(problem.tags) if tag.kind != drop_kind]
    return LPProblem(
        variables=list(problem.variables),
        c=np.asarray(problem.c, dtype=float),
        A=np.asarray(problem.A, dtype=float)[keep, :],
        senses=[problem.senses[i] for i in keep],
        b=np.asarray(problem.b, dtype=float)[keep],
        tags=[problem.tags[i] for i in keep],
        columns=list(problem.columns),
    )


def _tight_materials_at_due(instance: PlanningInstance, plan: Plan, due: date) -> tuple[str, ...]:
    tight: list[str] = []
    for material in instance.materials:
        supply = material.initial_inventory + sum(
            kg for day, kg in material.receipts.items() if day <= due
        )
        consumed = 0.0
        for (_plant, product_id, day), units in plan.production.items():
            if day > due:
                continue
            product = instance.product(product_id)
            consumed += product.bom.get(material.id, 0.0) * units
        if consumed >= supply - max(TIGHT_TOL, 1e-9 * max(1.0, abs(supply))):
            if supply > 0 or consumed > 0:
                tight.append(material.id)
    return tuple(tight)


def _tight_plants_before_due(instance: PlanningInstance, plan: Plan, due: date) -> tuple[str, ...]:
    used: dict[tuple[str, date], float] = {}
    for (plant_id, product_id, day), units in plan.production.items():
        if day > due:
            continue
        plant = instance.plant(plant_id)
        used[(plant_id, day)] = used.get((plant_id, day), 0.0) + plant.proc_time[
            product_id
        ] * units
    tight: list[str] = []
    for plant in instance.plants:
        for day in instance.horizon:
            if day > due:
                break
            if used.get((plant.id, day), 0.0) >= plant.capacity[day] - TIGHT_TOL:
                if plant.capacity[day] > 0:
                    tight.append(plant.id)
                    break
    return tuple(tight)


def explain_delay(
    instance: PlanningInstance,
    plan: Plan,
    order_id: str,
    mods: tuple[ScenarioSpec, ...] = (),
) -> DelayExplanation:
    """Attribute an order's lateness to materials, capacity, both, or neither.

    Two diagnostic re-solves ablate one constraint family each: if dropping
    the material rows cures the lateness but dropping capacity does not, the
    binding cause is material supply, and vice versa; cured by both means the
    order loses out to competing orders only.
    """
    order = _require_order(instance, order_id)
    tardy = _order_tardy_units(instance, plan, order_id)
    if tardy <= 1e-6:
        return DelayExplanation(order_id, 0.0, DelayReason(NOT_TARDY), {})

    base = build_lp(instance, list(mods))

    def diagnostic(drop_kind: str) -> tuple[float, float]:
        trimmed = _filtered_problem(base, drop_kind)
        solution = solve_lp(trimmed)
        if solution.status != OPTIMAL:
            return float("nan"), float("inf")
        diag_plan = extract_plan(instance, trimmed, solution, "diagnostic")
        return solution.objective, _order_tardy_units(instance, diag_plan, order_id)

    obj_no_material, tardy_no_material = diagnostic("material")
    obj_no_capacity, tardy_no_capacity = diagnostic("capacity")
    evidence = {
        "objective_without_material_rows": obj_no_material,
        "objective_without_capacity_rows": obj_no_capacity,
    }

    persists_without_material = tardy_no_material > 1e-6
    persists_without_capacity = tardy_no_capacity > 1e-6

    if persists_without_capacity and not persists_without_material:
        reason = DelayReason(
            MATERIAL_SHORTAGE,
            materials=_tight_materials_at_due(instance, plan, order.due_date),
        )
    elif persists_without_material and not persists_without_capacity:
        reason = DelayReason(
            CAPACITY_SHORTAGE,
            plants=_tight_plants_before_due(instance, plan, order.due_date),
        )
    elif persists_without_material and persists_without_capacity:
        reason = DelayReason(
            MATERIAL_AND_CAPACITY_SHORTAGE,
            materials=_tight_materials_at_due(instance, plan, order.due_date),
            plants=_tight_plants_before_due(instance, plan, order.due_date),
        )
    else:
        reason = DelayReason(COMPETING_ORDERS)
    return DelayExplanation(order_id, tardy, reason, evidence)


def diff_plans(a: Plan, b: Plan) -> PlanDiff:
    """Cell-level and aggregate deltas, computed as b minus a."""
    if set(a.tardiness) != set(b.tardiness):
        raise IncompatiblePlans("plans cover different order sets")

    products = {key[1] for key in a.production} | {key[1] for key in b.production}
    per_product = {}
    for product_id in sorted(products):
        per_product[product_id] = b.total_production(product_id) - a.total_production(
            product_id
        )

    per_order = {
        order_id: b.tardiness[order_id] - a.tardiness[order_id]
        for order_id in sorted(a.tardiness)
    }

    cells = []
    for key in sorted(set(a.production) | set(b.production)):
        old = a.production.get(key, 0.0)
        new = b.production.get(key, 0.0)
        if abs(new - old) > 1e-6:
            plant_id, product_id, day = key
            cells.append((plant_id, product_id, day, old, new))

    return PlanDiff(
        objective_delta=b.objective - a.objective,
        per_product_total_delta=per_product,
        per_order_tardiness_delta=per_order,
        changed_cells=tuple(cells),
    )


def plan_to_csv(plan: Plan) -> str:
    """Plan export: plant_id,product_id,date,units rows, sorted for stability."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(("plant_id", "product_id", "date", "units"))
    for (plant_id, product_id, day), units in sorted(
        plan.production.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])
    ):
        writer.writerow((plant_id, product_id, day.isoformat(), f"{units:.6g}"))
    return buffer.getvalue()


def plan_to_dict(plan: Plan) -> dict:
    """JSON-safe plan representation for persistence and the HTTP API."""
    if isinstance(plan.provenance, str):
        provenance: object = plan.provenance
    else:
        provenance = [scenario_to_dict(s) for s in plan.provenance]
    return {
        "id": plan.id,
        "instance_id": plan.instance_id,
        "production": [
            {"plant_id": p, "product_id": i, "date": d.isoformat(), "units": u}
            for (p, i, d), u in sorted(plan.production.items())
        ],
        "allocation": [
            {"order_id": o, "date": d.isoformat(), "units": u}
            for (o, d), u in sorted(plan.allocation.items())
        ],
        "tardiness": dict(sorted(plan.tardiness.items())),
        "shortage": dict(sorted(plan.shortage.items())),
        "objective": plan.objective,
        "objective_breakdown": dict(plan.objective_breakdown),
        "provenance": provenance,
    }


def plan_from_dict(payload: dict) -> Plan:
    provenance = payload["provenance"]
    if not isinstance(provenance, str):
        provenance = tuple(scenario_from_dict(s) for s in provenance)
    return Plan(
        id=payload["id"],
        instance_id=payload["instance_id"],
        production={
            (r["plant_id"], r["product_id"], date.fromisoformat(r["date"])): r["units"]
            for r in payload["production"]
        },
        allocation={
            (r["order_id"], date.fromisoformat(r["date"])): r["units"]
            for r in payload["allocation"]
        },
        tardiness=dict(payload["tardiness"]),
        shortage=dict(payload["shortage"]),
        objective=payload["objective"],
        objective_breakdown=dict(payload["objective_breakdown"]),
        provenance=provenance,
    )
