"""Planning LP construction, scenario analysis, relaxation, delay attribution."""

from datetime import date

import numpy as np
import pytest

from planchat.dataset import parse_instance
from planchat.planner import (
    CAPACITY_SHORTAGE,
    COMPETING_ORDERS,
    MATERIAL_SHORTAGE,
    NOT_TARDY,
    WHAT_IF,
    WHY_NOT,
    AddReceipt,
    ChangeDueDate,
    ChangeOrderQty,
    DateOutsideHorizon,
    ForbidPlant,
    HardDeadline,
    IncompatiblePlans,
    MaxProduction,
    NegativeQuantity,
    Plan,
    RestrictToPlants,
    ScenarioSpec,
    SetCapacity,
    UnknownEntity,
    apply_what_if,
    build_lp,
    diff_plans,
    explain_delay,
    extract_plan,
    plan_from_dict,
    plan_to_csv,
    plan_to_dict,
    relax_infeasible,
    scenario_from_dict,
    scenario_to_dict,
    solve_plan,
)
from planchat.simplex import GE, LE, ConstraintTag, LPProblem, solve_lp

from conftest import small_instance

APR = lambda day: date(2024, 4, day)  # noqa: E731


# --- build_lp ------------------------------------------------------------------


def test_fixture_lp_dimensions(tire_plant):
    problem = build_lp(tire_plant)
    x_vars = [c for c in problem.columns if c[0] == "x"]
    # Every plant can make every product in the fixture: 2 x 2 x 7 days.
    assert len(x_vars) == 2 * 2 * 7
    a_vars = [c for c in problem.columns if c[0] == "a"]
    assert len(a_vars) == 3 * 7
    s_vars = [c for c in problem.columns if c[0] == "s"]
    assert len(s_vars) == 3


def test_forbid_plant_removes_columns(tire_plant):
    problem = build_lp(tire_plant, (ScenarioSpec(WHY_NOT, ForbidPlant("vancouver")),))
    assert all(c[1] != "vancouver" for c in problem.columns if c[0] == "x")
    assert any(c[1] == "toronto" for c in problem.columns if c[0] == "x")


def test_hard_deadline_removes_shortage_and_late_columns(tire_plant):
    problem = build_lp(tire_plant, (ScenarioSpec(WHY_NOT, HardDeadline("O1")),))
    assert ("s", "O1") not in problem.columns
    due = APR(18)
    late_allocs = [c for c in problem.columns if c[0] == "a" and c[1] == "O1" and c[2] > due]
    assert late_allocs == []
    # Other orders keep their shortage columns.
    assert ("s", "O2") in problem.columns


def test_unknown_entity_in_mod(tire_plant):
    with pytest.raises(UnknownEntity):
        build_lp(tire_plant, (ScenarioSpec(WHY_NOT, ForbidPlant("mars")),))


def test_max_production_adds_capacity_tagged_row(tire_plant):
    base = build_lp(tire_plant)
    capped = build_lp(
        tire_plant, (ScenarioSpec(WHY_NOT, MaxProduction("all_season_tire", 10.0)),)
    )
    assert len(capped.b) == len(base.b) + 1
    extra = capped.tags[-1]
    assert extra.kind == "capacity"
    assert extra.indices == ("all_season_tire",)


# --- extract_plan ---------------------------------------------------------------


def test_zero_orders_zero_plan(tire_plant):
    instance = tire_plant.__class__(
        id=tire_plant.id,
        horizon=tire_plant.horizon,
        plants=tire_plant.plants,
        products=tire_plant.products,
        materials=tire_plant.materials,
        orders=(),
    )
    plan = solve_plan(instance)
    assert plan.production == {}
    assert plan.objective == pytest.approx(0.0, abs=1e-9)


def test_baseline_objective_and_tardiness(tire_plant):
    plan = solve_plan(tire_plant, plan_id="baseline")
    # Frozen after an initial solve: 25 weighted tardy unit-days on O1 plus
    # 524 production cost (150 all-season at 2.0/unit, 80 winter at 2.8/unit).
    assert plan.objective == pytest.approx(549.0, abs=1e-6)
    assert plan.tardiness["O1"] == pytest.approx(25.0, abs=1e-6)
    assert plan.shortage["O1"] == pytest.approx(0.0, abs=1e-9)


def test_tardiness_matches_recomputation_from_allocation(tire_plant):
    plan = solve_plan(tire_plant)
    for order in tire_plant.orders:
        recomputed = sum(
            order.weight * max(0, (day - order.due_date).days) * units
            for (oid, day), units in plan.allocation.items()
            if oid == order.id
        )
        assert plan.tardiness[order.id] == pytest.approx(recomputed, abs=1e-9)


def test_breakdown_sums_to_objective(tire_plant):
    plan = solve_plan(tire_plant)
    assert sum(plan.objective_breakdown.values()) == pytest.approx(
        plan.objective, abs=1e-6
    )


def test_provenance_passthrough(tire_plant):
    problem = build_lp(tire_plant)
    solution = solve_lp(problem)
    plan = extract_plan(tire_plant, problem, solution, "baseline", plan_id="baseline")
    assert plan.provenance == "baseline"
    assert plan.id == "baseline"
    assert plan.instance_id == tire_plant.id


def test_conservation_per_order(tire_plant):
    plan = solve_plan(tire_plant)
    for order in tire_plant.orders:
        delivered = sum(
            units for (oid, _), units in plan.allocation.items() if oid == order.id
        )
        assert delivered + plan.shortage[order.id] == pytest.approx(
            order.quantity, abs=1e-6
        )


def test_cumulative_allocation_never_exceeds_production(tire_plant):
    plan = solve_plan(tire_plant)
    product_of = {o.id: o.product_id for o in tire_plant.orders}
    for product in tire_plant.products:
        cum_alloc = cum_prod = 0.0
        for day in tire_plant.horizon:
            cum_alloc += sum(
                units
                for (oid, d), units in plan.allocation.items()
                if d == day and product_of[oid] == product.id
            )
            cum_prod += sum(
                units
                for (_, pid, d), units in plan.production.items()
                if d == day and pid == product.id
            )
            assert cum_alloc <= cum_prod + 1e-6


# --- apply_what_if ---------------------------------------------------------------


def test_add_receipt_increments_exactly(tire_plant):
    changed = apply_what_if(tire_plant, AddReceipt("natural_rubber", APR(17), 100.0))
    before = tire_plant.material("natural_rubber").receipts
    after = changed.material("natural_rubber").receipts
    assert after[APR(17)] == pytest.approx(before.get(APR(17), 0.0) + 100.0)
    # Untouched dates and the original instance stay as they were.
    assert after[APR(19)] == before[APR(19)]
    assert APR(17) not in tire_plant.material("natural_rubber").receipts


def test_add_receipt_zero_is_identity(tire_plant):
    assert apply_what_if(tire_plant, AddReceipt("natural_rubber", APR(17), 0.0)) == tire_plant


def test_due_date_outside_horizon(tire_plant):
    with pytest.raises(DateOutsideHorizon):
        apply_what_if(tire_plant, ChangeDueDate("O1", date(2024, 4, 1)))


def test_negative_receipt_rejected(tire_plant):
    with pytest.raises(NegativeQuantity):
        apply_what_if(tire_plant, AddReceipt("natural_rubber", APR(17), -1.0))


def test_unknown_material_rejected(tire_plant):
    with pytest.raises(UnknownEntity):
        apply_what_if(tire_plant, AddReceipt("gold", APR(17), 1.0))


def test_set_capacity_and_change_qty(tire_plant):
    changed = apply_what_if(tire_plant, SetCapacity("toronto", APR(16), 0.0))
    assert changed.plant("toronto").capacity[APR(16)] == 0.0
    changed = apply_what_if(tire_plant, ChangeOrderQty("O3", 60.0))
    assert changed.order("O3").quantity == 60.0
    with pytest.raises(NegativeQuantity):
        apply_what_if(tire_plant, ChangeOrderQty("O3", 0.0))


# --- relax_infeasible -------------------------------------------------------------


def test_relaxation_of_feasible_problem_is_tight(tire_plant):
    problem = build_lp(tire_plant)
    baseline = solve_lp(problem)
    report = relax_infeasible(problem)
    assert report.total_violation == pytest.approx(0.0, abs=1e-6)
    assert report.violated == ()
    assert report.relaxed_objective == pytest.approx(baseline.objective, abs=1e-5)


def test_relaxation_of_tiny_infeasible_problem():
    # x >= 2 and x <= 1: minimal total violation is 1.
    problem = LPProblem(
        variables=["x"],
        c=np.array([0.0]),
        A=np.array([[1.0], [1.0]]),
        senses=[GE, LE],
        b=np.array([2.0, 1.0]),
        tags=[ConstraintTag("demand", ("lo",)), ConstraintTag("capacity", ("hi",))],
    )
    report = relax_infeasible(problem)
    assert report.total_violation == pytest.approx(1.0, abs=1e-6)
    assert len(report.violated) == 1


def test_relaxation_of_impossible_hard_deadline(tire_plant):
    problem = build_lp(tire_plant, (ScenarioSpec(WHY_NOT, HardDeadline("O1")),))
    assert solve_lp(problem).status == "infeasible"
    report = relax_infeasible(problem)
    assert report.total_violation > 0
    kinds = {tag.kind for tag, _ in report.violated}
    assert kinds <= {"demand", "linking", "material"}
    assert any("O1" in tag.indices for tag, _ in report.violated if tag.kind == "demand")


# --- explain_delay ----------------------------------------------------------------


def test_on_time_order_not_tardy(tire_plant):
    plan = solve_plan(tire_plant)
    explanation = explain_delay(tire_plant, plan, "O2")
    assert explanation.reason.kind == NOT_TARDY
    assert explanation.tardy_units == 0.0


def test_material_bound_delay(tire_plant):
    # O1 needs 200 kg natural rubber by 04-18 but only 150 are on hand until
    # the 04-19 receipt; capacity is slack all week.
    plan = solve_plan(tire_plant)
    explanation = explain_delay(tire_plant, plan, "O1")
    assert explanation.reason.kind == MATERIAL_SHORTAGE
    assert explanation.reason.materials == ("natural_rubber",)
    assert explanation.tardy_units == pytest.approx(25.0, abs=1e-6)
    assert len(explanation.evidence) == 2


def test_capacity_bound_delay():
    instance = small_instance(capacity_hours=2.0, initial_kg=1000.0, quantity=10.0)
    plan = solve_plan(instance)
    explanation = explain_delay(instance, plan, "ord1")
    assert explanation.reason.kind == CAPACITY_SHORTAGE
    assert explanation.reason.plants == ("p1",)


def test_competing_orders_residual_bucket():
    # A hand-built late plan over a loose instance: both ablations cure the
    # lateness, so the residual explanation applies.
    instance = small_instance(capacity_hours=100.0, initial_kg=1000.0, quantity=10.0)
    late_day = instance.horizon[3]
    plan = Plan(
        id="late",
        instance_id=instance.id,
        production={("p1", "widget", late_day): 10.0},
        allocation={("ord1", late_day): 10.0},
        tardiness={"ord1": 20.0},
        shortage={"ord1": 0.0},
        objective=30.0,
        objective_breakdown={
            "tardiness_cost": 20.0,
            "shortage_cost": 0.0,
            "production_cost": 10.0,
        },
        provenance="baseline",
    )
    explanation = explain_delay(instance, plan, "ord1")
    assert explanation.reason.kind == COMPETING_ORDERS


def test_unknown_order_rejected(tire_plant):
    plan = solve_plan(tire_plant)
    from planchat.planner import UnknownOrder

    with pytest.raises(UnknownOrder):
        explain_delay(tire_plant, plan, "O99")


# --- diff_plans --------------------------------------------------------------------


def test_diff_self_is_zero(tire_plant):
    plan = solve_plan(tire_plant)
    diff = diff_plans(plan, plan)
    assert diff.objective_delta == 0.0
    assert diff.changed_cells == ()
    assert all(v == 0.0 for v in diff.per_product_total_delta.values())
    assert all(v == 0.0 for v in diff.per_order_tardiness_delta.values())


def test_what_if_receipt_diff(tire_plant):
    baseline = solve_plan(tire_plant, plan_id="baseline")
    spec = ScenarioSpec(WHAT_IF, AddReceipt("natural_rubber", APR(17), 100.0))
    scenario = solve_plan(tire_plant, (spec,), plan_id="plan-1")
    diff = diff_plans(baseline, scenario)
    assert diff.objective_delta <= 1e-6
    assert diff.objective_delta == pytest.approx(-25.0, abs=1e-6)
    assert diff.per_order_tardiness_delta["O1"] == pytest.approx(-25.0, abs=1e-6)
    # Total tire counts stay equal; the receipt only lets production happen earlier.
    assert diff.per_product_total_delta["all_season_tire"] == pytest.approx(0.0, abs=1e-6)


def test_incompatible_plans_rejected(tire_plant):
    plan = solve_plan(tire_plant)
    other = solve_plan(small_instance())
    with pytest.raises(IncompatiblePlans):
        diff_plans(plan, other)


# --- monotonicity spot checks (full sweep lives in the acceptance suite) -----------


def test_restriction_never_improves(tire_plant):
    baseline = solve_plan(tire_plant).objective
    for restriction in (
        ForbidPlant("toronto"),
        RestrictToPlants(frozenset({"vancouver"})),
        MaxProduction("all_season_tire", 100.0),
    ):
        restricted = solve_plan(tire_plant, (ScenarioSpec(WHY_NOT, restriction),))
        assert restricted.objective >= baseline - 1e-6


def test_receipt_never_worsens(tire_plant):
    baseline = solve_plan(tire_plant).objective
    spec = ScenarioSpec(WHAT_IF, AddReceipt("synthetic_rubber", APR(16), 50.0))
    assert solve_plan(tire_plant, (spec,)).objective <= baseline + 1e-6


# --- serialization -------------------------------------------------------------------


def test_scenario_round_trip():
    specs = [
        ScenarioSpec(WHAT_IF, AddReceipt("natural_rubber", APR(17), 100.0)),
        ScenarioSpec(WHAT_IF, SetCapacity("toronto", APR(16), 12.5)),
        ScenarioSpec(WHAT_IF, ChangeOrderQty("O1", 42.0)),
        ScenarioSpec(WHAT_IF, ChangeDueDate("O1", APR(20))),
        ScenarioSpec(WHY_NOT, RestrictToPlants(frozenset({"vancouver", "toronto"}))),
        ScenarioSpec(WHY_NOT, ForbidPlant("toronto")),
        ScenarioSpec(WHY_NOT, HardDeadline("O2")),
        ScenarioSpec(WHY_NOT, MaxProduction("winter_tire", 10.0)),
    ]
    for spec in specs:
        assert scenario_from_dict(scenario_to_dict(spec)) == spec


def test_plan_round_trip(tire_plant):
    plan = solve_plan(tire_plant, plan_id="baseline")
    assert plan_from_dict(plan_to_dict(plan)) == plan
    scenario = solve_plan(
        tire_plant,
        (ScenarioSpec(WHAT_IF, AddReceipt("natural_rubber", APR(17), 100.0)),),
        plan_id="plan-1",
    )
    assert plan_from_dict(plan_to_dict(scenario)) == scenario


def test_plan_csv_export(tire_plant):
    plan = solve_plan(tire_plant)
    text = plan_to_csv(plan)
    lines = text.strip().splitlines()
    assert lines[0] == "plant_id,product_id,date,units"
    assert len(lines) == len(plan.production) + 1


def test_solve_deterministic(tire_plant):
    first = solve_plan(tire_plant)
    second = solve_plan(tire_plant)
    assert first == second
