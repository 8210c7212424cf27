"""Why-not analysis: plant restrictions and a hard deadline that cannot hold.

Two restriction flavors:

1. "Only produce in Vancouver" removes Toronto's production columns. The
   model stays feasible (demand is soft), but the objective worsens because
   the winter tires lose their cheaper Toronto slot.

2. "Order O1 must be fully delivered by its due date" deletes O1's late
   delivery and shortage columns. There simply is not enough natural rubber
   before 2024-04-18, so the model goes infeasible; instead of giving up,
   the elastic relaxation reports the smallest constraint violation that
   would make it work, which is the resolution hint a planner needs (get 50
   more kilograms of rubber in time, or accept 25 late units).
"""

from planchat import HardDeadline, RestrictToPlants, ScenarioSpec, WHY_NOT, build_lp, parse_instance, relax_infeasible, solve_plan
from planchat.resources import bundled_dataset_dir
from planchat.simplex import solve_lp


def main() -> None:
    instance = parse_instance(bundled_dataset_dir())
    baseline = solve_plan(instance, plan_id="baseline")
    print(f"baseline objective: {baseline.objective:.2f}")

    only_vancouver = ScenarioSpec(WHY_NOT, RestrictToPlants(frozenset({"vancouver"})))
    restricted = solve_plan(instance, (only_vancouver,), plan_id="vancouver-only")
    print(f"\nVancouver-only objective: {restricted.objective:.2f} "
          f"({restricted.objective - baseline.objective:+.2f})")

    deadline = ScenarioSpec(WHY_NOT, HardDeadline("O1"))
    problem = build_lp(instance, (deadline,))
    solution = solve_lp(problem)
    print(f"\nhard deadline on O1: solver status = {solution.status}")

    report = relax_infeasible(problem)
    print(f"minimum total violation: {report.total_violation:.2f}")
    for tag, amount in report.violated:
        print(f"  {tag.label():32s} short by {amount:.2f}")
    print(f"objective if violations were tolerated: {report.relaxed_objective:.2f}")


if __name__ == "__main__":
    main()
