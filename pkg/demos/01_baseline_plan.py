"""Solve the bundled tire-plant dataset and inspect the baseline plan.

The dataset is a small two-plant, two-product week: three customer orders,
two raw rubbers, and a natural-rubber receipt that arrives one day after
order O1's due date. That late receipt is what makes the week interesting:
the optimal plan delivers 75 of O1's 100 units on time and the remaining 25
one day late.

Run from the repository root:

    python demos/01_baseline_plan.py
"""

from planchat import parse_instance, solve_plan, validate_instance
from planchat.planner import plan_to_csv
from planchat.resources import bundled_dataset_dir


def main() -> None:
    instance = parse_instance(bundled_dataset_dir())
    print(f"dataset: {instance.id}")
    print(f"  horizon : {instance.horizon[0]} .. {instance.horizon[-1]}")
    print(f"  plants  : {', '.join(p.name for p in instance.plants)}")
    print(f"  products: {', '.join(p.name for p in instance.products)}")
    print(f"  orders  : {len(instance.orders)}")
    assert validate_instance(instance) == []

    plan = solve_plan(instance, plan_id="baseline")
    print(f"\nobjective: {plan.objective:.2f}")
    for part, value in plan.objective_breakdown.items():
        print(f"  {part:16s} {value:10.2f}")

    print("\nper-order outcome:")
    for order in instance.orders:
        print(
            f"  {order.id}: quantity {order.quantity:g}, due {order.due_date}, "
            f"tardiness {plan.tardiness[order.id]:g} unit-days, "
            f"shortage {plan.shortage[order.id]:g}"
        )

    print("\nproduction schedule (CSV):")
    print(plan_to_csv(plan))


if __name__ == "__main__":
    main()
