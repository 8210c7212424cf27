"""A full scripted conversation through the chat pipeline, fully offline.

Shows every pipeline stage working together: intent classification, tool
retrieval with the confidence gate, model/plan selection, parameter
extraction, clarification for a missing field, execution, task logging, and
the tool-gap path for an unsupported query. No endpoint is configured, so
the deterministic rule-based stubs answer everything.
"""

from planchat import Engine
from planchat.resources import bundled_dataset_dir

SCRIPT = [
    "hello!",
    "Show me the operations plan",
    "How would receiving 100 kg of natural rubber on 2024-04-17 impact my plan?",
    "How many more tires are produced in the new plan?",
    "What is the status of order O1?",
    "Move the due date of order O2.",
    "2024-04-21",
    "qqq zzz xxx",
]


def main() -> None:
    engine = Engine()
    session = engine.create_session("demo")
    engine.ingest_dataset(session, bundled_dataset_dir())
    print("loaded dataset; baseline plan solved\n")

    for text in SCRIPT:
        response = engine.handle_message(session, text)
        print(f"planner : {text}")
        print(f"assistant: {response.text}")
        print(f"  (took {len(response.steps)} steps)")
        for step in response.steps:
            print(f"   - {step}")
        for table in response.renderables:
            print(f"   [table {table['name']}: {len(table['rows'])} rows]")
        print()

    print("task log:")
    for task in session.task_log:
        print(f"  #{task.seq} {task.tool_id:20s} {task.status}")
    print(f"plans saved: {', '.join(session.plans)}")
    if session.tool_gaps:
        gap = session.tool_gaps[0]
        print(f"tool gaps : {gap.query!r} (nearest {gap.best_tool_id}, "
              f"distance {gap.best_distance:.3f})")


if __name__ == "__main__":
    main()
