"""Operator command line: serve, validate, solve, eval-retriever.

Outputs are stable across runs (no timestamps) so they can be scripted and
diffed; exit codes are 0 on success, 1 on validation or solve failure, 2 on
usage errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .contracts import bind_handlers, format_value, load_catalog
from .conversation import Engine
from .dataset import DatasetError, parse_instance, validate_instance
from .handlers import REGISTRY
from .llm import client_from_env
from .planner import PlannerError, plan_to_csv, scenario_from_dict, solve_plan
from .resources import bundled_annotated_set, bundled_catalog_dir
from .retriever import (
    HashedBagEmbedder,
    RemoteEmbedder,
    RetrieverError,
    embedder_from_env,
    evaluate_retrieval,
    index_catalog,
    load_annotated_set,
)


def _build_engine(catalog_dir: str | None, llm_endpoint: str | None, embed_endpoint: str | None) -> Engine:
    """Flags override the LLM_ENDPOINT / EMBED_ENDPOINT environment."""
    catalog = bind_handlers(
        load_catalog(Path(catalog_dir) if catalog_dir else bundled_catalog_dir()),
        REGISTRY,
    )
    if embed_endpoint:
        embedder = RemoteEmbedder(embed_endpoint)
    else:
        embedder = embedder_from_env()
    if llm_endpoint:
        env = dict(os.environ)
        env["LLM_ENDPOINT"] = llm_endpoint
        client = client_from_env(env)
    else:
        client = client_from_env()
    return Engine(catalog=catalog, embedder=embedder, client=client)


@click.group()
def main() -> None:
    """Conversational production-planning assistant."""


@main.command()
@click.option(
    "--port",
    default=lambda: int(os.environ.get("PORT", "8080")),
    show_default="8080 or $PORT",
    help="HTTP port to listen on.",
)
@click.option(
    "--data-dir",
    default=lambda: os.environ.get("DATA_DIR", "planchat_data"),
    show_default="planchat_data or $DATA_DIR",
    help="Session snapshot directory.",
)
@click.option("--catalog-dir", default=None, help="Tool catalog directory (default: bundled).")
@click.option("--llm-endpoint", default=None, help="Completion endpoint URL (default: offline stub).")
@click.option("--embed-endpoint", default=None, help="Embedding endpoint URL (default: offline hashing).")
@click.option("--verbose", is_flag=True, help="Verbose request logging.")
def serve(port, data_dir, catalog_dir, llm_endpoint, embed_endpoint, verbose) -> None:
    """Run the chat service."""
    import uvicorn

    from .service import create_app

    engine = _build_engine(catalog_dir, llm_endpoint, embed_endpoint)
    app = create_app(engine=engine, data_dir=data_dir)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="info" if verbose else "warning")


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
def validate(dataset_dir) -> None:
    """Validate a dataset directory; exit 1 if anything is wrong."""
    try:
        instance = parse_instance(dataset_dir)
    except DatasetError as err:
        click.echo(f"invalid: {err}", err=True)
        sys.exit(1)
    diagnostics = validate_instance(instance)
    if diagnostics:
        for diag in diagnostics:
            click.echo(f"invalid: {diag.invariant} [{diag.entity_id}] {diag.detail}", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {len(instance.plants)} plants, {len(instance.products)} products, "
        f"{len(instance.materials)} materials, {len(instance.orders)} orders, "
        f"{len(instance.horizon)} days"
    )


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--scenario",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with a list of scenario moves to apply before solving.",
)
@click.option("--verbose", is_flag=True, help="Also print solver statistics.")
def solve(dataset_dir, scenario, verbose) -> None:
    """Solve a dataset (optionally under a scenario) and print the plan CSV."""
    try:
        instance = parse_instance(dataset_dir)
    except DatasetError as err:
        click.echo(f"invalid dataset: {err}", err=True)
        sys.exit(1)
    mods = ()
    if scenario:
        try:
            raw = json.loads(Path(scenario).read_text(encoding="utf-8"))
            mods = tuple(scenario_from_dict(entry) for entry in raw)
        except (json.JSONDecodeError, KeyError, ValueError) as err:
            click.echo(f"invalid scenario file: {err}", err=True)
            sys.exit(1)
    try:
        plan = solve_plan(instance, mods, plan_id="plan")
    except PlannerError as err:
        click.echo(f"solve failed: {err}", err=True)
        sys.exit(1)
    click.echo(f"# objective {format_value(plan.objective)}")
    for part, value in plan.objective_breakdown.items():
        click.echo(f"# {part} {format_value(value)}")
    for order_id in sorted(plan.tardiness):
        tardiness = plan.tardiness[order_id]
        shortage = plan.shortage[order_id]
        click.echo(
            f"# order {order_id} tardiness {format_value(tardiness)} "
            f"shortage {format_value(shortage)}"
        )
    click.echo(plan_to_csv(plan), nl=False)


@main.command("eval-retriever")
@click.argument("annotated_csv", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--catalog-dir", default=None, help="Tool catalog directory (default: bundled).")
def eval_retriever(annotated_csv, catalog_dir) -> None:
    """Top-1 retrieval accuracy on an annotated query set."""
    catalog = load_catalog(Path(catalog_dir) if catalog_dir else bundled_catalog_dir())
    path = Path(annotated_csv) if annotated_csv else bundled_annotated_set()
    embedder = HashedBagEmbedder()
    index = index_catalog(catalog, embedder)
    try:
        rows = load_annotated_set(path)
        report = evaluate_retrieval(rows, index, embedder, catalog.categories())
    except RetrieverError as err:
        click.echo(f"evaluation failed: {err}", err=True)
        sys.exit(1)
    click.echo(f"overall {report.correct}/{report.total} {report.accuracy:.4f}")
    for category, (correct, total) in report.per_category.items():
        click.echo(f"{category} {correct}/{total} {correct / total:.4f}")


if __name__ == "__main__":
    main()
