import os
import shutil
from datetime import date
from pathlib import Path

import pytest

# The suite asserts offline-stub behavior; endpoint env vars would flip the
# defaults, so scrub them up front.
for _var in ("LLM_ENDPOINT", "EMBED_ENDPOINT", "LLM_TIMEOUT_S", "DATA_DIR", "PORT", "UI_DIR"):
    os.environ.pop(_var, None)

from planchat.dataset import (
    Material,
    Order,
    Plant,
    PlanningInstance,
    Product,
    parse_instance,
)

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "planchat" / "data" / "tire_plant"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture()
def tire_plant() -> PlanningInstance:
    return parse_instance(FIXTURE_DIR)


@pytest.fixture()
def dataset_copy(tmp_path: Path) -> Path:
    """Mutable copy of the bundled dataset for corruption tests."""
    target = tmp_path / "tire_plant"
    shutil.copytree(FIXTURE_DIR, target)
    return target


def week(start: date, days: int) -> tuple[date, ...]:
    from datetime import timedelta

    return tuple(start + timedelta(days=i) for i in range(days))


def small_instance(
    *,
    capacity_hours: float = 100.0,
    initial_kg: float = 1000.0,
    receipts: dict[date, float] | None = None,
    quantity: float = 10.0,
    due_index: int = 1,
    days: int = 4,
) -> PlanningInstance:
    """One plant, one product, one material, one order; knobs for each test."""
    horizon = week(date(2024, 4, 15), days)
    return PlanningInstance(
        id="mini",
        horizon=horizon,
        plants=(
            Plant(
                "p1",
                "Plant One",
                {d: capacity_hours for d in horizon},
                {"widget": 1.0},
                {"widget": 1.0},
            ),
        ),
        products=(Product("widget", "Widget", {"steel": 1.0}),),
        materials=(Material("steel", "Steel", initial_kg, receipts or {}),),
        orders=(Order("ord1", "widget", quantity, horizon[due_index], 1.0),),
    )
