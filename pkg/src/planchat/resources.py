"""Paths to the data files bundled with the package."""

from pathlib import Path

_ROOT = Path(__file__).resolve().parent


def bundled_catalog_dir() -> Path:
    return _ROOT / "catalog"


def bundled_prompt_dir() -> Path:
    return _ROOT / "prompts"


def bundled_dataset_dir() -> Path:
    return _ROOT / "data" / "tire_plant"


def bundled_annotated_set() -> Path:
    return _ROOT / "data" / "annotated_queries.csv"
