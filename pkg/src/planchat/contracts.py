"""Declarative tool contracts: schema, catalog loading, templating, binding.

A tool is described entirely by a JSON document with exactly these top-level
keys: id, category, description, examples, nl_output, function, input,
output. The description and examples double as the retrieval text; nl_output
is a template whose {placeholders} are filled from the tool's output payload;
function names a handler in the registry. Contracts are data, not code, so a
planning consultant can add tools without touching the system.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

CATEGORIES = ("query_plan", "why_not", "what_if", "compare_plan", "display_plan")
PARAM_TYPES = ("string", "number", "date", "entity", "enum")
FIELD_TYPES = ("string", "number", "date", "table")
CONTRACT_KEYS = (
    "id",
    "category",
    "description",
    "examples",
    "nl_output",
    "function",
    "input",
    "output",
)

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class CatalogError(Exception):
    pass


class SchemaViolation(CatalogError):
    def __init__(self, filename: str, field_name: str, reason: str):
        self.filename = filename
        self.field = field_name
        super().__init__(f"{filename}: field {field_name!r}: {reason}")


class DuplicateId(CatalogError):
    def __init__(self, tool_id: str):
        self.tool_id = tool_id
        super().__init__(f"duplicate tool id {tool_id!r}")


class UnboundFunction(CatalogError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no handler registered for function {name!r}")


class MissingField(CatalogError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"output payload is missing template field {name!r}")


@dataclass(frozen=True)
class ParamSpec:
    """One tool input parameter; ``entity_kind`` applies to entity params,
    ``values`` to enum params."""

    name: str
    type: str
    required: bool
    description: str
    entity_kind: str | None = None
    values: tuple[str, ...] = ()


@dataclass(frozen=True)
class FieldSpec:
    """One tool output field; table fields declare their columns."""

    name: str
    type: str
    columns: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ToolContract:
    id: str
    category: str
    description: str
    examples: tuple[str, ...]
    nl_output: str
    function: str
    input: tuple[ParamSpec, ...]
    output: tuple[FieldSpec, ...]

    def retrieval_text(self) -> str:
        """Concatenated description and examples, the embedding source text."""
        return self.description + " " + " ".join(self.examples)

    def param(self, name: str) -> ParamSpec:
        for spec in self.input:
            if spec.name == name:
                return spec
        raise KeyError(name)


@dataclass(frozen=True)
class ToolOutput:
    """What a tool execution hands back: filled template, tables, raw fields."""

    nl_text: str
    renderables: tuple[dict, ...]
    payload: dict


@dataclass
class Catalog:
    contracts: tuple[ToolContract, ...]

    def __iter__(self):
        return iter(self.contracts)

    def __len__(self) -> int:
        return len(self.contracts)

    def get(self, tool_id: str) -> ToolContract:
        for contract in self.contracts:
            if contract.id == tool_id:
                return contract
        raise KeyError(tool_id)

    def categories(self) -> dict[str, str]:
        return {c.id: c.category for c in self.contracts}


@dataclass
class BoundCatalog(Catalog):
    handlers: dict[str, Callable] = field(default_factory=dict)

    def handler(self, contract: ToolContract) -> Callable:
        return self.handlers[contract.function]


def _parse_param(raw: dict, filename: str) -> ParamSpec:
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaViolation(filename, "input", "parameter without a name")
    ptype = raw.get("type")
    if ptype not in PARAM_TYPES:
        raise SchemaViolation(filename, f"input.{name}", f"unknown type {ptype!r}")
    required = bool(raw.get("required", False))
    description = raw.get("description", "")
    if required and not description:
        raise SchemaViolation(filename, f"input.{name}", "required parameter needs a description")
    entity_kind = raw.get("kind")
    if ptype == "entity" and not entity_kind:
        raise SchemaViolation(filename, f"input.{name}", "entity parameter needs a kind")
    values = tuple(raw.get("values", ()))
    if ptype == "enum" and not values:
        raise SchemaViolation(filename, f"input.{name}", "enum parameter needs values")
    return ParamSpec(name, ptype, required, description, entity_kind, values)


def _parse_field(raw: dict, filename: str) -> FieldSpec:
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaViolation(filename, "output", "field without a name")
    ftype = raw.get("type")
    if ftype not in FIELD_TYPES:
        raise SchemaViolation(filename, f"output.{name}", f"unknown type {ftype!r}")
    columns: tuple[tuple[str, str], ...] = ()
    if ftype == "table":
        raw_columns = raw.get("columns")
        if not raw_columns:
            raise SchemaViolation(filename, f"output.{name}", "table field needs columns")
        columns = tuple((c["name"], c.get("type", "string")) for c in raw_columns)
    return FieldSpec(name, ftype, columns)


def parse_contract(payload: dict, filename: str) -> ToolContract:
    keys = set(payload)
    expected = set(CONTRACT_KEYS)
    if keys != expected:
        extra = sorted(keys - expected)
        missing = sorted(expected - keys)
        raise SchemaViolation(
            filename,
            ",".join(extra + missing) or "keys",
            f"top-level keys must be exactly {sorted(expected)}",
        )
    if payload["category"] not in CATEGORIES:
        raise SchemaViolation(filename, "category", f"not one of {CATEGORIES}")
    examples = payload["examples"]
    if not isinstance(examples, list) or not all(isinstance(e, str) for e in examples):
        raise SchemaViolation(filename, "examples", "must be a list of strings")
    contract = ToolContract(
        id=payload["id"],
        category=payload["category"],
        description=payload["description"],
        examples=tuple(examples),
        nl_output=payload["nl_output"],
        function=payload["function"],
        input=tuple(_parse_param(p, filename) for p in payload["input"]),
        output=tuple(_parse_field(f, filename) for f in payload["output"]),
    )
    field_names = {f.name for f in contract.output}
    for placeholder in _PLACEHOLDER.findall(contract.nl_output):
        if placeholder not in field_names:
            raise SchemaViolation(
                filename,
                "nl_output",
                f"placeholder {{{placeholder}}} names no output field",
            )
    return contract


def load_catalog(catalog_dir: str | Path, registry: dict[str, Callable] | None = None) -> Catalog:
    """Load every ``*.json`` contract in the directory, sorted by filename.

    With a registry, unbound function names are rejected here, at load time.
    """
    root = Path(catalog_dir)
    contracts: list[ToolContract] = []
    seen: set[str] = set()
    for path in sorted(root.glob("*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise SchemaViolation(path.name, "-", f"invalid JSON: {err}") from None
        contract = parse_contract(payload, path.name)
        if contract.id in seen:
            raise DuplicateId(contract.id)
        seen.add(contract.id)
        if registry is not None and contract.function not in registry:
            raise UnboundFunction(contract.function)
        contracts.append(contract)
    return Catalog(tuple(contracts))


def bind_handlers(catalog: Catalog, registry: dict[str, Callable]) -> BoundCatalog:
    """Attach executable handlers; every contract must resolve or nothing binds."""
    for contract in catalog:
        if contract.function not in registry:
            raise UnboundFunction(contract.function)
    return BoundCatalog(contracts=catalog.contracts, handlers=dict(registry))


def format_value(value) -> str:
    """Numbers rendered with up to 2 decimals, trailing zeros trimmed."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, float)):
        text = f"{float(value):.2f}".rstrip("0").rstrip(".")
        return "0" if text in ("-0", "") else text
    return str(value)


def render_nl_output(template: str, payload: dict) -> str:
    """Fill a template by pure substitution; nothing else is transformed."""

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in payload:
            raise MissingField(name)
        return format_value(payload[name])

    return _PLACEHOLDER.sub(substitute, template)


def make_table(name: str, spec: FieldSpec, rows: list[list]) -> dict:
    """Renderable table payload matching the declared columns."""
    return {
        "name": name,
        "columns": [{"name": cname, "type": ctype} for cname, ctype in spec.columns],
        "rows": rows,
    }
