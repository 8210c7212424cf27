"""Planning dataset model: plants, products, materials, orders, and the horizon.

A :class:`PlanningInstance` is the immutable snapshot of everything the
planner's system knows: per-plant daily capacity and processing rates,
per-product bills of materials, material inventories and scheduled receipts,
and the customer orders to fill. Instances are loaded from a directory of
CSV files (see :func:`parse_instance`), validated on load, and never mutated
afterwards; scenario changes produce new instances.

CSV schema (UTF-8, header row required, ISO-8601 dates, '.' decimal point):

    plants.csv     id,name
    capacity.csv   plant_id,date,hours
    products.csv   id,name
    proc.csv       plant_id,product_id,hours_per_unit,cost_per_unit
    bom.csv        product_id,material_id,kg_per_unit
    materials.csv  id,name,initial_kg
    receipts.csv   material_id,date,kg
    orders.csv     id,product_id,quantity,due_date,weight

The horizon is carried by capacity.csv: the sorted set of its dates must be
contiguous, and every plant must have a capacity row for every horizon day.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path


class DatasetError(Exception):
    """Base for dataset ingestion failures."""


class MissingFile(DatasetError):
    def __init__(self, filename: str):
        self.filename = filename
        super().__init__(f"dataset is missing required file {filename}")


class MalformedRow(DatasetError):
    def __init__(self, filename: str, line: int, reason: str):
        self.filename = filename
        self.line = line
        self.reason = reason
        super().__init__(f"{filename}:{line}: {reason}")


class DanglingReference(DatasetError):
    def __init__(self, kind: str, entity_id: str, where: str = ""):
        self.kind = kind
        self.entity_id = entity_id
        context = f" (referenced from {where})" if where else ""
        super().__init__(f"unknown {kind} id {entity_id!r}{context}")


class NonContiguousHorizon(DatasetError):
    def __init__(self, reason: str):
        super().__init__(reason)


class AmbiguousMention(DatasetError):
    """A name fragment matched two or more entities."""

    def __init__(self, mention: str, candidates: list["EntityRef"]):
        self.mention = mention
        self.candidates = candidates
        names = ", ".join(f"{c.kind}:{c.entity_id}" for c in candidates)
        super().__init__(f"mention {mention!r} is ambiguous between {names}")


@dataclass(frozen=True)
class Plant:
    """A production site with daily hour capacity and per-product rates.

    ``proc_time`` maps product id to hours per unit; a product absent from the
    map cannot be made at this plant. ``unit_cost`` is the production cost per
    unit for each product the plant can make.
    """

    id: str
    name: str
    capacity: dict[date, float]
    proc_time: dict[str, float]
    unit_cost: dict[str, float]


@dataclass(frozen=True)
class Product:
    """A finished good with a single-level bill of materials (kg per unit)."""

    id: str
    name: str
    bom: dict[str, float]


@dataclass(frozen=True)
class Material:
    """A raw material with opening inventory and dated receipts, in kg."""

    id: str
    name: str
    initial_inventory: float
    receipts: dict[date, float]


@dataclass(frozen=True)
class Order:
    """A customer order: quantity of one product due on a date.

    ``weight`` scales the tardiness penalty; higher weight means the planner
    cares more about this order being late.
    """

    id: str
    product_id: str
    quantity: float
    due_date: date
    weight: float


@dataclass(frozen=True)
class PlanningInstance:
    """Immutable snapshot of the planning data over a contiguous day horizon."""

    id: str
    horizon: tuple[date, ...]
    plants: tuple[Plant, ...]
    products: tuple[Product, ...]
    materials: tuple[Material, ...]
    orders: tuple[Order, ...]

    def plant(self, plant_id: str) -> Plant:
        return _by_id(self.plants, plant_id, "plant")

    def product(self, product_id: str) -> Product:
        return _by_id(self.products, product_id, "product")

    def material(self, material_id: str) -> Material:
        return _by_id(self.materials, material_id, "material")

    def order(self, order_id: str) -> Order:
        return _by_id(self.orders, order_id, "order")

    def entity_names(self) -> list[str]:
        """All ids and display names, used for intent keyword matching."""
        out: list[str] = []
        for group in (self.plants, self.products, self.materials, self.orders):
            for e in group:
                out.append(e.id)
                name = getattr(e, "name", None)
                if name:
                    out.append(name)
        return out


def _by_id(entities, entity_id: str, kind: str):
    for e in entities:
        if e.id == entity_id:
            return e
    raise DanglingReference(kind, entity_id)


@dataclass(frozen=True)
class Diagnostic:
    """One violated invariant: which rule, which entity, human detail."""

    invariant: str
    entity_id: str
    detail: str


@dataclass(frozen=True)
class EntityRef:
    kind: str  # plant | product | material | order
    entity_id: str
    name: str


@dataclass(frozen=True)
class NoMatch:
    """Mention matched nothing; candidates list is empty in that case."""

    mention: str
    candidates: tuple[EntityRef, ...] = ()


REQUIRED_FILES = (
    "plants.csv",
    "capacity.csv",
    "products.csv",
    "proc.csv",
    "bom.csv",
    "materials.csv",
    "receipts.csv",
    "orders.csv",
)


def _read_rows(path: Path, columns: tuple[str, ...]):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None or [h.strip() for h in header] != list(columns):
            raise MalformedRow(
                path.name, 1, f"expected header {','.join(columns)}, got {header}"
            )
        for row in reader:
            if any(row.get(c) is None for c in columns):
                raise MalformedRow(path.name, reader.line_num, "wrong field count")
            yield reader.line_num, {c: row[c].strip() for c in columns}


def _parse_date(value: str, filename: str, line: int) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise MalformedRow(filename, line, f"bad ISO date {value!r}") from None


def _parse_number(value: str, filename: str, line: int, field_name: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise MalformedRow(filename, line, f"bad number {value!r} in {field_name}") from None
    if number != number or number in (float("inf"), float("-inf")):
        raise MalformedRow(filename, line, f"non-finite {field_name}")
    return number


def parse_instance(dataset_dir: str | Path, instance_id: str | None = None) -> PlanningInstance:
    """Load and validate a planning dataset directory.

    Returns a fully cross-checked :class:`PlanningInstance`; any dataset this
    function accepts passes :func:`validate_instance` with no diagnostics.

    Raises:
        MissingFile: a required CSV is absent.
        MalformedRow: bad header, value, duplicate id, or out-of-horizon date.
        DanglingReference: a row references an id that was never declared.
        NonContiguousHorizon: capacity dates have gaps, or a plant does not
            cover every horizon day.
    """
    root = Path(dataset_dir)
    for filename in REQUIRED_FILES:
        if not (root / filename).is_file():
            raise MissingFile(filename)

    plant_names: dict[str, str] = {}
    for line, row in _read_rows(root / "plants.csv", ("id", "name")):
        if row["id"] in plant_names:
            raise MalformedRow("plants.csv", line, f"duplicate plant id {row['id']!r}")
        if not row["id"]:
            raise MalformedRow("plants.csv", line, "empty id")
        plant_names[row["id"]] = row["name"]

    capacity: dict[str, dict[date, float]] = {pid: {} for pid in plant_names}
    all_dates: set[date] = set()
    for line, row in _read_rows(root / "capacity.csv", ("plant_id", "date", "hours")):
        if row["plant_id"] not in plant_names:
            raise DanglingReference("plant", row["plant_id"], "capacity.csv")
        day = _parse_date(row["date"], "capacity.csv", line)
        hours = _parse_number(row["hours"], "capacity.csv", line, "hours")
        if hours < 0:
            raise MalformedRow("capacity.csv", line, "hours must be >= 0")
        if day in capacity[row["plant_id"]]:
            raise MalformedRow("capacity.csv", line, f"duplicate capacity for {row['plant_id']} on {day}")
        capacity[row["plant_id"]][day] = hours
        all_dates.add(day)

    if not all_dates:
        raise NonContiguousHorizon("capacity.csv defines no dates; horizon is empty")
    horizon = tuple(sorted(all_dates))
    for previous, current in zip(horizon, horizon[1:]):
        if current - previous != timedelta(days=1):
            raise NonContiguousHorizon(f"horizon gap between {previous} and {current}")
    for pid, days in capacity.items():
        missing = [d for d in horizon if d not in days]
        if missing:
            raise NonContiguousHorizon(
                f"plant {pid} has no capacity for {missing[0]} inside the horizon"
            )

    product_names: dict[str, str] = {}
    for line, row in _read_rows(root / "products.csv", ("id", "name")):
        if row["id"] in product_names:
            raise MalformedRow("products.csv", line, f"duplicate product id {row['id']!r}")
        if not row["id"]:
            raise MalformedRow("products.csv", line, "empty id")
        product_names[row["id"]] = row["name"]

    proc_time: dict[str, dict[str, float]] = {pid: {} for pid in plant_names}
    unit_cost: dict[str, dict[str, float]] = {pid: {} for pid in plant_names}
    for line, row in _read_rows(
        root / "proc.csv", ("plant_id", "product_id", "hours_per_unit", "cost_per_unit")
    ):
        if row["plant_id"] not in plant_names:
            raise DanglingReference("plant", row["plant_id"], "proc.csv")
        if row["product_id"] not in product_names:
            raise DanglingReference("product", row["product_id"], "proc.csv")
        hours = _parse_number(row["hours_per_unit"], "proc.csv", line, "hours_per_unit")
        cost = _parse_number(row["cost_per_unit"], "proc.csv", line, "cost_per_unit")
        if hours <= 0:
            raise MalformedRow("proc.csv", line, "hours_per_unit must be > 0")
        if cost < 0:
            raise MalformedRow("proc.csv", line, "cost_per_unit must be >= 0")
        proc_time[row["plant_id"]][row["product_id"]] = hours
        unit_cost[row["plant_id"]][row["product_id"]] = cost

    material_names: dict[str, str] = {}
    initial: dict[str, float] = {}
    for line, row in _read_rows(root / "materials.csv", ("id", "name", "initial_kg")):
        if row["id"] in material_names:
            raise MalformedRow("materials.csv", line, f"duplicate material id {row['id']!r}")
        if not row["id"]:
            raise MalformedRow("materials.csv", line, "empty id")
        kg = _parse_number(row["initial_kg"], "materials.csv", line, "initial_kg")
        if kg < 0:
            raise MalformedRow("materials.csv", line, "initial_kg must be >= 0")
        material_names[row["id"]] = row["name"]
        initial[row["id"]] = kg

    bom: dict[str, dict[str, float]] = {pid: {} for pid in product_names}
    for line, row in _read_rows(root / "bom.csv", ("product_id", "material_id", "kg_per_unit")):
        if row["product_id"] not in product_names:
            raise DanglingReference("product", row["product_id"], "bom.csv")
        if row["material_id"] not in material_names:
            raise DanglingReference("material", row["material_id"], "bom.csv")
        kg = _parse_number(row["kg_per_unit"], "bom.csv", line, "kg_per_unit")
        if kg < 0:
            raise MalformedRow("bom.csv", line, "kg_per_unit must be >= 0")
        bom[row["product_id"]][row["material_id"]] = kg

    receipts: dict[str, dict[date, float]] = {mid: {} for mid in material_names}
    for line, row in _read_rows(root / "receipts.csv", ("material_id", "date", "kg")):
        if row["material_id"] not in material_names:
            raise DanglingReference("material", row["material_id"], "receipts.csv")
        day = _parse_date(row["date"], "receipts.csv", line)
        kg = _parse_number(row["kg"], "receipts.csv", line, "kg")
        if kg < 0:
            raise MalformedRow("receipts.csv", line, "kg must be >= 0")
        if day < horizon[0] or day > horizon[-1]:
            raise MalformedRow("receipts.csv", line, f"receipt date {day} outside horizon")
        receipts[row["material_id"]][day] = receipts[row["material_id"]].get(day, 0.0) + kg

    orders: list[Order] = []
    seen_orders: set[str] = set()
    for line, row in _read_rows(
        root / "orders.csv", ("id", "product_id", "quantity", "due_date", "weight")
    ):
        if row["id"] in seen_orders:
            raise MalformedRow("orders.csv", line, f"duplicate order id {row['id']!r}")
        if not row["id"]:
            raise MalformedRow("orders.csv", line, "empty id")
        seen_orders.add(row["id"])
        if row["product_id"] not in product_names:
            raise DanglingReference("product", row["product_id"], "orders.csv")
        quantity = _parse_number(row["quantity"], "orders.csv", line, "quantity")
        weight = _parse_number(row["weight"], "orders.csv", line, "weight")
        due = _parse_date(row["due_date"], "orders.csv", line)
        if quantity <= 0:
            raise MalformedRow("orders.csv", line, "quantity must be > 0")
        if weight <= 0:
            raise MalformedRow("orders.csv", line, "weight must be > 0")
        if due < horizon[0] or due > horizon[-1]:
            raise MalformedRow("orders.csv", line, f"due date {due} outside horizon")
        orders.append(Order(row["id"], row["product_id"], quantity, due, weight))

    return PlanningInstance(
        id=instance_id or root.name,
        horizon=horizon,
        plants=tuple(
            Plant(pid, plant_names[pid], capacity[pid], proc_time[pid], unit_cost[pid])
            for pid in plant_names
        ),
        products=tuple(Product(pid, product_names[pid], bom[pid]) for pid in product_names),
        materials=tuple(
            Material(mid, material_names[mid], initial[mid], receipts[mid])
            for mid in material_names
        ),
        orders=tuple(orders),
    )


def validate_instance(instance: PlanningInstance) -> list[Diagnostic]:
    """Check every type invariant; empty list means the instance is sound.

    Unlike :func:`parse_instance`, this never raises: it is meant for
    instances assembled in code, and reports all problems at once.
    """
    diags: list[Diagnostic] = []

    horizon = instance.horizon
    if not horizon:
        diags.append(Diagnostic("PlanningInstance.horizon", instance.id, "horizon is empty"))
    for previous, current in zip(horizon, horizon[1:]):
        if current - previous != timedelta(days=1):
            diags.append(
                Diagnostic(
                    "PlanningInstance.horizon",
                    instance.id,
                    f"gap between {previous} and {current}",
                )
            )

    for kind, group in (
        ("plant", instance.plants),
        ("product", instance.products),
        ("material", instance.materials),
        ("order", instance.orders),
    ):
        seen: set[str] = set()
        for e in group:
            if e.id in seen:
                diags.append(
                    Diagnostic(f"PlanningInstance.{kind}s", e.id, f"duplicate {kind} id")
                )
            seen.add(e.id)

    product_ids = {p.id for p in instance.products}
    material_ids = {m.id for m in instance.materials}
    horizon_set = set(horizon)

    for plant in instance.plants:
        missing = [d for d in horizon if d not in plant.capacity]
        if missing:
            diags.append(
                Diagnostic("Plant.capacity", plant.id, f"no capacity for {missing[0]}")
            )
        for day, hours in plant.capacity.items():
            if hours < 0:
                diags.append(
                    Diagnostic("Plant.capacity", plant.id, f"negative hours on {day}")
                )
        for product_id, hours in plant.proc_time.items():
            if product_id not in product_ids:
                diags.append(
                    Diagnostic("Plant.proc_time", plant.id, f"unknown product {product_id}")
                )
            if hours <= 0:
                diags.append(
                    Diagnostic(
                        "Plant.proc_time", plant.id, f"hours per unit for {product_id} not > 0"
                    )
                )
        for product_id, cost in plant.unit_cost.items():
            if cost < 0:
                diags.append(
                    Diagnostic("Plant.unit_cost", plant.id, f"negative cost for {product_id}")
                )

    for product in instance.products:
        for material_id, kg in product.bom.items():
            if material_id not in material_ids:
                diags.append(
                    Diagnostic("Product.bom", product.id, f"unknown material {material_id}")
                )
            if kg < 0:
                diags.append(
                    Diagnostic("Product.bom", product.id, f"negative kg for {material_id}")
                )

    for material in instance.materials:
        if material.initial_inventory < 0:
            diags.append(
                Diagnostic("Material.initial_inventory", material.id, "negative inventory")
            )
        for day, kg in material.receipts.items():
            if day not in horizon_set:
                diags.append(
                    Diagnostic("Material.receipts", material.id, f"receipt on {day} outside horizon")
                )
            if kg < 0:
                diags.append(
                    Diagnostic("Material.receipts", material.id, f"negative receipt on {day}")
                )

    for order in instance.orders:
        if order.product_id not in product_ids:
            diags.append(
                Diagnostic("Order.product_id", order.id, f"unknown product {order.product_id}")
            )
        if order.quantity <= 0:
            diags.append(Diagnostic("Order.quantity", order.id, "quantity must be > 0"))
        if order.weight <= 0:
            diags.append(Diagnostic("Order.weight", order.id, "weight must be > 0"))
        if order.due_date not in horizon_set:
            diags.append(
                Diagnostic("Order.due_date", order.id, f"due {order.due_date} outside horizon")
            )

    return diags


_KIND_GROUPS = ("plant", "product", "material", "order")


def resolve_entity(
    mention: str,
    instance: PlanningInstance,
    kinds: tuple[str, ...] | None = None,
) -> EntityRef | NoMatch:
    """Resolve a free-text mention to a plant/product/material/order.

    Case-insensitive exact match on id or name wins outright; otherwise a
    unique substring match wins; otherwise :class:`NoMatch`. ``kinds``
    restricts the search, e.g. ``("material",)`` when filling a material
    parameter.

    Raises:
        AmbiguousMention: two or more entities substring-match the mention.
        ValueError: mention is empty after trimming.
    """
    needle = mention.strip().lower()
    if not needle:
        raise ValueError("mention must be non-empty")
    wanted = kinds if kinds is not None else _KIND_GROUPS

    refs: list[EntityRef] = []
    for kind in wanted:
        group = getattr(instance, kind + "s")
        for e in group:
            refs.append(EntityRef(kind, e.id, getattr(e, "name", e.id)))

    exact = [r for r in refs if r.entity_id.lower() == needle or r.name.lower() == needle]
    if len(exact) == 1:
        return exact[0]
    if len(exact) > 1:
        raise AmbiguousMention(mention, exact)

    partial = [
        r for r in refs if needle in r.entity_id.lower() or needle in r.name.lower()
    ]
    if len(partial) == 1:
        return partial[0]
    if len(partial) > 1:
        raise AmbiguousMention(mention, partial)
    return NoMatch(mention)


def write_instance(instance: PlanningInstance, dataset_dir: str | Path) -> Path:
    """Serialize an instance back to the CSV dataset layout.

    Inverse of :func:`parse_instance` up to the directory name carrying the
    instance id: ``parse_instance(write_instance(i, d)) == i`` whenever ``d``
    is named ``i.id`` (or the id is passed explicitly on re-parse).
    """
    root = Path(dataset_dir)
    root.mkdir(parents=True, exist_ok=True)

    def dump(filename: str, header: tuple[str, ...], rows) -> None:
        with (root / filename).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    dump("plants.csv", ("id", "name"), [(p.id, p.name) for p in instance.plants])
    dump(
        "capacity.csv",
        ("plant_id", "date", "hours"),
        [
            (p.id, day.isoformat(), repr(hours))
            for p in instance.plants
            for day, hours in sorted(p.capacity.items())
        ],
    )
    dump("products.csv", ("id", "name"), [(p.id, p.name) for p in instance.products])
    dump(
        "proc.csv",
        ("plant_id", "product_id", "hours_per_unit", "cost_per_unit"),
        [
            (p.id, product_id, repr(hours), repr(p.unit_cost.get(product_id, 0.0)))
            for p in instance.plants
            for product_id, hours in sorted(p.proc_time.items())
        ],
    )
    dump(
        "bom.csv",
        ("product_id", "material_id", "kg_per_unit"),
        [
            (p.id, material_id, repr(kg))
            for p in instance.products
            for material_id, kg in sorted(p.bom.items())
        ],
    )
    dump(
        "materials.csv",
        ("id", "name", "initial_kg"),
        [(m.id, m.name, repr(m.initial_inventory)) for m in instance.materials],
    )
    dump(
        "receipts.csv",
        ("material_id", "date", "kg"),
        [
            (m.id, day.isoformat(), repr(kg))
            for m in instance.materials
            for day, kg in sorted(m.receipts.items())
        ],
    )
    dump(
        "orders.csv",
        ("id", "product_id", "quantity", "due_date", "weight"),
        [
            (o.id, o.product_id, repr(o.quantity), o.due_date.isoformat(), repr(o.weight))
            for o in instance.orders
        ],
    )
    return root


def instance_to_dict(instance: PlanningInstance) -> dict:
    """JSON-safe representation, used for session persistence."""
    return {
        "id": instance.id,
        "horizon": [d.isoformat() for d in instance.horizon],
        "plants": [
            {
                "id": p.id,
                "name": p.name,
                "capacity": {d.isoformat(): h for d, h in sorted(p.capacity.items())},
                "proc_time": dict(sorted(p.proc_time.items())),
                "unit_cost": dict(sorted(p.unit_cost.items())),
            }
            for p in instance.plants
        ],
        "products": [
            {"id": p.id, "name": p.name, "bom": dict(sorted(p.bom.items()))}
            for p in instance.products
        ],
        "materials": [
            {
                "id": m.id,
                "name": m.name,
                "initial_inventory": m.initial_inventory,
                "receipts": {d.isoformat(): kg for d, kg in sorted(m.receipts.items())},
            }
            for m in instance.materials
        ],
        "orders": [
            {
                "id": o.id,
                "product_id": o.product_id,
                "quantity": o.quantity,
                "due_date": o.due_date.isoformat(),
                "weight": o.weight,
            }
            for o in instance.orders
        ],
    }


def instance_from_dict(payload: dict) -> PlanningInstance:
    return PlanningInstance(
        id=payload["id"],
        horizon=tuple(date.fromisoformat(d) for d in payload["horizon"]),
        plants=tuple(
            Plant(
                p["id"],
                p["name"],
                {date.fromisoformat(d): h for d, h in p["capacity"].items()},
                dict(p["proc_time"]),
                dict(p["unit_cost"]),
            )
            for p in payload["plants"]
        ),
        products=tuple(Product(p["id"], p["name"], dict(p["bom"])) for p in payload["products"]),
        materials=tuple(
            Material(
                m["id"],
                m["name"],
                m["initial_inventory"],
                {date.fromisoformat(d): kg for d, kg in m["receipts"].items()},
            )
            for m in payload["materials"]
        ),
        orders=tuple(
            Order(
                o["id"],
                o["product_id"],
                o["quantity"],
                date.fromisoformat(o["due_date"]),
                o["weight"],
            )
            for o in payload["orders"]
        ),
    )
