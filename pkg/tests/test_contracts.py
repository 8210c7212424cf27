"""Contract schema, catalog loading, template rendering, handler binding."""

import json

import pytest

from planchat.contracts import (
    CATEGORIES,
    BoundCatalog,
    Catalog,
    DuplicateId,
    MissingField,
    SchemaViolation,
    ToolContract,
    UnboundFunction,
    bind_handlers,
    load_catalog,
    parse_contract,
    render_nl_output,
)
from planchat.resources import bundled_catalog_dir


@pytest.fixture(scope="module")
def catalog() -> Catalog:
    return load_catalog(bundled_catalog_dir())


MINIMAL = {
    "id": "demo",
    "category": "query_plan",
    "description": "A demo tool with a description of at least ten words in it.",
    "examples": ["first example query", "second example query"],
    "nl_output": "value is {value}",
    "function": "demo",
    "input": [
        {"name": "thing", "type": "string", "required": True, "description": "a thing"}
    ],
    "output": [{"name": "value", "type": "number"}],
}


def contract_json(**overrides) -> dict:
    payload = json.loads(json.dumps(MINIMAL))
    payload.update(overrides)
    return payload


# --- bundled catalog -----------------------------------------------------------


def test_bundled_catalog_size_and_coverage(catalog):
    assert len(catalog) >= 10
    covered = {contract.category for contract in catalog}
    assert covered == set(CATEGORIES)


def test_bundled_contracts_have_retrieval_quality_floor(catalog):
    for contract in catalog:
        assert len(contract.examples) >= 2, contract.id
        assert len(contract.description.split()) >= 10, contract.id


def test_bundled_load_is_order_stable(catalog):
    again = load_catalog(bundled_catalog_dir())
    assert [c.id for c in again] == [c.id for c in catalog]
    assert [c.id for c in catalog] == sorted(c.id for c in catalog)


def test_bundled_expected_tools_present(catalog):
    ids = {c.id for c in catalog}
    assert {
        "production_on_date",
        "order_status",
        "material_inventory",
        "restrict_to_plants",
        "hard_deadline",
        "max_production",
        "add_receipt",
        "change_capacity",
        "change_due_date",
        "compare_plans",
        "show_plan_table",
        "show_order_table",
    } <= ids


# --- schema validation ----------------------------------------------------------


def test_template_placeholder_must_name_output_field():
    payload = contract_json(nl_output="delay is {delay}")
    with pytest.raises(SchemaViolation) as err:
        parse_contract(payload, "demo.json")
    assert "delay" in str(err.value)


def test_extra_top_level_key_rejected():
    payload = contract_json(version=2)
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_missing_top_level_key_rejected():
    payload = contract_json()
    del payload["function"]
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_enum_param_needs_values():
    payload = contract_json(
        input=[{"name": "mode", "type": "enum", "required": True, "description": "m"}]
    )
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_entity_param_needs_kind():
    payload = contract_json(
        input=[{"name": "who", "type": "entity", "required": True, "description": "w"}]
    )
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_required_param_needs_description():
    payload = contract_json(input=[{"name": "x", "type": "string", "required": True}])
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_table_field_needs_columns():
    payload = contract_json(
        nl_output="no placeholders",
        output=[{"name": "rows", "type": "table"}],
    )
    with pytest.raises(SchemaViolation):
        parse_contract(payload, "demo.json")


def test_duplicate_id_rejected(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps(contract_json()))
    (tmp_path / "b.json").write_text(json.dumps(contract_json()))
    with pytest.raises(DuplicateId):
        load_catalog(tmp_path)


def test_unbound_function_rejected_at_load(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps(contract_json()))
    with pytest.raises(UnboundFunction):
        load_catalog(tmp_path, registry={"other": lambda: None})


# --- binding ---------------------------------------------------------------------


def test_bind_full_registry(catalog):
    registry = {contract.function: (lambda: None) for contract in catalog}
    bound = bind_handlers(catalog, registry)
    assert isinstance(bound, BoundCatalog)
    assert len(bound) == len(catalog)
    for contract in bound:
        assert callable(bound.handler(contract))


def test_bind_missing_handler_names_it(catalog):
    registry = {contract.function: (lambda: None) for contract in catalog}
    del registry["add_receipt"]
    with pytest.raises(UnboundFunction) as err:
        bind_handlers(catalog, registry)
    assert err.value.name == "add_receipt"


def test_bind_empty_catalog():
    bound = bind_handlers(Catalog(()), {})
    assert len(bound) == 0


# --- template rendering -------------------------------------------------------------


def test_render_basic_substitution():
    assert render_nl_output("{delay} hours extra delay", {"delay": 5}) == "5 hours extra delay"


def test_render_no_placeholders_verbatim():
    assert render_nl_output("all good", {}) == "all good"


def test_render_trims_trailing_zeros():
    assert render_nl_output("{delay} hours extra delay", {"delay": 5.50}) == (
        "5.5 hours extra delay"
    )


def test_render_two_decimal_limit():
    assert render_nl_output("{v}", {"v": 3.14159}) == "3.14"
    assert render_nl_output("{v}", {"v": -25.0}) == "-25"
    assert render_nl_output("{v}", {"v": 0.0}) == "0"


def test_render_strings_untouched():
    assert render_nl_output("{name} is here", {"name": "Order O1"}) == "Order O1 is here"


def test_render_missing_field():
    with pytest.raises(MissingField):
        render_nl_output("{delay} hours", {"other": 1})


def test_render_total_on_bundled_contracts(catalog):
    # Every contract template renders once scalar fields are present.
    for contract in catalog:
        payload = {}
        for spec in contract.output:
            payload[spec.name] = 1.25 if spec.type == "number" else "x"
        text = render_nl_output(contract.nl_output, payload)
        assert "{" not in text, contract.id
