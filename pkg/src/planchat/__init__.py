"""planchat: a conversational production-planning assistant.

The library layers, bottom up:

- :mod:`planchat.dataset` loads and validates the planning data (plants,
  products, materials, orders) from a CSV directory.
- :mod:`planchat.simplex` is a dense two-phase primal simplex kernel.
- :mod:`planchat.planner` builds the production LP, solves plans, applies
  what-if data changes and why-not restrictions, relaxes infeasible models,
  explains order delays, and diffs plans.
- :mod:`planchat.contracts` defines declarative tool contracts (JSON files)
  and binds them to executable handlers.
- :mod:`planchat.retriever` embeds catalog and queries (hashed bag-of-words
  offline, HTTP endpoint optionally) and picks tools by squared-L2 nearest
  neighbor with a confidence gate.
- :mod:`planchat.llm` holds the prompt templates, completion clients, and
  deterministic offline stubs for intent, refinement, extraction, selection.
- :mod:`planchat.conversation` runs the chat pipeline over
  :mod:`planchat.session` state; :mod:`planchat.service` exposes it over
  HTTP and :mod:`planchat.cli` from the command line.
"""

from .contracts import Catalog, ParamSpec, ToolContract, ToolOutput, bind_handlers, load_catalog, render_nl_output
from .conversation import AssistantResponse, Engine
from .dataset import (
    Material,
    Order,
    Plant,
    PlanningInstance,
    Product,
    parse_instance,
    resolve_entity,
    validate_instance,
    write_instance,
)
from .planner import (
    AddReceipt,
    ChangeDueDate,
    ChangeOrderQty,
    DelayExplanation,
    ForbidPlant,
    HardDeadline,
    MaxProduction,
    Plan,
    PlanDiff,
    RelaxationReport,
    RestrictToPlants,
    ScenarioSpec,
    SetCapacity,
    WHAT_IF,
    WHY_NOT,
    apply_what_if,
    build_lp,
    diff_plans,
    explain_delay,
    extract_plan,
    relax_infeasible,
    solve_plan,
)
from .retriever import HashedBagEmbedder, embed_text, evaluate_retrieval, index_catalog, retrieve
from .session import SessionState
from .simplex import LPProblem, LPSolution, solve_lp

__version__ = "0.1.0"

__all__ = [
    "AddReceipt",
    "AssistantResponse",
    "Catalog",
    "ChangeDueDate",
    "ChangeOrderQty",
    "DelayExplanation",
    "Engine",
    "ForbidPlant",
    "HardDeadline",
    "HashedBagEmbedder",
    "LPProblem",
    "LPSolution",
    "Material",
    "MaxProduction",
    "Order",
    "ParamSpec",
    "Plan",
    "PlanDiff",
    "PlanningInstance",
    "Plant",
    "Product",
    "RelaxationReport",
    "RestrictToPlants",
    "ScenarioSpec",
    "SessionState",
    "SetCapacity",
    "ToolContract",
    "ToolOutput",
    "WHAT_IF",
    "WHY_NOT",
    "apply_what_if",
    "bind_handlers",
    "build_lp",
    "diff_plans",
    "embed_text",
    "evaluate_retrieval",
    "explain_delay",
    "extract_plan",
    "index_catalog",
    "load_catalog",
    "parse_instance",
    "relax_infeasible",
    "render_nl_output",
    "resolve_entity",
    "retrieve",
    "solve_lp",
    "solve_plan",
    "validate_instance",
    "write_instance",
]
