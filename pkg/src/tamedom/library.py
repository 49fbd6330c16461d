"""Built-in theories and type schemas, loaded from package data files.

Loaders cache and validate on first use; the family helpers build the
tensor products the scenario suite works with, renaming factor variables
so each product's coordinates read unambiguously.
"""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path
from typing import Union

from .cuts import CutType, OrderUniverse, cut_tensor
from .dsl import DslError, parse_order_type, parse_schema, parse_theory
from .schemas import SchemaError, TypeSchema, rename_schema, tensor, validate_schema

DATA_DIR = Path(__file__).parent / "data"

Theory = Union["TheorySpec", OrderUniverse]  # noqa: F821 (TheorySpec re-exported)


def builtin_theory_names() -> tuple[str, ...]:
    return tuple(sorted(p.stem for p in (DATA_DIR / "theories").glob("*.thy")))


def builtin_schema_names() -> tuple[str, ...]:
    return tuple(sorted(p.stem for p in (DATA_DIR / "schemas").glob("*.sch")))


def theory_path(name: str) -> Path:
    return DATA_DIR / "theories" / f"{name}.thy"


def schema_path(name: str) -> Path:
    return DATA_DIR / "schemas" / f"{name}.sch"


@lru_cache(maxsize=None)
def load_theory(name: str):
    """A built-in theory (or order universe) by file stem."""
    path = theory_path(name)
    if not path.is_file():
        raise DslError(str(path), 1, f"no built-in theory named {name!r}")
    return parse_theory(path.read_text(), name, source=str(path))


_HEADER_RE = re.compile(r"^\s*(type|order-type)\s+\S+\s+over\s+(\S+)\s", re.M)


@lru_cache(maxsize=None)
def load_schema(name: str):
    """A built-in schema by file stem: parsed, compiled, and validated."""
    path = schema_path(name)
    if not path.is_file():
        raise DslError(str(path), 1, f"no built-in schema named {name!r}")
    text = path.read_text()
    m = _HEADER_RE.search(text)
    if not m:
        raise DslError(str(path), 1, "missing type/order-type header")
    kind, theory_name = m.groups()
    theory = load_theory(theory_name)
    if kind == "order-type":
        if not isinstance(theory, OrderUniverse):
            raise DslError(str(path), 1,
                           f"{theory_name!r} is not a dense-order universe")
        return parse_order_type(text, theory, source=str(path))
    if isinstance(theory, OrderUniverse):
        raise DslError(str(path), 1,
                       f"{theory_name!r} is a dense-order universe; "
                       "use an order-type file")
    schema = parse_schema(text, theory, source=str(path))
    report = validate_schema(schema)
    if not report.ok:
        raise SchemaError(
            f"built-in schema {name} failed validation: "
            + "; ".join(report.consistency_failures or report.messages)
        )
    return schema


# ---------------------------------------------------------------------------
# Scenario families: the products each built-in scenario talks about.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def counterexample_family() -> dict:
    """p, q0, q1 and the two products the witness-refutation claim compares.

    The left factor of p(x)q1 is renamed to w so the product's coordinates
    (w, z0, z1) stay disjoint from p(x)q0's (x, y).
    """
    p = load_schema("p")
    q0 = load_schema("q0")
    q1 = load_schema("q1")
    p_w = rename_schema(p, {"x": "w"}, name="p")
    return {
        "p": p,
        "q0": q0,
        "q1": q1,
        "pq0": tensor(p, q0, name="p(x)q0"),
        "pq1": tensor(p_w, q1, name="p(x)q1"),
    }


@lru_cache(maxsize=None)
def random_graph_family() -> dict:
    """The isolated-vertex and dominating-vertex types and both products."""
    p = load_schema("rg_p")
    q = load_schema("rg_q")
    p2 = rename_schema(p, {"x": "x'"}, name="rg_p")
    q2 = rename_schema(q, {"y": "y'"}, name="rg_q")
    return {
        "p": p,
        "q": q,
        "c": load_schema("rg_c"),
        "pq": tensor(p, q, name="rg_p(x)rg_q"),
        "qp": tensor(q2, p2, name="rg_q(x)rg_p"),
    }


@lru_cache(maxsize=None)
def dlop_family() -> dict:
    """The two top-cut types split by the predicate, and both products."""
    p = load_schema("dlop_p")
    q = load_schema("dlop_q")
    return {
        "p": p,
        "q": q,
        "pq": cut_tensor(p, q, name="dlop_p(x)dlop_q"),
        "qp": cut_tensor(q, p, name="dlop_q(x)dlop_p"),
    }


@lru_cache(maxsize=None)
def dlo_family() -> dict:
    return {
        "top": load_schema("dlo_top"),
        "bottom": load_schema("dlo_bottom"),
        "at_a": load_schema("dlo_a"),
    }
