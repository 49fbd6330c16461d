"""tamedom: a finite-oracle engine for domination and tensor products of
invariant types over tame theories.

Everything is computed from finite partial structures and bounded searches;
no infinite model is ever materialized.  See the README for a tour.
"""

__version__ = "0.1.0"

from .structures import (
    Literal,
    PartialStructure,
    Point,
    PointKind,
    Relation,
    Signature,
    StructureError,
    iso_canonical,
    qf_type,
)
from .theory import ForbiddenConfig, HornRule, TheoryError, TheorySpec
from .engine import (
    Completion,
    EngineError,
    Extension,
    close,
    consistent,
    consistency_search,
    enumerate_extensions,
    is_member,
    one_point_extension,
)

__all__ = [
    "Literal",
    "PartialStructure",
    "Point",
    "PointKind",
    "Relation",
    "Signature",
    "StructureError",
    "iso_canonical",
    "qf_type",
    "ForbiddenConfig",
    "HornRule",
    "TheoryError",
    "TheorySpec",
    "Completion",
    "EngineError",
    "Extension",
    "close",
    "consistent",
    "consistency_search",
    "enumerate_extensions",
    "is_member",
    "one_point_extension",
    "__version__",
]
