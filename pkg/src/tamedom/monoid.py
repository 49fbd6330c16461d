"""Bounded domination-class monoids.

Given a theory and a list of type schemas, enumerate tensor words up to a
total free-coordinate arity, partition them into domination classes by
mutual witness search, and emit the induced product and order tables.  All
claims are bounded by the search budgets: a cell the search cannot settle
is reported as inconclusive rather than guessed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .cuts import CutType, class_invariant, cut_tensor
from .domination import DominationError, rename_any, search_witness
from .schemas import SchemaError, TypeSchema, tensor

Schema = Union[TypeSchema, CutType]

MAX_TOTAL_ARITY = 3


class MonoidError(Exception):
    pass


def _free_arity(s: Schema) -> int:
    if isinstance(s, CutType):
        return len(s.free_vars)
    return len(s.free_vars)


def _copy_renamed(s: Schema, tag: str) -> Schema:
    """A fresh-variable copy of a schema (products included) for a word."""
    return rename_any(s, {v: f"{v}_{tag}" for v in s.vars}, name=s.name)


def _word_tensor(factors: Sequence[Schema], name: str, ns: str) -> Schema:
    """Left-fold tensor of fresh copies of the factors.

    `ns` must be unique per word within one table so distinct words never
    share variable names; it is deterministic, so repeated runs generate
    identical schemas.
    """
    copies = [_copy_renamed(f, f"{ns}f{i}") for i, f in enumerate(factors)]
    out = copies[0]
    for i, nxt in enumerate(copies[1:], start=1):
        label = name if i == len(copies) - 1 else f"{name}#{i}"
        if isinstance(out, CutType):
            out = cut_tensor(out, nxt, name=label)
        else:
            out = tensor(out, nxt, name=label)
    return out


@dataclass
class MonoidClass:
    """One bounded-verified domination class."""

    label: str
    rep: Schema
    members: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"label": self.label, "rep": self.rep.name,
               "members": list(self.members)}
        if isinstance(self.rep, CutType):
            out["invariant"] = sorted(
                [c, None if b is None else bool(b)]
                for c, b in class_invariant(self.rep)
            )
        return out


@dataclass
class MonoidTable:
    """Domination classes of the generated words with product and order.

    product[i][j] is the label of class_i (x) class_j, or None when the
    product word exceeds the arity bound or its classification exhausted
    the search budget.  order[i][j] says whether rep_i >=_D rep_j was
    entailed within budget.
    """

    theory_name: str
    generators: tuple[str, ...]
    max_arity: int
    classes: list[MonoidClass]
    product: list[list[Optional[str]]]
    order: list[list[bool]]
    inconclusive: list[dict]
    bounded: dict

    def to_json(self) -> dict:
        return {
            "theory": self.theory_name,
            "generators": list(self.generators),
            "max_arity": self.max_arity,
            "classes": [c.to_json() for c in self.classes],
            "product": [list(row) for row in self.product],
            "order": [list(row) for row in self.order],
            "inconclusive": list(self.inconclusive),
            "bounded": dict(self.bounded),
            "statement": (
                "classes, product and order are verified only up to the "
                "stated base/param budgets and the word arity bound"
            ),
        }

    def label_of(self, schema_name: str) -> Optional[str]:
        for c in self.classes:
            if schema_name in c.members or c.rep.name == schema_name:
                return c.label
        return None


def _mutually_dominate(a: Schema, b: Schema, base_budget: int,
                       param_budget: Optional[int]) -> bool:
    fwd = search_witness(a, b, base_budget=base_budget,
                         param_budget=param_budget)
    if not fwd.found:
        return False
    back = search_witness(b, a, base_budget=base_budget,
                          param_budget=param_budget)
    return back.found


def monoid_table(
    theory_name: str,
    generators: Sequence[Schema],
    max_arity: int = MAX_TOTAL_ARITY,
    base_budget: int = 1,
    param_budget: Optional[int] = None,
) -> MonoidTable:
    """Partition tensor words over the generators into domination classes.

    Words are tuples of generators with total free arity <= max_arity (and
    at most max_arity factors); each is classified against the classes found
    so far by mutual witness search.  The product table tensors class
    representatives and classifies the result the same way.
    """
    if not 1 <= max_arity <= MAX_TOTAL_ARITY:
        raise MonoidError(f"max_arity must be 1..{MAX_TOTAL_ARITY}")
    if not generators:
        raise MonoidError("monoid_table needs at least one generator")
    kinds = {isinstance(g, CutType) for g in generators}
    if len(kinds) != 1:
        raise MonoidError("generators mix order types and amalgamation types")

    # ---- words over the generators, by length then generator order ----
    words: list[tuple[int, ...]] = []
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(max_arity):
        grown: list[tuple[int, ...]] = []
        for word in frontier:
            for gi in range(len(generators)):
                cand = word + (gi,)
                if sum(_free_arity(generators[i]) for i in cand) <= max_arity:
                    grown.append(cand)
        words.extend(grown)
        frontier = grown

    def word_name(word: tuple[int, ...]) -> str:
        return "(x)".join(generators[i].name for i in word)

    def build(word: tuple[int, ...]) -> Schema:
        ns = "w" + "-".join(str(i) for i in word)
        return _word_tensor([generators[i] for i in word], word_name(word), ns)

    # ---- classify each word against the class representatives ----
    classes: list[MonoidClass] = []
    inconclusive: list[dict] = []

    def classify(schema: Schema, what: str) -> Optional[MonoidClass]:
        for cls in classes:
            try:
                if _mutually_dominate(schema, cls.rep, base_budget,
                                      param_budget):
                    return cls
            except (DominationError, SchemaError) as exc:
                inconclusive.append({"what": what, "against": cls.label,
                                     "error": str(exc)})
                return None
        cls = MonoidClass(label=f"c{len(classes)}", rep=schema)
        classes.append(cls)
        return cls

    for word in words:
        schema = build(word)
        cls = classify(schema, word_name(word))
        if cls is not None:
            cls.members.append(word_name(word))

    # ---- product table over class representatives ----
    n = len(classes)
    product: list[list[Optional[str]]] = [[None] * n for _ in range(n)]
    for i, a in enumerate(classes):
        for j, b in enumerate(classes):
            total = _free_arity(a.rep) + _free_arity(b.rep)
            if total > max_arity:
                inconclusive.append({
                    "what": f"{a.label}(x){b.label}",
                    "error": f"product arity {total} exceeds bound "
                             f"{max_arity}",
                })
                continue
            prod = _word_tensor([a.rep, b.rep],
                                f"{a.rep.name}(x){b.rep.name}",
                                f"p{i}-{j}")
            cls = classify(prod, f"{a.label}(x){b.label}")
            if cls is None or cls.rep is prod:
                if cls is not None and cls.rep is prod:
                    classes.pop()  # a product never introduces a new class
                    inconclusive.append({
                        "what": f"{a.label}(x){b.label}",
                        "error": "product matched no generated class "
                                 "within budget",
                    })
                continue
            product[i][j] = cls.label

    # ---- order table ----
    order: list[list[bool]] = [[False] * n for _ in range(n)]
    for i, a in enumerate(classes):
        for j, b in enumerate(classes):
            out = search_witness(a.rep, b.rep, base_budget=base_budget,
                                 param_budget=param_budget)
            order[i][j] = out.found

    return MonoidTable(
        theory_name=theory_name,
        generators=tuple(g.name for g in generators),
        max_arity=max_arity,
        classes=classes,
        product=product,
        order=order,
        inconclusive=inconclusive,
        bounded={"base": base_budget,
                 "param": param_budget if param_budget is not None else "auto",
                 "max_arity": max_arity},
    )
