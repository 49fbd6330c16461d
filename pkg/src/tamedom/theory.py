"""Theory specifications: Horn closure rules and forbidden configurations.

A theory here is a class of finite structures: those closed under the Horn
rules (positive heads), the declared symmetries, and embedding none of the
forbidden configurations.  Rule and forbidden patterns match points
non-injectively unless an explicit distinctness guard is written.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .structures import PartialStructure, Signature

MAX_RELATION_ARITY = 4
MAX_RULE_VARS = 4  # head/body variables per closure rule


class TheoryError(Exception):
    """Raised for malformed theory specifications."""


RuleAtom = tuple[str, tuple[str, ...]]  # (relation name, variable tuple)


@dataclass(frozen=True)
class HornRule:
    body: tuple[RuleAtom, ...]  # all positive; may be empty
    head: RuleAtom

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for _, vs in (*self.body, self.head):
            for v in vs:
                seen.setdefault(v)
        return tuple(seen)

    def pretty(self) -> str:
        head = f"{self.head[0]}({','.join(self.head[1])})"
        if not self.body:
            return f"-> {head}"
        body = " & ".join(f"{r}({','.join(vs)})" for r, vs in self.body)
        return f"{body} -> {head}"


@dataclass(frozen=True)
class ForbiddenConfig:
    # (relation name, variable tuple, sign); the configuration embeds when
    # some (possibly non-injective) point assignment makes every literal hold.
    literals: tuple[tuple[str, tuple[str, ...], bool], ...]
    distinct: tuple[tuple[str, str], ...] = ()
    derived_from: str = ""  # nonempty when generated by sugar, e.g. irreflexive

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for _, vs, _ in self.literals:
            for v in vs:
                seen.setdefault(v)
        return tuple(seen)

    def pretty(self) -> str:
        parts = [
            ("" if sign else "!") + f"{r}({','.join(vs)})"
            for r, vs, sign in self.literals
        ]
        parts.extend(f"{a} != {b}" for a, b in self.distinct)
        return " & ".join(parts)


@dataclass(frozen=True)
class TheorySpec:
    name: str
    signature: Signature
    horn_rules: tuple[HornRule, ...] = ()
    forbidden: tuple[ForbiddenConfig, ...] = ()
    backend: str = "amalgamation"  # or "dense-order"
    irreflexive: tuple[str, ...] = ()
    predicate: Optional[str] = None  # dense-order backends only

    def __post_init__(self) -> None:
        for rel in self.signature.relations:
            if rel.arity > MAX_RELATION_ARITY:
                raise TheoryError(
                    f"relation {rel.name} has arity {rel.arity}; "
                    f"cap is {MAX_RELATION_ARITY}"
                )
        for rule in self.horn_rules:
            if len(rule.variables()) > MAX_RULE_VARS:
                raise TheoryError(
                    f"closure rule {rule.pretty()!r} uses more than "
                    f"{MAX_RULE_VARS} variables"
                )
            for rel_name, vs in (*rule.body, rule.head):
                self._check_atom(rel_name, vs)
        for config in self.forbidden:
            if not config.literals:
                raise TheoryError("forbidden configuration without literals")
            for rel_name, vs, _ in config.literals:
                self._check_atom(rel_name, vs)
            vars_ = set(config.variables())
            for a, b in config.distinct:
                if a not in vars_ or b not in vars_:
                    raise TheoryError(
                        f"distinctness guard {a} != {b} names an unused variable"
                    )

    def _check_atom(self, rel_name: str, vs: tuple[str, ...]) -> None:
        if not self.signature.has(rel_name):
            raise TheoryError(f"undeclared relation {rel_name!r}")
        if len(vs) != self.signature.relation(rel_name).arity:
            raise TheoryError(f"arity mismatch in atom {rel_name}{vs}")

    def fresh_structure(self) -> PartialStructure:
        return PartialStructure(self.signature)


# ---------------------------------------------------------------------------
# Instance tables: rules and forbidden configurations ground over n points,
# indexed by atom so propagation touches only what an assignment can affect.
# ---------------------------------------------------------------------------

AtomKey = tuple[int, tuple[int, ...]]


@dataclass
class InstanceTables:
    n_points: int
    # Horn instances: (body atom keys, head atom key, source rule index)
    horn: list[tuple[tuple[AtomKey, ...], AtomKey, int]]
    horn_by_atom: dict[AtomKey, list[int]]  # instances with key in the body
    horn_by_head: dict[AtomKey, list[int]]
    nullary_heads: list[tuple[AtomKey, int]]  # empty-body instances
    # Forbidden instances: (keys forced true, keys forced false, config index)
    forb: list[tuple[tuple[AtomKey, ...], tuple[AtomKey, ...], int]]
    forb_by_atom: dict[AtomKey, list[int]]
    # Symmetry orbits: key -> sorted orbit (only where orbit size > 1)
    orbit: dict[AtomKey, tuple[AtomKey, ...]]

    def orbit_of(self, key: AtomKey) -> tuple[AtomKey, ...]:
        return self.orbit.get(key, (key,))

    def orbit_rep(self, key: AtomKey) -> AtomKey:
        return self.orbit_of(key)[0]


_TABLES: dict[tuple[TheorySpec, int], InstanceTables] = {}


def _assignments(vars_: tuple[str, ...], n: int):
    return itertools.product(range(n), repeat=len(vars_))


def _ground(sig: Signature, atom: RuleAtom, env: dict[str, int]) -> AtomKey:
    rel_name, vs = atom
    return (sig.index(rel_name), tuple(env[v] for v in vs))


def instance_tables(theory: TheorySpec, n: int) -> InstanceTables:
    """Ground rule/forbidden instances over n points, cached per theory."""
    cache_key = (theory, n)
    cached = _TABLES.get(cache_key)
    if cached is not None:
        return cached
    sig = theory.signature

    horn: list[tuple[tuple[AtomKey, ...], AtomKey, int]] = []
    horn_by_atom: dict[AtomKey, list[int]] = {}
    horn_by_head: dict[AtomKey, list[int]] = {}
    nullary: list[tuple[AtomKey, int]] = []
    seen_horn: set[tuple[tuple[AtomKey, ...], AtomKey]] = set()
    for rule_idx, rule in enumerate(theory.horn_rules):
        vars_ = rule.variables()
        for combo in _assignments(vars_, n):
            env = dict(zip(vars_, combo))
            head = _ground(sig, rule.head, env)
            body = tuple(_ground(sig, a, env) for a in rule.body)
            if not body:
                if (head, ()) not in seen_horn:
                    seen_horn.add((head, ()))
                    nullary.append((head, rule_idx))
                continue
            if head in body:
                continue  # tautological instance
            dedup = (tuple(sorted(set(body))), head)
            if dedup in seen_horn:
                continue
            seen_horn.add(dedup)
            idx = len(horn)
            horn.append((body, head, rule_idx))
            for key in set(body):
                horn_by_atom.setdefault(key, []).append(idx)
            horn_by_head.setdefault(head, []).append(idx)

    forb: list[tuple[tuple[AtomKey, ...], tuple[AtomKey, ...], int]] = []
    forb_by_atom: dict[AtomKey, list[int]] = {}
    seen_forb: set[tuple[tuple[AtomKey, ...], tuple[AtomKey, ...]]] = set()
    for config_idx, config in enumerate(theory.forbidden):
        vars_ = config.variables()
        for combo in _assignments(vars_, n):
            env = dict(zip(vars_, combo))
            if any(env[a] == env[b] for a, b in config.distinct):
                continue
            pos: list[AtomKey] = []
            neg: list[AtomKey] = []
            for rel_name, vs, sign in config.literals:
                key = _ground(sig, (rel_name, vs), env)
                (pos if sign else neg).append(key)
            if set(pos) & set(neg):
                continue  # an atom required both true and false: never embeds
            dedup = (tuple(sorted(set(pos))), tuple(sorted(set(neg))))
            if dedup in seen_forb:
                continue
            seen_forb.add(dedup)
            idx = len(forb)
            forb.append((tuple(pos), tuple(neg), config_idx))
            for key in set(pos) | set(neg):
                forb_by_atom.setdefault(key, []).append(idx)

    orbit: dict[AtomKey, tuple[AtomKey, ...]] = {}
    for ri, rel in enumerate(sig.relations):
        if not rel.symmetric or rel.arity < 2:
            continue
        for pts in itertools.product(range(n), repeat=rel.arity):
            images = sorted({tuple(perm) for perm in itertools.permutations(pts)})
            if len(images) > 1:
                orbit[(ri, pts)] = tuple((ri, img) for img in images)

    tables = InstanceTables(
        n_points=n,
        horn=horn,
        horn_by_atom=horn_by_atom,
        horn_by_head=horn_by_head,
        nullary_heads=nullary,
        forb=forb,
        forb_by_atom=forb_by_atom,
        orbit=orbit,
    )
    _TABLES[cache_key] = tables
    return tables
