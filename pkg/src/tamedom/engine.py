"""Finite-model engine: Horn closure, membership, consistency search, and
quantifier-free extension types, for amalgamation-style theories.

All verdicts are deterministic.  Atoms are visited in (relation declaration
order, lexicographic point tuple) order, restricted to representatives of
symmetry orbits; values are tried false before true unless a caller flips
that; search is chronological backtracking with no learning.  Inputs are
never mutated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .structures import (
    AtomKey,
    CanonicalKey,
    PartialStructure,
    PointKind,
    iso_canonical,
)
from .theory import InstanceTables, TheorySpec, instance_tables

MAX_EXTENSION_ARITY = 3


class EngineError(Exception):
    """Raised for precondition violations in engine operations."""


@dataclass(frozen=True)
class ClosureStep:
    """One decided atom with its justification; traces are replayable."""

    atom: str  # e.g. "R2(a,b)"
    key: AtomKey
    value: bool
    reason: str  # "given" | "rule <i>: ..." | "symmetry <R>" | "search choice"
    premises: tuple[str, ...] = ()


@dataclass
class ClosureReport:
    ok: bool
    struct: Optional[PartialStructure]  # closed structure when ok, else None
    steps: tuple[ClosureStep, ...]
    conflict: str = ""  # human-readable contradiction, empty when ok


@dataclass
class Completion:
    """A fully decided member structure plus the trace that produced it."""

    struct: PartialStructure
    steps: tuple[ClosureStep, ...]


@dataclass
class ConsistencyResult:
    consistent: bool
    completion: Optional[Completion]
    models: tuple[Completion, ...] = ()  # every model, in all_solutions mode
    trace: tuple[str, ...] = ()  # exhausted-search log when inconsistent


@dataclass(eq=False)
class Extension:
    """A complete quantifier-free k-type over a named base, with a realizing
    member structure.  ``slot_pids[i]`` is where the i-th type variable landed
    (a base pid when the type identifies it with a base point)."""

    struct: PartialStructure
    slot_pids: tuple[int, ...]
    fresh_pids: tuple[int, ...]
    key: CanonicalKey


class _Propagator:
    """Shared truth-maintenance core for closure and consistency search."""

    __slots__ = (
        "struct", "theory", "tables", "assign", "trail", "steps", "queue",
        "conflict", "record", "rule_label",
    )

    def __init__(self, struct: PartialStructure, theory: TheorySpec,
                 record: bool = True):
        self.struct = struct
        self.theory = theory
        self.tables: InstanceTables = instance_tables(theory, len(struct.points))
        self.assign: dict[AtomKey, bool] = {}
        self.trail: list[AtomKey] = []
        self.steps: list[ClosureStep] = []
        self.queue: deque[AtomKey] = deque()
        self.conflict = ""
        self.record = record
        self.rule_label = tuple(
            f"rule {i}: {r.pretty()}" for i, r in enumerate(theory.horn_rules)
        )

    def pretty(self, key: AtomKey) -> str:
        ri, pts = key
        rel = self.struct.sig.relations[ri].name
        names = ",".join(self.struct.points[p].name for p in pts)
        return f"{rel}({names})"

    def set(self, key: AtomKey, val: bool, reason: str,
            premise_keys: tuple[AtomKey, ...] = ()) -> bool:
        old = self.assign.get(key)
        if old is not None:
            if old == val:
                return True
            self.conflict = (
                f"both values forced for {self.pretty(key)}: "
                f"already {old}, now {val} by {reason}"
            )
            return False
        self.assign[key] = val
        self.trail.append(key)
        if self.record:
            self.steps.append(ClosureStep(
                self.pretty(key), key, val, reason,
                tuple(self.pretty(b) for b in premise_keys),
            ))
        self.queue.append(key)
        return True

    def seed(self) -> bool:
        """Load unconditional rule heads and the structure's decided atoms."""
        for head, rule_idx in self.tables.nullary_heads:
            if not self.set(head, True, self.rule_label[rule_idx]):
                return False
        for key, val in sorted(self.struct.atoms.items()):
            if not self.set(key, val, "given"):
                return False
        return self.propagate()

    def propagate(self) -> bool:
        tables = self.tables
        while self.queue:
            key = self.queue.popleft()
            val = self.assign[key]
            ri = key[0]
            for mirror in tables.orbit_of(key):
                if mirror != key and not self.set(
                    mirror, val,
                    f"symmetry of {self.struct.sig.relations[ri].name}",
                    premise_keys=(key,),
                ):
                    return False
            if val:
                for idx in tables.horn_by_atom.get(key, ()):
                    body, head, rule_idx = tables.horn[idx]
                    if all(self.assign.get(b) is True for b in body):
                        if not self.set(
                            head, True, self.rule_label[rule_idx],
                            premise_keys=body,
                        ):
                            return False
            else:
                for idx in tables.horn_by_head.get(key, ()):
                    body, head, rule_idx = tables.horn[idx]
                    if all(self.assign.get(b) is True for b in body):
                        rule = self.theory.horn_rules[rule_idx]
                        self.conflict = (
                            f"rule {rule_idx} ({rule.pretty()}) forces "
                            f"{self.pretty(head)} true, but it is false"
                        )
                        return False
            for idx in tables.forb_by_atom.get(key, ()):
                pos, neg, config_idx = tables.forb[idx]
                if all(self.assign.get(k) is True for k in pos) and all(
                    self.assign.get(k) is False for k in neg
                ):
                    shape = " & ".join(
                        [self.pretty(k) for k in pos]
                        + ["!" + self.pretty(k) for k in neg]
                    )
                    self.conflict = (
                        f"forbidden configuration {config_idx} embeds: {shape}"
                    )
                    return False
        return True

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            del self.assign[self.trail.pop()]
        del self.steps[mark:]
        self.queue.clear()
        self.conflict = ""


def close(struct: PartialStructure, theory: TheorySpec) -> ClosureReport:
    """Least fixed point of Horn propagation and symmetry over the decided
    atoms.  A contradiction (an atom forced both ways, or a fully decided
    forbidden configuration) is a legitimate return, not an error."""
    if theory.backend != "amalgamation":
        raise EngineError(f"close needs an amalgamation theory, got {theory.backend}")
    prop = _Propagator(struct, theory)
    ok = prop.seed()
    steps = tuple(prop.steps)
    if not ok:
        return ClosureReport(False, None, steps, prop.conflict)
    out = struct.copy()
    out.atoms = dict(prop.assign)
    return ClosureReport(True, out, steps)


def is_member(struct: PartialStructure, theory: TheorySpec) -> bool:
    """Fully decided structure lies in the theory's class."""
    if not struct.fully_decided():
        missing = [
            f"{struct.sig.relations[ri].name}"
            f"({','.join(struct.points[p].name for p in pts)})"
            for ri, pts in struct.undecided_slots()[:4]
        ]
        raise EngineError("is_member needs all atoms decided: " + ", ".join(missing))
    return close(struct, theory).ok


def branch_complete(
    prop: _Propagator,
    struct: PartialStructure,
    keys: Optional[list[AtomKey]] = None,
    value_order: tuple[bool, bool] = (False, True),
) -> Optional[PartialStructure]:
    """Member completion reachable from the propagator's current state, or
    None when the state admits no completion.  Tries the all-default greedy
    completion first, then falls back to branch search over undecided orbit
    representatives.  The propagator is restored to its entry state."""
    tables = prop.tables
    if keys is None:
        keys = [k for k in struct.all_slots() if tables.orbit_rep(k) == k]
    mark0 = len(prop.trail)
    default = value_order[0]
    ok = True
    for key in struct.all_slots():
        if key not in prop.assign:
            if not prop.set(key, default, "greedy default"):
                ok = False
                break
    ok = ok and prop.propagate()
    if ok:
        done = struct.copy()
        done.atoms = dict(prop.assign)
        prop.undo_to(mark0)
        return done
    prop.undo_to(mark0)

    out: Optional[PartialStructure] = None

    def search(start: int) -> bool:
        nonlocal out
        idx = start
        while idx < len(keys) and keys[idx] in prop.assign:
            idx += 1
        if idx == len(keys):
            done = struct.copy()
            done.atoms = dict(prop.assign)
            out = done
            return True
        key = keys[idx]
        for val in value_order:
            mark = len(prop.trail)
            if prop.set(key, val, "search choice") and prop.propagate():
                if search(idx + 1):
                    return True
            prop.undo_to(mark)
        return False

    search(0)
    prop.undo_to(mark0)
    return out


def consistency_search(
    struct: PartialStructure,
    theory: TheorySpec,
    all_solutions: bool = False,
    value_order: tuple[bool, bool] = (False, True),
    want_trace: bool = True,
) -> ConsistencyResult:
    """Search for member completions of a partial structure.

    Returns the first completion in deterministic order (or all of them),
    or an inconsistency verdict whose trace logs the exhausted search tree.
    """
    if theory.backend != "amalgamation":
        raise EngineError(
            f"consistency search needs an amalgamation theory, got {theory.backend}"
        )
    prop = _Propagator(struct, theory, record=want_trace)
    trace: list[str] = []

    if not prop.seed():
        if want_trace:
            for step in prop.steps:
                trace.append(f"{step.atom} := {step.value} [{step.reason}]")
            trace.append(f"contradiction: {prop.conflict}")
        return ConsistencyResult(False, None, trace=tuple(trace))

    tables = prop.tables
    if not all_solutions and not want_trace:
        default = value_order[0]
        mark = len(prop.trail)
        ok = True
        for key in struct.all_slots():
            if key not in prop.assign:
                if not prop.set(key, default, "greedy default"):
                    ok = False
                    break
        ok = ok and prop.propagate()
        if ok:
            done = struct.copy()
            done.atoms = dict(prop.assign)
            comp = Completion(done, ())
            return ConsistencyResult(True, comp, models=(comp,))
        prop.undo_to(mark)

    decision_keys = [
        key for key in struct.all_slots() if tables.orbit_rep(key) == key
    ]
    solutions: list[Completion] = []

    def snapshot() -> Completion:
        out = struct.copy()
        out.atoms = dict(prop.assign)
        return Completion(out, tuple(prop.steps))

    def search(start: int, depth: int) -> bool:
        idx = start
        while idx < len(decision_keys) and decision_keys[idx] in prop.assign:
            idx += 1
        if idx == len(decision_keys):
            solutions.append(snapshot())
            if want_trace:
                trace.append("  " * depth + "all atoms decided: member found")
            return True
        key = decision_keys[idx]
        found = False
        for val in value_order:
            mark = len(prop.trail)
            if want_trace:
                trace.append("  " * depth + f"try {prop.pretty(key)} := {val}")
            if prop.set(key, val, "search choice") and prop.propagate():
                if search(idx + 1, depth + 1):
                    found = True
                    if not all_solutions:
                        return True
            elif want_trace:
                trace.append("  " * (depth + 1) + f"dead end: {prop.conflict}")
            prop.undo_to(mark)
        return found

    found = search(0, 0)
    if not found:
        return ConsistencyResult(False, None, trace=tuple(trace))
    return ConsistencyResult(True, solutions[0], models=tuple(solutions))


def consistent(
    struct: PartialStructure, theory: TheorySpec
) -> Optional[Completion]:
    """First member completion in deterministic order, or None."""
    result = consistency_search(struct, theory, want_trace=False)
    return result.completion


def enumerate_extensions(
    base: PartialStructure,
    k: int,
    theory: TheorySpec,
    kind: PointKind = PointKind.PARAM,
    fresh_prefix: str = "d",
) -> list[Extension]:
    """All complete quantifier-free k-types over the named base.

    Each type variable either lands on a base point or on a fresh point
    (fresh points shared between variables when the type identifies them);
    every completion of the fresh atoms that the theory admits is one type.
    Base points are distinguishable; only fresh points are deduplicated, by
    isomorphism over the base with slot positions kept.
    """
    if not 1 <= k <= MAX_EXTENSION_ARITY:
        raise EngineError(f"extension arity must be 1..{MAX_EXTENSION_ARITY}, got {k}")
    if not base.fully_decided():
        raise EngineError("extension base must be fully decided")
    if not is_member(base, theory):
        raise EngineError("extension base is not a member of the theory")

    n_base = len(base.points)
    patterns: list[tuple[tuple[str, int], ...]] = [()]
    for _ in range(k):
        grown: list[tuple[tuple[str, int], ...]] = []
        for pat in patterns:
            n_fresh = 1 + max(
                (c for tag, c in pat if tag == "fresh"), default=-1
            )
            for pid in range(n_base):
                grown.append(pat + (("base", pid),))
            for c in range(n_fresh + 1):
                grown.append(pat + (("fresh", c),))
        patterns = grown

    out: dict[CanonicalKey, Extension] = {}
    for pat in patterns:
        scratch = base.copy()
        n_fresh = 1 + max((c for tag, c in pat if tag == "fresh"), default=-1)
        fresh_pids: list[int] = []
        for c in range(n_fresh):
            name = f"{fresh_prefix}{c}"
            while scratch.has_point(name):
                name += "'"
            fresh_pids.append(scratch.add_point(name, kind))
        slot_pids = tuple(
            pid if tag == "base" else fresh_pids[pid] for tag, pid in pat
        )
        result = consistency_search(
            scratch, theory, all_solutions=True, want_trace=False
        )
        for model in result.models:
            key = iso_canonical(
                model.struct, fixed=range(n_base), slots=slot_pids
            )
            if key not in out:
                out[key] = Extension(
                    model.struct, slot_pids, tuple(fresh_pids), key
                )
    return list(out.values())


def one_point_extension(
    base: PartialStructure,
    ext: Extension,
    theory: TheorySpec,
    name: Optional[str] = None,
) -> PartialStructure:
    """Realize a 1-type over the base.

    For a type landing on a fresh point this returns the base plus that one
    point; for a type identifying its variable with a base point, the base
    itself already realizes it and a copy is returned unchanged.
    """
    if len(ext.slot_pids) != 1:
        raise EngineError("one_point_extension takes a 1-type")
    if len(ext.struct.points) != len(base.points) + len(ext.fresh_pids):
        raise EngineError("extension was built over a different base")
    for pid in range(len(base.points)):
        if ext.struct.points[pid] != base.points[pid]:
            raise EngineError("extension was built over a different base")
    for key, val in base.atoms.items():
        if ext.struct.atoms.get(key) != val:
            raise EngineError("extension disagrees with the base's atoms")
    if not ext.struct.fully_decided() or not is_member(ext.struct, theory):
        raise EngineError("extension type is not realizable in the theory")
    out = ext.struct.copy()
    if name is not None and ext.fresh_pids:
        out.rename_point(ext.fresh_pids[0], name)
    return out
