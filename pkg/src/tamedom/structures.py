"""Finite relational structures with three-valued atom tables.

A PartialStructure is the basic finite object everything else works on: a
named point set together with a truth value (true / false / undecided) for
every atom slot, where an atom slot is a relation applied to an ordered tuple
of points, repeated points included.  Equality is never stored as an atom;
distinct points denote distinct elements, and identification happens by
quotienting before a structure is used.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

DEFAULT_HARD_CAP_POINTS = 10


def hard_cap_points() -> int:
    """Maximum number of points a single structure may carry.

    Controlled by the TAMEDOM_HARD_CAP_POINTS environment variable.
    """
    raw = os.environ.get("TAMEDOM_HARD_CAP_POINTS", "")
    if raw.strip():
        try:
            cap = int(raw)
        except ValueError as exc:
            raise StructureError(
                f"TAMEDOM_HARD_CAP_POINTS must be an integer, got {raw!r}"
            ) from exc
        if cap < 1:
            raise StructureError("TAMEDOM_HARD_CAP_POINTS must be >= 1")
        return cap
    return DEFAULT_HARD_CAP_POINTS


class StructureError(Exception):
    """Raised for malformed structures or illegal structure operations."""


class PointKind(Enum):
    BASE = "base-constant"
    VAR = "designated-variable"
    PARAM = "fresh-parameter"

    def __repr__(self) -> str:  # keep traces short
        return self.name


# Sort key used wherever points must be enumerated deterministically.
_KIND_ORDER = {PointKind.BASE: 0, PointKind.VAR: 1, PointKind.PARAM: 2}


@dataclass(frozen=True)
class Point:
    name: str
    kind: PointKind

    def __repr__(self) -> str:
        return f"{self.name}:{self.kind.name.lower()}"


@dataclass(frozen=True)
class Relation:
    name: str
    arity: int
    symmetric: bool = False

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise StructureError(f"relation {self.name} must have arity >= 1")


@dataclass(frozen=True)
class Signature:
    relations: tuple[Relation, ...]

    def __post_init__(self) -> None:
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise StructureError("duplicate relation names in signature")

    def index(self, name: str) -> int:
        for i, rel in enumerate(self.relations):
            if rel.name == name:
                return i
        raise StructureError(f"unknown relation {name!r}")

    def relation(self, name: str) -> Relation:
        return self.relations[self.index(name)]

    def has(self, name: str) -> bool:
        return any(r.name == name for r in self.relations)


@dataclass(frozen=True)
class Literal:
    """A signed atom: relation name, point-name tuple, sign."""

    rel: str
    points: tuple[str, ...]
    positive: bool

    def __str__(self) -> str:
        if self.rel == "=":
            op = "=" if self.positive else "!="
            return f"{self.points[0]} {op} {self.points[1]}"
        sign = "" if self.positive else "!"
        return f"{sign}{self.rel}({','.join(self.points)})"


AtomKey = tuple[int, tuple[int, ...]]


class PartialStructure:
    """Finite point set with a three-valued total atom table.

    The table is total in the sense that ``value`` is defined on every slot
    tuple (absent entries read as undecided); only decided entries are stored.
    """

    __slots__ = ("sig", "points", "atoms", "_name_index")

    def __init__(self, sig: Signature):
        self.sig = sig
        self.points: list[Point] = []
        self.atoms: dict[AtomKey, bool] = {}
        self._name_index: dict[str, int] = {}

    # ---------------- points ----------------

    def add_point(self, name: str, kind: PointKind) -> int:
        if name in self._name_index:
            raise StructureError(f"duplicate point name {name!r}")
        if len(self.points) >= hard_cap_points():
            raise StructureError(
                f"point cap exceeded ({hard_cap_points()}); "
                "raise TAMEDOM_HARD_CAP_POINTS if this is intentional"
            )
        self.points.append(Point(name, kind))
        pid = len(self.points) - 1
        self._name_index[name] = pid
        return pid

    def rename_point(self, pid: int, name: str) -> None:
        if not 0 <= pid < len(self.points):
            raise StructureError(f"unknown point id {pid}")
        old = self.points[pid]
        if old.name == name:
            return
        if name in self._name_index:
            raise StructureError(f"duplicate point name {name!r}")
        del self._name_index[old.name]
        self.points[pid] = Point(name, old.kind)
        self._name_index[name] = pid

    def pid(self, name: str) -> int:
        try:
            return self._name_index[name]
        except KeyError:
            raise StructureError(f"unknown point {name!r}") from None

    def has_point(self, name: str) -> bool:
        return name in self._name_index

    def point_ids(self) -> range:
        return range(len(self.points))

    # ---------------- atoms ----------------

    def _check_key(self, rel_idx: int, pts: tuple[int, ...]) -> None:
        rel = self.sig.relations[rel_idx]
        if len(pts) != rel.arity:
            raise StructureError(
                f"arity mismatch for {rel.name}: got {len(pts)} points"
            )
        for p in pts:
            if not 0 <= p < len(self.points):
                raise StructureError(f"atom references unknown point id {p}")

    def value(self, rel_idx: int, pts: tuple[int, ...]) -> Optional[bool]:
        self._check_key(rel_idx, pts)
        return self.atoms.get((rel_idx, pts))

    def set_value(self, rel_idx: int, pts: tuple[int, ...], val: bool) -> None:
        """Set one slot.  Refuses to overwrite a contrary decided value."""
        self._check_key(rel_idx, pts)
        key = (rel_idx, pts)
        old = self.atoms.get(key)
        if old is not None and old != val:
            rel = self.sig.relations[rel_idx].name
            names = ",".join(self.points[p].name for p in pts)
            raise StructureError(f"conflicting values for {rel}({names})")
        self.atoms[key] = val

    def all_slots(self) -> Iterator[AtomKey]:
        """Every atom slot, in (relation order, lex point tuple) order."""
        n = len(self.points)
        for ri, rel in enumerate(self.sig.relations):
            for pts in itertools.product(range(n), repeat=rel.arity):
                yield (ri, pts)

    def undecided_slots(self) -> list[AtomKey]:
        return [key for key in self.all_slots() if key not in self.atoms]

    def fully_decided(self) -> bool:
        n = len(self.points)
        total = sum(n ** rel.arity for rel in self.sig.relations)
        return len(self.atoms) == total

    # ---------------- views / copies ----------------

    def copy(self) -> "PartialStructure":
        out = PartialStructure(self.sig)
        out.points = list(self.points)
        out.atoms = dict(self.atoms)
        out._name_index = dict(self._name_index)
        return out

    def induced(self, keep: Sequence[int]) -> "PartialStructure":
        """Substructure induced on the given point ids (order preserved)."""
        out = PartialStructure(self.sig)
        remap: dict[int, int] = {}
        for old in keep:
            pt = self.points[old]
            remap[old] = out.add_point(pt.name, pt.kind)
        kept = tuple(remap)
        if len(kept) < len(self.points):
            get = self.atoms.get
            for ri, rel in enumerate(self.sig.relations):
                for pts in itertools.product(kept, repeat=rel.arity):
                    val = get((ri, pts))
                    if val is not None:
                        out.atoms[(ri, tuple(remap[p] for p in pts))] = val
        else:
            keepset = set(keep)
            for (ri, pts), val in self.atoms.items():
                if all(p in keepset for p in pts):
                    out.atoms[(ri, tuple(remap[p] for p in pts))] = val
        return out

    def quotient(self, classes: Sequence[Sequence[int]]) -> "PartialStructure":
        """Merge points; each class keeps its first member's name and the
        strongest kind (base < var < param).  Conflicting atom values across a
        class raise StructureError.
        """
        seen: set[int] = set()
        for cls in classes:
            for p in cls:
                if p in seen:
                    raise StructureError("overlapping quotient classes")
                seen.add(p)
        if seen != set(self.point_ids()):
            raise StructureError("quotient classes must cover all points")

        out = PartialStructure(self.sig)
        remap: dict[int, int] = {}
        for cls in classes:
            members = list(cls)
            rep = min(
                members,
                key=lambda p: (_KIND_ORDER[self.points[p].kind], p),
            )
            pt = self.points[rep]
            new = out.add_point(pt.name, pt.kind)
            for p in members:
                remap[p] = new
        for (ri, pts), val in sorted(self.atoms.items()):
            key = (ri, tuple(remap[p] for p in pts))
            old = out.atoms.get(key)
            if old is not None and old != val:
                rel = self.sig.relations[ri].name
                names = ",".join(out.points[p].name for p in key[1])
                raise StructureError(
                    f"quotient merges conflicting values for {rel}({names})"
                )
            out.atoms[key] = val
        return out

    def literals(self, decided_only: bool = True) -> tuple[Literal, ...]:
        out = []
        for (ri, pts) in self.all_slots():
            val = self.atoms.get((ri, pts))
            if val is None:
                if decided_only:
                    continue
                raise StructureError("undecided atom in literal listing")
            out.append(
                Literal(
                    self.sig.relations[ri].name,
                    tuple(self.points[p].name for p in pts),
                    val,
                )
            )
        return tuple(out)

    def describe(self) -> str:
        pts = ", ".join(repr(p) for p in self.points)
        lits = " ".join(str(l) for l in self.literals())
        return f"[{pts}] {lits}"


def qf_type(struct: PartialStructure, pids: Sequence[int]) -> tuple[Literal, ...]:
    """All decided literals whose points lie in the given tuple.

    Errors if any atom slot among the tuple's points is undecided: a
    quantifier-free type must decide everything it talks about.
    """
    pts = list(dict.fromkeys(pids))  # dedupe, keep order
    ptset = set(pts)
    undecided: list[str] = []
    out: list[Literal] = []
    for ri, rel in enumerate(struct.sig.relations):
        for tup in itertools.product(pts, repeat=rel.arity):
            val = struct.atoms.get((ri, tup))
            names = tuple(struct.points[p].name for p in tup)
            if val is None:
                undecided.append(f"{rel.name}({','.join(names)})")
            else:
                out.append(Literal(rel.name, names, val))
    if undecided:
        raise StructureError(
            "qf_type on a tuple with undecided atoms: " + ", ".join(undecided)
        )
    # deterministic order: relation declaration order, lex point tuple
    del ptset
    return tuple(out)


CanonicalKey = tuple


def _encode(
    struct: PartialStructure,
    order: Sequence[int],
    fixed_count: int,
    slots: Sequence[int],
) -> CanonicalKey:
    pos = {pid: i for i, pid in enumerate(order)}
    atoms = sorted(
        (ri, tuple(pos[p] for p in pts), val)
        for (ri, pts), val in struct.atoms.items()
    )
    heads = tuple(
        (struct.points[pid].name, struct.points[pid].kind.value)
        for pid in order[:fixed_count]
    )
    kinds = tuple(struct.points[pid].kind.value for pid in order[fixed_count:])
    slotvec = tuple(pos[p] for p in slots)
    return (heads, kinds, slotvec, tuple(atoms))


def iso_canonical(
    struct: PartialStructure,
    fixed: Sequence[int] = (),
    slots: Sequence[int] = (),
) -> CanonicalKey:
    """Canonical form under isomorphisms fixing the given points pointwise.

    Exhaustive over permutations of the non-fixed points; the point cap keeps
    this honest.  Names of non-fixed points are erased in the key, so two
    structures get equal keys exactly when some fixed-point-preserving
    isomorphism links them.

    ``slots`` is an optional tuple of distinguished point ids (repeats
    allowed); the key records where each slot lands, so ordered-tuple types
    over the fixed part compare correctly even when the tuple points
    themselves are movable.
    """
    fixed = list(fixed)
    fixedset = set(fixed)
    if len(fixedset) != len(fixed):
        raise StructureError("repeated fixed point")
    movable = [p for p in struct.point_ids() if p not in fixedset]
    if len(movable) > hard_cap_points():
        raise StructureError(
            f"iso_canonical over {len(movable)} movable points exceeds cap"
        )
    best: Optional[CanonicalKey] = None
    for perm in itertools.permutations(movable):
        key = _encode(struct, fixed + list(perm), len(fixed), slots)
        if best is None or key < best:
            best = key
    if best is None:  # no movable points
        best = _encode(struct, fixed, len(fixed), slots)
    return best
