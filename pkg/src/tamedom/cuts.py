"""Dense-order backend: cut universes, cut-placed types, and a consistency
oracle for order/predicate literal sets.

A universe names finitely many invariant cuts (each tagged with which side
is small) and optionally finitely many base points, totally ordered, with
predicate bits in the DLOP case.  Open regions are dense for the predicate
and its complement, so predicate constraints on fresh points are always
satisfiable; only named points carry fixed bits.

Types place each designated variable either at a base point (realized) or
at a cut, approaching from the large side, with internal order among
variables sharing a cut.  All reasoning reduces to cycle detection in a
strict-order digraph over equivalence classes of named nodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional


class OrderError(Exception):
    """Raised for malformed universes, order types, or constraint sets."""


@dataclass(frozen=True)
class OrderUniverse:
    name: str
    cuts: tuple[tuple[str, str], ...]  # (name, small side: "left" | "right")
    base_points: tuple[tuple[str, Optional[bool]], ...]  # (name, P-bit)
    order: tuple[str, ...]  # every cut and base point, ascending
    predicate: Optional[str] = None

    def __post_init__(self) -> None:
        names = [c for c, _ in self.cuts] + [p for p, _ in self.base_points]
        if len(set(names)) != len(names):
            raise OrderError(f"universe {self.name}: duplicate names")
        if sorted(self.order) != sorted(names):
            raise OrderError(
                f"universe {self.name}: order line must mention every cut "
                "and base point exactly once"
            )
        for c, side in self.cuts:
            if side not in ("left", "right"):
                raise OrderError(f"universe {self.name}: bad side tag for {c}")
        for p, bit in self.base_points:
            if bit is not None and self.predicate is None:
                raise OrderError(
                    f"universe {self.name}: point {p} carries a predicate "
                    "bit but no predicate is declared"
                )
            if bit is None and self.predicate is not None:
                raise OrderError(
                    f"universe {self.name}: point {p} needs a predicate bit"
                )

    def is_cut(self, name: str) -> bool:
        return any(c == name for c, _ in self.cuts)

    def cut_side(self, name: str) -> str:
        for c, side in self.cuts:
            if c == name:
                return side
        raise OrderError(f"universe {self.name}: unknown cut {name!r}")

    def approach_of(self, cut: str) -> str:
        """Types approach a cut from its large side."""
        return "below" if self.cut_side(cut) == "right" else "above"

    def point_bit(self, name: str) -> Optional[bool]:
        for p, bit in self.base_points:
            if p == name:
                return bit
        raise OrderError(f"universe {self.name}: unknown base point {name!r}")

    def position(self, name: str) -> int:
        return self.order.index(name)


# placement forms: ("cut", cut name, "below"|"above", bit or None)
#                  ("eq", base point name)
Placement = tuple


@dataclass(eq=False)
class CutType:
    name: str
    universe: OrderUniverse
    vars: tuple[str, ...]
    placements: dict[str, Placement]
    internal: tuple[tuple[str, str], ...] = ()  # (a, b) meaning a < b
    source: str = "<builtin>"

    def __post_init__(self) -> None:
        u = self.universe
        if len(set(self.vars)) != len(self.vars):
            raise OrderError(f"order type {self.name}: duplicate variables")
        for v in self.vars:
            if v not in self.placements:
                raise OrderError(f"order type {self.name}: {v} is not placed")
        for v, pl in self.placements.items():
            if v not in self.vars:
                raise OrderError(f"order type {self.name}: unknown variable {v}")
            if pl[0] == "eq":
                if not any(p == pl[1] for p, _ in u.base_points):
                    raise OrderError(
                        f"order type {self.name}: {v} realized at unknown "
                        f"point {pl[1]!r}"
                    )
            elif pl[0] == "cut":
                _, cut, side, bit = pl
                if not u.is_cut(cut):
                    raise OrderError(
                        f"order type {self.name}: unknown cut {cut!r}"
                    )
                if side != u.approach_of(cut):
                    raise OrderError(
                        f"order type {self.name}: {v} must approach {cut} "
                        f"from {u.approach_of(cut)} (the large side)"
                    )
                if (bit is None) != (u.predicate is None):
                    raise OrderError(
                        f"order type {self.name}: {v} "
                        + ("needs a predicate bit"
                           if u.predicate else "carries a bit but the "
                           "universe has no predicate")
                    )
            else:
                raise OrderError(f"order type {self.name}: bad placement {pl}")
        for a, b in self.internal:
            pa, pb = self.placements[a], self.placements[b]
            if pa[0] != "cut" or pb[0] != "cut" or pa[1] != pb[1]:
                raise OrderError(
                    f"order type {self.name}: internal order {a}<{b} only "
                    "applies to variables at the same cut"
                )
        # same-cut pairs must be totally ordered with no cycle
        for a, b in itertools.combinations(self.free_vars, 2):
            pa, pb = self.placements[a], self.placements[b]
            if pa[0] == "cut" and pb[0] == "cut" and pa[1] == pb[1]:
                if not self._ordered(a, b) and not self._ordered(b, a):
                    raise OrderError(
                        f"order type {self.name}: {a} and {b} share cut "
                        f"{pa[1]} but are not ordered (type incomplete)"
                    )
        for a, b in self.internal:
            if self._ordered(b, a):
                raise OrderError(
                    f"order type {self.name}: internal order is cyclic "
                    f"around {a},{b}"
                )

    def _ordered(self, a: str, b: str) -> bool:
        """True if the internal lines force a < b (transitively)."""
        frontier = {a}
        while True:
            step = {
                y for x, y in self.internal if x in frontier
            } - frontier
            if not step:
                return b in frontier - {a}
            frontier |= step

    @property
    def free_vars(self) -> tuple[str, ...]:
        return tuple(v for v in self.vars if self.placements[v][0] != "eq")

    @property
    def realised(self) -> tuple[tuple[str, str], ...]:
        return tuple(
            (v, self.placements[v][1])
            for v in self.vars
            if self.placements[v][0] == "eq"
        )

    @property
    def max_rule_arity(self) -> int:
        """Goal literal families take one parameter (v < b / v > b)."""
        return 1 if self.free_vars else 0

    def validate(self) -> None:
        """Structural validation happens at construction; kept for symmetry
        with the amalgamation backend."""


def class_invariant(t: CutType) -> frozenset:
    """The set of (cut, predicate bit) pairs where nonrealized coordinates
    concentrate."""
    out = set()
    for v in t.free_vars:
        _, cut, _, bit = t.placements[v]
        out.add((cut, bit))
    return frozenset(out)


def rename_order_type(t: CutType, mapping: dict[str, str],
                      name: Optional[str] = None) -> CutType:
    for v in t.vars:
        mapping.setdefault(v, v)
    return CutType(
        name=name or t.name,
        universe=t.universe,
        vars=tuple(mapping[v] for v in t.vars),
        placements={mapping[v]: pl for v, pl in t.placements.items()},
        internal=tuple((mapping[a], mapping[b]) for a, b in t.internal),
        source=t.source,
    )


def cut_tensor(p: CutType, q: CutType, name: Optional[str] = None) -> CutType:
    """Product type: placements united; the left factor's variables realize
    beyond the right factor's at any shared cut (above at a top-side cut,
    below at a bottom-side cut)."""
    if p.universe != q.universe:
        raise OrderError("tensor factors live over different universes")
    if set(p.vars) & set(q.vars):
        raise OrderError("tensor factors share variable names; rename first")
    internal = list(q.internal) + list(p.internal)
    for pv in p.free_vars:
        for qv in q.free_vars:
            ppl, qpl = p.placements[pv], q.placements[qv]
            if ppl[1] != qpl[1]:
                continue
            if p.universe.cut_side(ppl[1]) == "right":
                internal.append((qv, pv))  # beyond at a top cut: pv above
            else:
                internal.append((pv, qv))  # beyond at a bottom cut: pv below
    placements = dict(q.placements)
    placements.update(p.placements)
    return CutType(
        name=name or f"{p.name}(x){q.name}",
        universe=p.universe,
        vars=tuple(p.vars) + tuple(q.vars),
        placements=placements,
        internal=tuple(internal),
    )


def cut_power(t: CutType, n: int) -> CutType:
    if not 1 <= n <= 3:
        raise OrderError("power exponent must be 1..3")

    def copy_at(i: int) -> CutType:
        return rename_order_type(
            t, {v: f"{v}^{i}" for v in t.vars}, name=f"{t.name}^{i}"
        )

    result = copy_at(0)
    for i in range(1, n):
        result = cut_tensor(copy_at(i), result, name=f"{t.name}^({i + 1})")
    return result


# ---------------------------------------------------------------------------
# The consistency oracle
# ---------------------------------------------------------------------------

# node kinds: ("U",)            -- an element of the universe (base or fresh)
#             ("at", cut name)  -- a point filling the named cut
#             ("anchor", base)  -- the named universe base point itself
NodeKind = tuple

# literal forms: ("lt", a, b)   a < b strictly
#                ("eq", a, b)
#                ("ne", a, b)
#                ("bit", a, True/False)
OrderLit = tuple


@dataclass
class OrderResult:
    consistent: bool
    placement: Optional[dict[str, float]] = None  # name -> rational position
    bits: Optional[dict[str, bool]] = None
    conflict: Optional[str] = None

    def literal_lines(self) -> list[str]:
        if not self.consistent:
            return [f"inconsistent: {self.conflict}"]
        order = sorted(self.placement, key=lambda n: self.placement[n])
        line = " < ".join(
            "=".join(sorted(n for n in order if self.placement[n] == pos))
            for pos in sorted(set(self.placement.values()))
        )
        out = [f"placement: {line}"]
        if self.bits:
            out.append(
                "bits: "
                + ", ".join(f"{'' if b else '!'}P({n})"
                            for n, b in sorted(self.bits.items()))
            )
        return out


def dlo_consistent(
    universe: OrderUniverse,
    nodes: dict[str, NodeKind],
    literals: list[OrderLit],
) -> OrderResult:
    """Decide whether the literal set is realizable over the universe.

    Cut nodes at the extreme cuts automatically sit beyond every universe
    element; interior-cut comparisons must be supplied as literals.  Open
    regions are dense and codense for the predicate, so bits conflict only
    through equalities and anchors.
    """
    names = list(nodes)
    for lit in literals:
        for n in lit[1: 3 if lit[0] != "bit" else 2]:
            if n not in nodes:
                raise OrderError(f"literal names unknown node {n!r}")

    # ---- union-find over equalities ----
    parent = {n: n for n in names}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for lit in literals:
        if lit[0] == "eq":
            a, b = find(lit[1]), find(lit[2])
            if a != b:
                parent[a] = b

    classes: dict[str, list[str]] = {}
    for n in names:
        classes.setdefault(find(n), []).append(n)

    # ---- structural conflicts within classes ----
    bits: dict[str, bool] = {}
    kinds: dict[str, list[NodeKind]] = {}
    for rep, members in classes.items():
        ks = [nodes[m] for m in members]
        kinds[rep] = ks
        anchors = {k[1] for k in ks if k[0] == "anchor"}
        cuts_here = {k[1] for k in ks if k[0] == "at"}
        if len(anchors) > 1:
            return OrderResult(False, conflict=(
                f"points {','.join(sorted(members))} merge two distinct "
                f"base points {sorted(anchors)}"))
        if len(cuts_here) > 1:
            return OrderResult(False, conflict=(
                f"points {','.join(sorted(members))} fill two distinct cuts"))
        if cuts_here and (anchors or any(k[0] == "U" for k in ks)):
            return OrderResult(False, conflict=(
                f"points {','.join(sorted(members))} identify a cut filler "
                "with a universe element"))
        if anchors and universe.predicate:
            bits[rep] = universe.point_bit(next(iter(anchors)))
    for lit in literals:
        if lit[0] == "ne" and find(lit[1]) == find(lit[2]):
            return OrderResult(False, conflict=(
                f"{lit[1]} != {lit[2]} contradicts equalities"))
        if lit[0] == "bit":
            rep = find(lit[1])
            if rep in bits and bits[rep] != lit[2]:
                return OrderResult(False, conflict=(
                    f"predicate bit of {lit[1]} conflicts within its class"))
            bits[rep] = lit[2]

    # ---- strict-order digraph ----
    edges: set[tuple[str, str]] = set()

    def add_edge(lo: str, hi: str) -> None:
        edges.add((find(lo), find(hi)))

    for lit in literals:
        if lit[0] == "lt":
            add_edge(lit[1], lit[2])
    # universe base points in declared order
    anchor_nodes = {
        k[1]: rep for rep, ks in kinds.items() for k in ks if k[0] == "anchor"
    }
    present = [n for n in universe.order if n in anchor_nodes]
    for i in range(len(present) - 1):
        add_edge(anchor_nodes[present[i]], anchor_nodes[present[i + 1]])
    # extreme cuts sit beyond every universe element
    bottom = universe.order[0] if universe.order else None
    top = universe.order[-1] if universe.order else None
    for rep, ks in kinds.items():
        for k in ks:
            if k[0] != "at":
                continue
            cut = k[1]
            for rep2, ks2 in kinds.items():
                if rep2 == rep:
                    continue
                if any(k2[0] in ("U", "anchor") for k2 in ks2):
                    if cut == top and universe.is_cut(top):
                        add_edge(rep2, rep)
                    elif cut == bottom and universe.is_cut(bottom):
                        add_edge(rep, rep2)
                other_cuts = {k2[1] for k2 in ks2 if k2[0] == "at"}
                for oc in other_cuts:
                    if universe.position(oc) < universe.position(cut):
                        add_edge(rep2, rep)
                    elif universe.position(oc) > universe.position(cut):
                        add_edge(rep, rep2)

    # ---- cycle detection via iterative DFS ----
    adj: dict[str, list[str]] = {}
    for lo, hi in sorted(edges):
        adj.setdefault(lo, []).append(hi)
    state: dict[str, int] = {}

    def has_cycle(start: str) -> Optional[list[str]]:
        stack = [(start, iter(adj.get(start, ())))]
        state[start] = 1
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if state.get(nxt, 0) == 1:
                    return path[path.index(nxt):] + [nxt]
                if state.get(nxt, 0) == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(adj.get(nxt, ()))))
                    path.append(nxt)
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
                path.pop()
        return None

    for rep in classes:
        if state.get(rep, 0) == 0:
            cyc = has_cycle(rep)
            if cyc:
                return OrderResult(False, conflict=(
                    "strict order cycle: " + " < ".join(cyc)))

    # ---- build a witness placement: topological order ----
    indeg = {rep: 0 for rep in classes}
    for lo, hi in edges:
        indeg[hi] += 1
    ready = sorted(r for r, d in indeg.items() if d == 0)
    position: dict[str, float] = {}
    counter = 0.0
    while ready:
        rep = ready.pop(0)
        position[rep] = counter
        counter += 1.0
        for lo, hi in sorted(edges):
            if lo == rep:
                indeg[hi] -= 1
                if indeg[hi] == 0:
                    ready.append(hi)
        ready.sort()
    placement = {n: position[find(n)] for n in names}
    out_bits: dict[str, bool] = {}
    if universe.predicate:
        for n in names:
            rep = find(n)
            out_bits[n] = bits.get(rep, False)
    return OrderResult(True, placement=placement, bits=out_bits or None)


# ---------------------------------------------------------------------------
# Parameter regions over a finite witness base
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamRegion:
    """Where one fresh universe element sits relative to a marker sequence
    (the universe's cuts and base points plus any fresh witness base points,
    ascending): equal to a named base point, or strictly inside one of the
    gaps between consecutive markers; plus its predicate bit when the
    universe has one.

    Regions are refined by every cut, so a region lies entirely on one side
    of each cut — the premise and goal families are constant on it.
    Convention: the strict outside of a leading or trailing cut is empty
    (such a cut is an extreme of the order), and every gap between two
    consecutive declared markers is inhabited.
    """
    kind: str  # "eq" | "gap"
    at: Optional[str] = None   # eq: the base point
    lo: Optional[str] = None   # gap: marker just below (None = open start)
    hi: Optional[str] = None   # gap: marker just above (None = open end)
    bit: Optional[bool] = None

    def describe(self) -> str:
        if self.kind == "eq":
            where = f"= {self.at}"
        elif self.lo is None and self.hi is None:
            where = "anywhere"
        elif self.lo is None:
            where = f"< {self.hi}"
        elif self.hi is None:
            where = f"> {self.lo}"
        else:
            where = f"{self.lo} < . < {self.hi}"
        if self.bit is not None:
            where += f", {'P' if self.bit else 'not P'}"
        return where

    def literals(self, name: str, base_points: set[str]) -> list[OrderLit]:
        """Order/bit literals tying the fresh point to *named elements*.
        Bounds that are cuts carry no literal; their side information is
        semantic and read off with side_of_cut."""
        out: list[OrderLit] = []
        if self.kind == "eq":
            out.append(("eq", name, self.at))
        else:
            if self.lo is not None and self.lo in base_points:
                out.append(("lt", self.lo, name))
            if self.hi is not None and self.hi in base_points:
                out.append(("lt", name, self.hi))
        if self.bit is not None:
            out.append(("bit", name, self.bit))
        return out

    def side_of_cut(self, cut: str, pos: dict[str, int]) -> str:
        """"below" or "above": the region's side of the cut. Total because
        regions are refined by every cut in the marker sequence."""
        c = pos[cut]
        if self.kind == "eq":
            return "below" if pos[self.at] < c else "above"
        if self.hi is not None and pos[self.hi] <= c:
            return "below"
        if self.lo is not None and pos[self.lo] >= c:
            return "above"
        raise OrderError(f"region {self.describe()} straddles cut {cut!r}")


def enumerate_param_regions(
    universe: OrderUniverse,
    markers: tuple[str, ...],
    base_bits: dict[str, Optional[bool]],
) -> list[ParamRegion]:
    """Deterministic list of fresh-point positions over a marker sequence.

    ``markers`` lists every cut of the universe and every base point of the
    witness (anchors and fresh), ascending.  Emits an "eq" region per base
    point and a "gap" region per inhabited gap; under a predicate, gap
    regions split by bit (open regions are dense and codense) and "eq"
    regions carry the point's bit.
    """
    dlop = universe.predicate is not None
    is_base = [not universe.is_cut(m) for m in markers]
    gap_bits: list[Optional[bool]] = [False, True] if dlop else [None]

    out: list[ParamRegion] = []
    anchor_names = {p for p, _ in universe.base_points}
    for m, isb in zip(markers, is_base):
        if isb:
            bit = None
            if dlop:
                bit = base_bits.get(m)
                if bit is None and m in anchor_names:
                    bit = universe.point_bit(m)
            out.append(ParamRegion("eq", at=m, bit=bit))
    bounds: list[tuple[Optional[str], Optional[str]]] = []
    if not markers:
        bounds.append((None, None))
    else:
        if not universe.is_cut(markers[0]):
            bounds.append((None, markers[0]))
        for a, b in zip(markers, markers[1:]):
            bounds.append((a, b))
        if not universe.is_cut(markers[-1]):
            bounds.append((markers[-1], None))
    for lo, hi in bounds:
        for bit in gap_bits:
            out.append(ParamRegion("gap", lo=lo, hi=hi, bit=bit))
    return out
