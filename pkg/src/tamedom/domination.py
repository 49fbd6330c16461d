"""Domination, equidominance, witness search and refutation, and weak
orthogonality — generic over the two theory backends, with re-checkable
certificates.

Everything here reasons about finite cores.  A witness is a complete
quantifier-free type over a small base in the joined variables of the two
schemas; a domination check iterates the goal schema's literal families over
bounded parameter types.  Entailed verdicts carry a finite premise core whose
join with the negated target is inconsistent; Refuted verdicts carry a finite
member structure realizing the premise content plus the negated target.
Entailed is conclusive (a finite proof); Refuted is conclusive under the
backend's locality contract and can be stress-tested with probes.  Negative
claims over all witnesses are always reported as bounded by the base budget,
never as theorems.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

from .cuts import (
    CutType,
    OrderError,
    OrderLit,
    OrderUniverse,
    ParamRegion,
    dlo_consistent,
    enumerate_param_regions,
    rename_order_type,
)
from .engine import (
    Extension,
    _Propagator,
    branch_complete,
    close,
    consistency_search,
    enumerate_extensions,
    is_member,
)
from .schemas import SchemaError, TypeSchema, rename_schema, _forced_completion
from .structures import (
    Literal,
    PartialStructure,
    PointKind,
    StructureError,
    iso_canonical,
)
from .theory import TheorySpec

ENTAILED = "Entailed"
REFUTED = "Refuted"
EXHAUSTED = "ExhaustedAtBudget"

MAX_BASE_POINTS = 4  # a witness base stays desk-sized

Schema = Union[TypeSchema, CutType]


class DominationError(Exception):
    """Malformed input to a domination check."""


# ---------------------------------------------------------------------------
# JSON plumbing: structures and literals as plain data, re-buildable
# ---------------------------------------------------------------------------


def struct_to_json(s: PartialStructure) -> dict:
    atoms = []
    for (ri, pts), val in sorted(s.atoms.items()):
        atoms.append([
            s.sig.relations[ri].name,
            [s.points[p].name for p in pts],
            bool(val),
        ])
    return {
        "points": [[p.name, p.kind.name] for p in s.points],
        "atoms": atoms,
    }


def struct_from_json(theory: TheorySpec, data: dict) -> PartialStructure:
    s = PartialStructure(theory.signature)
    for name, kind in data["points"]:
        s.add_point(name, PointKind[kind])
    rel_idx = {r.name: i for i, r in enumerate(theory.signature.relations)}
    for rel, names, val in data["atoms"]:
        s.set_value(rel_idx[rel], tuple(s.pid(n) for n in names), bool(val))
    return s


def lit_json(rel: str, names: Sequence[str], val: bool) -> list:
    return [rel, list(names), bool(val)]


# ---------------------------------------------------------------------------
# Verdict objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetCheck:
    """One checked goal target with its certificate."""

    target: dict
    verdict: str  # ENTAILED | REFUTED
    method: str
    certificate: dict

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "verdict": self.verdict,
            "method": self.method,
            "certificate": self.certificate,
        }


@dataclass(frozen=True)
class Verdict:
    """Outcome of a domination-style check.

    kind Entailed carries every target check; Refuted carries the refuting
    check plus the counter structure; ExhaustedAtBudget echoes the budgets.
    """

    kind: str
    backend: str
    witness: Optional[dict]
    checks: tuple[TargetCheck, ...]
    counter: Optional[dict]
    bounded: dict
    note: str = ""

    def to_json(self) -> dict:
        out = {
            "verdict": self.kind,
            "backend": self.backend,
            "bounded": dict(self.bounded),
            "checks": [c.to_json() for c in self.checks],
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.counter is not None:
            out["counter"] = self.counter
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class SearchOutcome:
    """Result of search_witness: the first entailed witness, or exhaustion."""

    verdict: Verdict
    witness: Optional[object]  # WitnessType | OrderWitness
    candidates_tried: int

    @property
    def found(self) -> bool:
        return self.verdict.kind == ENTAILED

    def to_json(self) -> dict:
        out = self.verdict.to_json()
        out["candidates_tried"] = self.candidates_tried
        return out


@dataclass(frozen=True)
class RefutationReport:
    """Every witness candidate up to the base budget, each with its verdict.

    The claim this report carries is explicitly bounded: it says every
    candidate over bases of size <= base_budget is refuted, nothing more.
    """

    premise: str
    goal: str
    backend: str
    candidate_count: int
    verdicts: tuple[Verdict, ...]
    all_refuted: bool
    bounded: dict
    statement: str
    probes: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {
            "premise": self.premise,
            "goal": self.goal,
            "backend": self.backend,
            "candidate_count": self.candidate_count,
            "all_refuted": self.all_refuted,
            "bounded": dict(self.bounded),
            "statement": self.statement,
            "verdicts": [v.to_json() for v in self.verdicts],
            "probes": list(self.probes),
        }


# ---------------------------------------------------------------------------
# Amalgamation-backend witnesses
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class WitnessType:
    """A complete qf type over a small base A in the joined variables.

    The core is a fully decided member structure on A plus one point per
    variable class (merged variables share a point; realized variables sit
    on their constants).  It extends both schemas' restrictions to A — this
    is membership in S_pq(A).
    """

    p: TypeSchema
    q: TypeSchema
    base: PartialStructure
    merge: tuple[tuple[str, str], ...]
    core: PartialStructure
    p_pid: dict[str, int]
    q_pid: dict[str, int]
    label: str

    @property
    def p_var_of(self) -> dict[int, int]:
        return {self.p_pid[v]: i for i, v in enumerate(self.p.free_vars)}

    @property
    def q_var_of(self) -> dict[int, int]:
        return {self.q_pid[v]: i for i, v in enumerate(self.q.free_vars)}

    def flipped(self) -> "WitnessType":
        return WitnessType(
            p=self.q, q=self.p, base=self.base,
            merge=tuple((b, a) for a, b in self.merge),
            core=self.core, p_pid=self.q_pid, q_pid=self.p_pid,
            label=self.label,
        )

    def to_json(self) -> dict:
        return {
            "backend": "amalgamation",
            "label": self.label,
            "base": struct_to_json(self.base),
            "merge": [[a, b] for a, b in self.merge],
            "core": struct_to_json(self.core),
        }

    def validate(self) -> None:
        """Member-accepted and extends both restrictions (raises if not)."""
        theory = self.p.theory
        if not is_member(self.core, theory):
            raise DominationError(f"witness {self.label}: core not a member")
        for schema, pid_of in ((self.p, self.p_pid), (self.q, self.q_pid)):
            var_of = {pid_of[v]: i for i, v in enumerate(schema.free_vars)}
            base_pids = set(range(len(self.base.points)))
            scope = set(var_of) | base_pids
            for (ri, pts), val in self.core.atoms.items():
                sp = set(pts)
                if sp & set(var_of) and sp <= scope:
                    want = schema.decide_atom(self.core, ri, pts, var_of)
                    if want != val:
                        raise DominationError(
                            f"witness {self.label}: core disagrees with "
                            f"{schema.name} on a restriction atom"
                        )


def _joint_base(p: TypeSchema, q: TypeSchema) -> PartialStructure:
    """Union of both schemas' constants, completed to a member structure."""
    theory = p.theory
    s = PartialStructure(theory.signature)
    for n in p.base_names:
        s.add_point(n, PointKind.BASE)
    for n in q.base_names:
        if not s.has_point(n):
            s.add_point(n, PointKind.BASE)
    try:
        for schema in (p, q):
            for (ri, pts), val in schema.base_struct.atoms.items():
                mapped = tuple(
                    s.pid(schema.base_struct.points[x].name) for x in pts
                )
                s.set_value(ri, mapped, val)
    except StructureError as e:
        raise DominationError(f"joint base of {p.name},{q.name}: {e}") from e
    done, _notes, failures = _forced_completion(s, theory, "joint base")
    if failures:
        raise DominationError(
            f"joint base of {p.name},{q.name} is ambiguous: "
            + "; ".join(failures)
        )
    return done


def enumerate_bases(
    p: TypeSchema, q: TypeSchema, base_budget: int
) -> list[PartialStructure]:
    """All member base structures of total size <= base_budget containing
    the joint constants, up to isomorphism over the constants.  The joint
    constant structure itself is always included, even when it already
    exceeds the budget (a base cannot drop constants)."""
    if base_budget > MAX_BASE_POINTS:
        raise DominationError(
            f"base budget {base_budget} exceeds the witness cap "
            f"{MAX_BASE_POINTS}"
        )
    theory = p.theory
    a0 = _joint_base(p, q)
    n0 = len(a0.points)
    out = [a0]
    seen = {iso_canonical(a0, fixed=range(n0))}
    for k in range(1, max(0, base_budget - n0) + 1):
        for ext in enumerate_extensions(
            a0, k, theory, kind=PointKind.BASE, fresh_prefix="b"
        ):
            if not ext.fresh_pids:
                continue  # slots on existing points add no new base
            key = iso_canonical(ext.struct, fixed=range(n0))
            if key in seen:
                continue
            seen.add(key)
            out.append(ext.struct)
    return out


def merge_maps(
    p_vars: Sequence[str], q_vars: Sequence[str]
) -> list[tuple[tuple[str, str], ...]]:
    """Every injective partial matching between the two free-variable lists,
    largest first (a dominating witness usually identifies coordinates), then
    in deterministic generation order."""
    out: list[tuple[tuple[str, str], ...]] = []
    top = min(len(p_vars), len(q_vars))
    for k in range(top, -1, -1):
        for psel in itertools.combinations(range(len(p_vars)), k):
            for qsel in itertools.permutations(range(len(q_vars)), k):
                out.append(tuple(
                    (p_vars[i], q_vars[j]) for i, j in zip(psel, qsel)
                ))
    return out


def witnesses_for_merge(
    p: TypeSchema,
    q: TypeSchema,
    base: PartialStructure,
    merge: tuple[tuple[str, str], ...],
) -> list[WitnessType]:
    """All completions of the merged variable diagram over the base to
    member types — the S_pq(A) candidates carrying this merge map.  Empty
    when the two restrictions clash under the merge."""
    theory = p.theory
    core = base.copy()
    p_pid: dict[str, int] = {}
    q_pid: dict[str, int] = {}
    for v, c in p.realised:
        p_pid[v] = core.pid(c)
    for v, c in q.realised:
        q_pid[v] = core.pid(c)
    q_of_p = dict(merge)
    p_of_q = {b: a for a, b in merge}
    for v in p.free_vars:
        qv = q_of_p.get(v)
        nm = f"{v}={qv}" if qv is not None else v
        while core.has_point(nm):
            nm += "'"
        pid = core.add_point(nm, PointKind.VAR)
        p_pid[v] = pid
        if qv is not None:
            q_pid[qv] = pid
    for v in q.free_vars:
        if v not in p_of_q:
            nm = v
            while core.has_point(nm):
                nm += "'"
            q_pid[v] = core.add_point(nm, PointKind.VAR)
    p_var_of = {p_pid[v]: i for i, v in enumerate(p.free_vars)}
    q_var_of = {q_pid[v]: i for i, v in enumerate(q.free_vars)}
    base_pids = set(range(len(base.points)))
    try:
        # internal atoms off both compiled cores
        for schema, pid_of in ((p, p_pid), (q, q_pid)):
            cmap = {schema.core.pid(n): core.pid(n)
                    for n in schema.base_names}
            for v in schema.vars:
                cmap[schema.var_pid[v]] = pid_of[v]
            for (ri, pts), val in sorted(schema.core.atoms.items()):
                core.set_value(ri, tuple(cmap[x] for x in pts), val)
        # rule families at the base: each schema decides its own atoms, and
        # atoms another source already decided (a core copy, the base, or the
        # other schema under a merge) must agree with that decision.  Slots
        # without a parameter position belong to the compiled cores and were
        # cross-checked while copying.  A slot may only become decidable once
        # its parameters' atoms over the deciding schema's constants are
        # present, so sweep to a fixpoint.
        def eligible(sp: set, var_of: dict) -> bool:
            return bool(sp & set(var_of)) and bool(sp & base_pids) \
                and sp <= (set(var_of) | base_pids)

        pending = []
        for ri, pts in core.all_slots():
            sp = set(pts)
            if sp <= base_pids:
                continue
            if eligible(sp, p_var_of) or eligible(sp, q_var_of):
                pending.append((ri, pts))
        while pending:
            deferred = []
            for ri, pts in pending:
                sp = set(pts)
                decided = False
                for schema, var_of in ((p, p_var_of), (q, q_var_of)):
                    if not eligible(sp, var_of):
                        continue
                    try:
                        val = schema.decide_atom(core, ri, pts, var_of)
                    except SchemaError:
                        continue
                    core.set_value(ri, pts, val)  # clashes caught below
                    decided = True
                if not decided:
                    deferred.append((ri, pts))
            if len(deferred) == len(pending):
                raise DominationError(
                    f"witness diagram for {p.name} vs {q.name} left "
                    f"{len(deferred)} rule-family atoms undecidable"
                )
            pending = deferred
    except StructureError:
        return []  # restrictions clash under this merge: no candidates
    res = consistency_search(core, theory, all_solutions=True,
                             want_trace=False)
    if not res.consistent:
        return []
    merge_label = ",".join(f"{a}={b}" for a, b in merge) or "none"
    out = []
    for i, model in enumerate(res.models):
        out.append(WitnessType(
            p=p, q=q, base=base, merge=tuple(merge), core=model.struct,
            p_pid=dict(p_pid), q_pid=dict(q_pid),
            label=f"|A|={len(base.points)};merge={merge_label};r{i}",
        ))
    return out


def enumerate_witnesses(
    p: TypeSchema, q: TypeSchema, base_budget: int
) -> Iterator[WitnessType]:
    """S_pq(A) over every base up to the budget, deterministic order."""
    for base in enumerate_bases(p, q, base_budget):
        for mm in merge_maps(p.free_vars, q.free_vars):
            for w in witnesses_for_merge(p, q, base, mm):
                yield w


# ---------------------------------------------------------------------------
# Target checking (amalgamation backend)
# ---------------------------------------------------------------------------


class _ExtCache:
    """Extension types over a base, cached per (base identity, arity)."""

    def __init__(self) -> None:
        self._store: dict[tuple[int, int], list[Extension]] = {}

    def get(self, base: PartialStructure, m: int,
            theory: TheorySpec) -> list[Extension]:
        key = (id(base), m)
        if key not in self._store:
            self._store[key] = list(enumerate_extensions(base, m, theory))
        return self._store[key]


def _graft(
    w: WitnessType, ext: Extension
) -> tuple[PartialStructure, list[int]]:
    """Copy the witness core and adjoin the extension's fresh points with
    their atoms over the base; returns (scratch, pids of the slot tuple)."""
    scratch = w.core.copy()
    pid_map: dict[int, int] = {i: i for i in range(len(w.base.points))}
    for fp in ext.fresh_pids:
        nm = ext.struct.points[fp].name
        while scratch.has_point(nm):
            nm += "'"
        pid_map[fp] = scratch.add_point(nm, PointKind.PARAM)
    fresh = set(ext.fresh_pids)
    for (ri, pts), val in sorted(ext.struct.atoms.items()):
        if any(x in fresh for x in pts):
            scratch.set_value(ri, tuple(pid_map[x] for x in pts), val)
    return scratch, [pid_map[x] for x in ext.slot_pids]


def _premise_fill(scratch: PartialStructure, w: WitnessType,
                  new_pids: Sequence[int]) -> None:
    """Decide every undecided atom the premise schema speaks about that
    touches a fresh parameter: premise variables with parameters drawn from
    the base and the fresh points.  Atoms involving unmerged goal variables
    stay free — the premise knows nothing about them."""
    p = w.p
    var_of = w.p_var_of
    base_pids = set(range(len(w.base.points)))
    scope = set(var_of) | base_pids | set(new_pids)
    news = set(new_pids)
    if not var_of or not news:
        return
    vars_ = set(var_of)
    pcache: dict = {}
    for ri, pts in scratch.all_slots():
        if scratch.value(ri, pts) is not None:
            continue
        sp = set(pts)
        if not (sp & vars_) or not (sp & news) or not sp <= scope:
            continue
        scratch.set_value(
            ri, pts, p.decide_atom(scratch, ri, pts, var_of, pcache)
        )


def _counter_json(struct: PartialStructure, negated: list) -> dict:
    out = struct_to_json(struct)
    out["negated_target"] = negated
    return out


class _IncCheck:
    """One propagator over a filled core, shared by every goal target at the
    same parameter type, seeded lazily on first use.  Each target sets its
    negated literal on top of the seeded state, propagates, and completes;
    the state is restored between targets."""

    __slots__ = ("scratch", "slot_pids", "theory", "prop", "ok", "keys")

    def __init__(self, scratch: PartialStructure, slot_pids: list[int],
                 theory) -> None:
        self.scratch = scratch
        self.slot_pids = slot_pids
        self.theory = theory
        self.prop: Optional[_Propagator] = None
        self.ok = False
        self.keys: Optional[list] = None

    def ensure(self) -> bool:
        if self.prop is None:
            self.prop = _Propagator(self.scratch, self.theory, record=False)
            self.ok = self.prop.seed()
        return self.ok

    def _decision_keys(self) -> list:
        if self.keys is None:
            tables = self.prop.tables
            self.keys = [k for k in self.scratch.all_slots()
                         if tables.orbit_rep(k) == k]
        return self.keys

    def state_completion(self) -> Optional[PartialStructure]:
        """Member completion of the core as it stands, or None."""
        if not self.ensure():
            return None
        return branch_complete(self.prop, self.scratch, self._decision_keys())

    def complete_with(self, key, val) -> tuple[bool, Optional[PartialStructure]]:
        """(negation propagates consistently?, member completion or None)."""
        if not self.ensure():
            return False, None
        prop = self.prop
        mark = len(prop.trail)
        if not (prop.set(key, val, "negated target") and prop.propagate()):
            prop.undo_to(mark)
            return False, None
        done = branch_complete(prop, self.scratch, self._decision_keys())
        prop.undo_to(mark)
        return True, done


def _grafted_fill(w: WitnessType, ext: Extension,
                  memo: Optional[dict] = None
                  ) -> tuple[PartialStructure, list[int], _IncCheck]:
    """Core + extension with the premise's atoms adjoined at the fresh
    parameters, plus its seeded propagator; memoized per extension since
    every goal target at the same parameter type starts from the identical
    structure.  Callers must not mutate the returned structure."""
    if memo is not None:
        hit = memo.get(id(ext))
        if hit is not None:
            return hit
    scratch, slot_pids = _graft(w, ext)
    _premise_fill(scratch, w, [x for x in slot_pids
                               if x >= len(w.core.points)])
    inc = _IncCheck(scratch, slot_pids, w.p.theory)
    out = (scratch, slot_pids, inc)
    if memo is not None:
        memo[id(ext)] = out
    return out


def entails(
    w: WitnessType,
    pattern: tuple[int, tuple[Optional[int], ...]],
    ext: Extension,
    _memo: Optional[dict] = None,
) -> TargetCheck:
    """Check one goal rule-family literal at one parameter type.

    Builds the finite core (base + witness variables + fresh parameters of
    the given type), adjoins the premise schema's atoms at the parameters,
    and tries the negated goal literal: inconsistent means Entailed with the
    core as certificate, consistent means Refuted with the completion."""
    p, q = w.p, w.q
    theory = p.theory
    ri, slots = pattern
    scratch, slot_pids, inc = _grafted_fill(w, ext, _memo)
    q_free = q.free_vars
    param_iter = iter(slot_pids)
    pts = tuple(
        w.q_pid[q_free[s]] if s is not None else next(param_iter)
        for s in slots
    )
    value = q.decide_atom(scratch, ri, pts, w.q_var_of)
    rel = theory.signature.relations[ri].name
    names = [scratch.points[x].name for x in pts]
    target = {
        "kind": "family",
        "family": q.pretty_pattern(pattern),
        "param_type": [str(l) for l in ext.struct.literals()
                       if any(ext.struct.points[ext.struct.pid(nm)].kind
                              == PointKind.PARAM for nm in l.points)],
        "literal": lit_json(rel, names, value),
    }
    negated = lit_json(rel, names, not value)
    key = (ri, pts)
    cur = scratch.value(ri, pts)
    if cur is not None and cur == value:
        return TargetCheck(
            target=target, verdict=ENTAILED, method="premise-decides",
            certificate={
                "core": struct_to_json(scratch),
                "negated": negated,
                "note": "the premise core already decides the target atom",
            },
        )
    if cur is not None:
        # the core itself carries the negation; any completion of the core
        # is a counter-model
        done = inc.state_completion()
    else:
        _, done = inc.complete_with(key, not value)
    if done is not None:
        return TargetCheck(
            target=target, verdict=REFUTED, method="counter-model",
            certificate={
                "counter": _counter_json(done, negated),
            },
        )
    core_neg = scratch.copy()
    try:
        core_neg.set_value(ri, pts, not value)
    except StructureError:
        pass
    return TargetCheck(
        target=target, verdict=ENTAILED, method="search-exhausted",
        certificate={
            "core": struct_to_json(core_neg),
            "negated": negated,
            "note": "no member completion of the core extends the negated "
                    "literal; re-run the completion search to reproduce",
        },
    )


def _distinct_check(w: WitnessType, var: str, ext: Extension,
                    _memo: Optional[dict] = None) -> TargetCheck:
    """The goal literal `var != d` at one 1-parameter type."""
    theory = w.p.theory
    vpid = w.q_pid[var]
    scratch, slot_pids, _inc = _grafted_fill(w, ext, _memo)
    dpid = slot_pids[0]
    dname = scratch.points[dpid].name
    vname = scratch.points[vpid].name
    target = {
        "kind": "distinctness",
        "literal": ["=", [vname, dname], False],
        "param_type": [str(l) for l in ext.struct.literals()
                       if any(ext.struct.points[ext.struct.pid(nm)].kind
                              == PointKind.PARAM for nm in l.points)],
    }
    if dpid < len(w.core.points):
        # parameter slot landed on a base point: distinct points of the core
        return TargetCheck(
            target=target, verdict=ENTAILED, method="witness-literal",
            certificate={"literal": f"{vname} != {dname}",
                         "note": "distinct points of the witness core"},
        )
    if vpid in w.p_var_of:
        # merged with a premise variable: the premise type is nonrealized at
        # it, so its restriction to any parameter set separates them
        pv = w.p.free_vars[w.p_var_of[vpid]]
        return TargetCheck(
            target=target, verdict=ENTAILED, method="premise-literal",
            certificate={
                "literal": f"{pv} != {dname}",
                "note": "goal variable is merged with a nonrealized premise "
                        "variable; the premise restriction separates it "
                        "from every parameter",
            },
        )
    classes = [[x] for x in scratch.point_ids() if x not in (vpid, dpid)]
    classes.append([vpid, dpid])
    try:
        merged = scratch.quotient(classes)
    except StructureError as e:
        return TargetCheck(
            target=target, verdict=ENTAILED, method="merge-clash",
            certificate={
                "core": struct_to_json(scratch),
                "identify": [vname, dname],
                "note": f"identifying the points contradicts the core: {e}",
            },
        )
    res = consistency_search(merged, theory, want_trace=False)
    if res.consistent:
        return TargetCheck(
            target=target, verdict=REFUTED, method="counter-model",
            certificate={
                "counter": _counter_json(
                    res.completion.struct, ["=", [vname, dname], True]
                ),
                "note": "the goal coordinate can land on a fresh parameter",
            },
        )
    return TargetCheck(
        target=target, verdict=ENTAILED, method="merge-search-exhausted",
        certificate={
            "core": struct_to_json(scratch),
            "identify": [vname, dname],
            "note": "no member completion identifies the two points; re-run "
                    "the completion search on the identified core to "
                    "reproduce",
        },
    )


def _restriction_check(w: WitnessType) -> TargetCheck:
    """The goal restriction itself: every goal-schema atom over the core,
    realized equalities, and declared distinctness — all literals of the
    witness by construction."""
    q = w.q
    lits: list[str] = []
    for v, c in q.realised:
        lits.append(f"{v} = {c}")
    for a, b in q.distinct:
        lits.append(
            f"{w.core.points[w.q_pid[a]].name} != "
            f"{w.core.points[w.q_pid[b]].name}"
        )
    var_of = w.q_var_of
    base_pids = set(range(len(w.base.points)))
    scope = set(var_of) | base_pids
    for (ri, pts), val in sorted(w.core.atoms.items()):
        sp = set(pts)
        if sp & set(var_of) and sp <= scope:
            lits.append(str(Literal(
                w.core.sig.relations[ri].name,
                tuple(w.core.points[x].name for x in pts), val,
            )))
    return TargetCheck(
        target={"kind": "restriction",
                "note": "goal restriction and internal atoms over the base"},
        verdict=ENTAILED, method="witness-literal",
        certificate={"literals": lits},
    )


def check_domination(
    p: Schema,
    q: Schema,
    w,
    param_budget: Optional[int] = None,
    _cache: Optional[_ExtCache] = None,
) -> Verdict:
    """Does the premise schema plus the witness entail the goal schema?

    Iterates every rule pattern of the goal and every parameter type over
    the witness base up to min(param_budget, goal max rule arity), plus the
    goal's distinctness family at one parameter.  All targets Entailed gives
    a conclusive Entailed; the first Refuted target aborts with its counter.
    """
    if isinstance(q, CutType):
        return _check_domination_order(p, q, w, param_budget)
    theory = p.theory
    cache = _cache or _ExtCache()
    if param_budget is None:
        param_budget = max(1, q.max_rule_arity) if q.free_vars else 0
    m_max = min(param_budget, q.max_rule_arity)
    bounded = {"base": len(w.base.points), "param": param_budget}
    checks: list[TargetCheck] = [_restriction_check(w)]

    def refuted(c: TargetCheck) -> Verdict:
        return Verdict(
            kind=REFUTED, backend="amalgamation", witness=w.to_json(),
            checks=tuple(checks) + (c,),
            counter=c.certificate.get("counter"), bounded=bounded,
            note=f"refuted at target {c.target}",
        )

    fill_memo: dict = {}
    # families whose designated variables are pairwise distinct first: they
    # are the generic targets, and on refuted candidates they fail fastest;
    # repeated-variable families lean on the core's own content and are
    # usually decided outright
    def _has_repeat(pat) -> bool:
        named = [s for s in pat[1] if s is not None]
        return len(named) != len(set(named))

    ordered = [pat for pat in q.patterns if not _has_repeat(pat)] + \
              [pat for pat in q.patterns if _has_repeat(pat)]
    for pattern in ordered:
        m = sum(1 for s in pattern[1] if s is None)
        if m == 0 or m > m_max:
            continue
        for ext in cache.get(w.base, m, theory):
            c = entails(w, pattern, ext, _memo=fill_memo)
            if c.verdict == REFUTED:
                return refuted(c)
            checks.append(c)
    if q.free_vars:
        for var in q.free_vars:
            for ext in cache.get(w.base, 1, theory):
                c = _distinct_check(w, var, ext, _memo=fill_memo)
                if c.verdict == REFUTED:
                    return refuted(c)
                checks.append(c)
    return Verdict(
        kind=ENTAILED, backend="amalgamation", witness=w.to_json(),
        checks=tuple(checks), counter=None, bounded=bounded,
    )


# ---------------------------------------------------------------------------
# Dense-order backend witnesses
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class OrderWitness:
    """A complete order/bit diagram over a small base chain.

    markers: the universe's cuts and anchors with the fresh base points
    interleaved, ascending. node_of maps each variable to its node; merged
    variables share a node, realized variables sit on anchors.  literals is
    the full witness content: base chain, variable bits, and every order
    edge between variables and named points.
    """

    p: CutType
    q: CutType
    markers: tuple[str, ...]
    base_points: tuple[str, ...]
    base_bits: dict[str, Optional[bool]]
    merge: tuple[tuple[str, str], ...]
    node_of: dict[str, str]
    nodes: dict[str, tuple]
    literals: tuple[OrderLit, ...]
    label: str

    def flipped(self) -> "OrderWitness":
        return OrderWitness(
            p=self.q, q=self.p, markers=self.markers,
            base_points=self.base_points, base_bits=self.base_bits,
            merge=tuple((b, a) for a, b in self.merge),
            node_of=self.node_of, nodes=self.nodes,
            literals=self.literals, label=self.label,
        )

    def to_json(self) -> dict:
        return {
            "backend": "dense-order",
            "label": self.label,
            "markers": list(self.markers),
            "base_points": list(self.base_points),
            "base_bits": {k: v for k, v in self.base_bits.items()
                          if v is not None},
            "merge": [[a, b] for a, b in self.merge],
            "nodes": {n: list(k) for n, k in self.nodes.items()},
            "literals": [list(l) for l in self.literals],
        }

    def validate(self) -> None:
        res = dlo_consistent(self.p.universe, self.nodes,
                             list(self.literals))
        if not res.consistent:
            raise DominationError(
                f"order witness {self.label} inconsistent: {res.conflict}"
            )


def _order_base_arrangements(
    universe: OrderUniverse, base_budget: int
) -> Iterator[tuple[tuple[str, ...], tuple[str, ...],
                    dict[str, Optional[bool]]]]:
    """(markers, base_points, base_bits) for every fresh chain of size
    0..budget interleaved into the universe's marker order, with every bit
    assignment under a predicate.  Fresh points keep their mutual order."""
    if base_budget > MAX_BASE_POINTS:
        raise DominationError(
            f"base budget {base_budget} exceeds the witness cap "
            f"{MAX_BASE_POINTS}"
        )
    order = list(universe.order)
    anchors = [n for n in order if not universe.is_cut(n)]
    dlop = universe.predicate is not None
    for k in range(0, base_budget + 1):
        fresh = [f"b{i}" for i in range(k)]
        for gaps in itertools.combinations_with_replacement(
            range(len(order) + 1), k
        ):
            markers: list[str] = []
            fi = 0
            for pos in range(len(order) + 1):
                while fi < k and gaps[fi] == pos:
                    markers.append(fresh[fi])
                    fi += 1
                if pos < len(order):
                    markers.append(order[pos])
            # a leading/trailing cut is an extreme: nothing lies outside it
            ok = True
            if order and universe.is_cut(order[0]):
                if any(m in fresh for m in
                       markers[: markers.index(order[0])]):
                    ok = False
            if order and universe.is_cut(order[-1]):
                if any(m in fresh for m in
                       markers[markers.index(order[-1]) + 1:]):
                    ok = False
            if not ok:
                continue
            base_points = tuple(m for m in markers
                                if m in fresh or m in anchors)
            bit_choices = (
                itertools.product((False, True), repeat=k) if dlop
                else [tuple(None for _ in range(k))]
            )
            for bits in bit_choices:
                base_bits: dict[str, Optional[bool]] = {
                    a: universe.point_bit(a) for a in anchors
                }
                base_bits.update(dict(zip(fresh, bits)))
                yield tuple(markers), base_points, base_bits


def _order_witnesses_for_merge(
    p: CutType,
    q: CutType,
    markers: tuple[str, ...],
    base_points: tuple[str, ...],
    base_bits: dict[str, Optional[bool]],
    merge: tuple[tuple[str, str], ...],
) -> list[OrderWitness]:
    universe = p.universe
    dlop = universe.predicate is not None
    q_of_p = dict(merge)
    p_of_q = {b: a for a, b in merge}
    # merged pairs must agree on cut and bit
    for pv, qv in merge:
        pp, qp = p.placements[pv], q.placements[qv]
        if pp[1] != qp[1] or (dlop and pp[3] != qp[3]):
            return []
    node_of: dict[str, str] = {}
    nodes: dict[str, tuple] = {}
    for b in base_points:
        nodes[b] = (("anchor", b) if b in {n for n, _ in universe.base_points}
                    else ("U",))
    for v, pl in list(p.placements.items()) + list(q.placements.items()):
        if pl[0] == "eq":
            node_of[v] = pl[1]
    var_info: list[tuple[str, str, Optional[bool], str]] = []
    for v in p.free_vars:
        qv = q_of_p.get(v)
        node = f"{v}={qv}" if qv is not None else v
        node_of[v] = node
        if qv is not None:
            node_of[qv] = node
        cut = p.placements[v][1]
        var_info.append((node, cut, p.placements[v][3], "p"))
    for v in q.free_vars:
        if v in p_of_q:
            continue
        node_of[v] = v
        cut = q.placements[v][1]
        var_info.append((v, cut, q.placements[v][3], "q"))
    for node, cut, _bit, _side in var_info:
        nodes[node] = ("at", cut)

    pos = {m: i for i, m in enumerate(markers)}
    base_lits: list[OrderLit] = []
    for a, b in zip(base_points, base_points[1:]):
        base_lits.append(("lt", a, b))
    for b in base_points:
        if dlop and base_bits.get(b) is not None:
            base_lits.append(("bit", b, base_bits[b]))
    var_lits: list[OrderLit] = []
    for node, cut, bit, _side in var_info:
        if dlop and bit is not None:
            var_lits.append(("bit", node, bit))
        for b in base_points:
            if pos[b] < pos[cut]:
                var_lits.append(("lt", b, node))
            else:
                var_lits.append(("lt", node, b))
    internal_edges: list[tuple[str, str]] = []
    for a, b in list(p.internal) + list(q.internal):
        internal_edges.append((node_of[a], node_of[b]))

    # order the variable classes within each cut: all linear extensions
    by_cut: dict[str, list[str]] = {}
    for node, cut, _bit, _side in var_info:
        by_cut.setdefault(cut, []).append(node)
    cut_orders: list[list[list[str]]] = []
    for cut in sorted(by_cut):
        members = sorted(set(by_cut[cut]))
        exts = []
        for perm in itertools.permutations(members):
            rank = {n: i for i, n in enumerate(perm)}
            if all(rank[a] < rank[b] for a, b in internal_edges
                   if a in rank and b in rank and a != b):
                exts.append(list(perm))
        cut_orders.append(exts)
    out: list[OrderWitness] = []
    merge_label = ",".join(f"{a}={b}" for a, b in merge) or "none"
    base_label = ",".join(
        f"{b}{'' if base_bits.get(b) is None else ':P' if base_bits[b] else ':!P'}"
        for b in base_points
    ) or "empty"
    for i, combo in enumerate(itertools.product(*cut_orders)
                              if cut_orders else [()]):
        chain_lits: list[OrderLit] = []
        for chain in combo:
            for a, b in zip(chain, chain[1:]):
                chain_lits.append(("lt", a, b))
        lits = tuple(base_lits + var_lits + chain_lits)
        w = OrderWitness(
            p=p, q=q, markers=markers, base_points=base_points,
            base_bits=dict(base_bits), merge=tuple(merge),
            node_of=dict(node_of), nodes=dict(nodes), literals=lits,
            label=f"base[{base_label}];merge={merge_label};r{i}",
        )
        res = dlo_consistent(universe, w.nodes, list(w.literals))
        if res.consistent:
            out.append(w)
    return out


def enumerate_order_witnesses(
    p: CutType, q: CutType, base_budget: int
) -> Iterator[OrderWitness]:
    if p.universe != q.universe:
        raise DominationError("order types live over different universes")
    for markers, base_points, base_bits in _order_base_arrangements(
        p.universe, base_budget
    ):
        for mm in merge_maps(p.free_vars, q.free_vars):
            for w in _order_witnesses_for_merge(
                p, q, markers, base_points, base_bits, mm
            ):
                yield w


def _order_placement_json(res) -> dict:
    out = {"placement": res.placement and
           {k: v for k, v in sorted(res.placement.items())}}
    if res.bits:
        out["bits"] = {k: v for k, v in sorted(res.bits.items())}
    return out


def _order_counter(res, negated: list) -> dict:
    out = _order_placement_json(res)
    out["negated_target"] = negated
    return out


def _check_domination_order(
    p: CutType, q: CutType, w: OrderWitness,
    param_budget: Optional[int] = None,
) -> Verdict:
    """Order-backend domination: premise variables carry their cut families
    (implied edges and explicit region edges); the goal's cut family, bit,
    and internal order are tested per parameter region, with both negation
    shapes (strictly beyond, and equal) needing to fail."""
    universe = p.universe
    dlop = universe.predicate is not None
    if param_budget is None:
        param_budget = 1 if q.free_vars else 0
    bounded = {"base": len(w.base_points), "param": param_budget}
    pos = {m: i for i, m in enumerate(w.markers)}
    checks: list[TargetCheck] = []

    # restriction block: goal placements/bits/internal are witness literals
    rest_lits: list[str] = []
    for v in q.vars:
        pl = q.placements[v]
        if pl[0] == "eq":
            rest_lits.append(f"{v} = {pl[1]}")
        else:
            rest_lits.append(
                f"{node_name(w, v)} at cut {pl[1]} from {pl[2]}"
                + (f", {'P' if pl[3] else 'not P'}" if dlop else "")
            )
    for a, b in q.internal:
        rest_lits.append(f"{node_name(w, a)} < {node_name(w, b)}")
    checks.append(TargetCheck(
        target={"kind": "restriction",
                "note": "goal placements, bits, and internal order"},
        verdict=ENTAILED, method="witness-literal",
        certificate={"literals": rest_lits},
    ))

    def refuted(c: TargetCheck) -> Verdict:
        return Verdict(
            kind=REFUTED, backend="dense-order", witness=w.to_json(),
            checks=tuple(checks) + (c,),
            counter=c.certificate.get("counter"), bounded=bounded,
            note=f"refuted at target {c.target}",
        )

    # Premise variable classes keep their cut kind (their families are
    # premise content); unmerged goal classes become free nodes — their
    # relation to fresh universe elements is exactly what must be entailed,
    # never assumed.  The explicit witness literals still pin every variable
    # against the base points.
    premise_nodes = {w.node_of[v] for v in p.free_vars}
    base_env = dict(w.nodes)
    for v in q.free_vars:
        node = w.node_of[v]
        if node not in premise_nodes:
            base_env[node] = ("free",)
    base_set = set(w.base_points)
    premise_vars = [
        (w.node_of[v], p.placements[v][1]) for v in p.free_vars
    ]
    regions = (enumerate_param_regions(universe, w.markers, w.base_bits)
               if param_budget >= 1 else [])

    if q.free_vars:
        for v in q.free_vars:
            node = w.node_of[v]
            cut = q.placements[v][1]
            bit = q.placements[v][3]
            for region in regions:
                env = dict(base_env)
                env["d0"] = ("U",)
                lits = list(w.literals) + region.literals("d0", base_set)
                for pn, pcut in premise_vars:
                    side = region.side_of_cut(pcut, pos)
                    lits.append(("lt", "d0", pn) if side == "below"
                                else ("lt", pn, "d0"))
                side = region.side_of_cut(cut, pos)
                target_lit: OrderLit = (("lt", "d0", node)
                                        if side == "below"
                                        else ("lt", node, "d0"))
                negations: list[OrderLit] = [
                    ("lt", target_lit[2], target_lit[1]),  # wrong side
                    ("eq", node, "d0"),  # or landing on the parameter
                ]
                target = {
                    "kind": "cut-family",
                    "variable": node,
                    "region": region.describe(),
                    "literal": list(target_lit),
                }
                conflicts = []
                counter = None
                negation_used = None
                for neg in negations:
                    res = dlo_consistent(universe, env, lits + [neg])
                    if res.consistent:
                        counter = _order_counter(res, list(neg))
                        negation_used = neg
                        break
                    conflicts.append(res.conflict)
                if counter is not None:
                    c = TargetCheck(
                        target=target, verdict=REFUTED,
                        method="counter-placement",
                        certificate={
                            "counter": counter,
                            "nodes": {n: list(k) for n, k in env.items()},
                            "literals": [list(l) for l in lits],
                            "negated": list(negation_used),
                        },
                    )
                    return refuted(c)
                checks.append(TargetCheck(
                    target=target, verdict=ENTAILED,
                    method="placement-exhausted",
                    certificate={
                        "nodes": {n: list(k) for n, k in env.items()},
                        "literals": [list(l) for l in lits],
                        "negations": [list(n) for n in negations],
                        "conflicts": conflicts,
                    },
                ))
            if dlop:
                target = {"kind": "bit", "variable": node,
                          "literal": ["bit", node, bit]}
                res = dlo_consistent(
                    universe, base_env,
                    list(w.literals) + [("bit", node, not bit)],
                )
                if res.consistent:
                    c = TargetCheck(
                        target=target, verdict=REFUTED,
                        method="counter-placement",
                        certificate={
                            "counter": _order_counter(
                                res, ["bit", node, not bit]),
                            "nodes": {n: list(k)
                                      for n, k in base_env.items()},
                            "literals": [list(l) for l in w.literals],
                            "negated": ["bit", node, not bit],
                        },
                    )
                    return refuted(c)
                checks.append(TargetCheck(
                    target=target, verdict=ENTAILED,
                    method="placement-exhausted",
                    certificate={
                        "nodes": {n: list(k) for n, k in base_env.items()},
                        "literals": [list(l) for l in w.literals],
                        "negations": [["bit", node, not bit]],
                        "conflicts": [res.conflict],
                    },
                ))
    for a, b in q.internal:
        na, nb = w.node_of[a], w.node_of[b]
        target = {"kind": "internal-order", "literal": ["lt", na, nb]}
        conflicts = []
        counter = None
        negation_used = None
        for neg in (("lt", nb, na), ("eq", na, nb)):
            res = dlo_consistent(universe, base_env,
                                 list(w.literals) + [neg])
            if res.consistent:
                counter = _order_counter(res, list(neg))
                negation_used = neg
                break
            conflicts.append(res.conflict)
        if counter is not None:
            c = TargetCheck(
                target=target, verdict=REFUTED, method="counter-placement",
                certificate={
                    "counter": counter,
                    "nodes": {n: list(k) for n, k in base_env.items()},
                    "literals": [list(l) for l in w.literals],
                    "negated": list(negation_used),
                },
            )
            return refuted(c)
        checks.append(TargetCheck(
            target=target, verdict=ENTAILED, method="placement-exhausted",
            certificate={
                "nodes": {n: list(k) for n, k in base_env.items()},
                "literals": [list(l) for l in w.literals],
                "negations": [["lt", nb, na], ["eq", na, nb]],
                "conflicts": conflicts,
            },
        ))
    return Verdict(
        kind=ENTAILED, backend="dense-order", witness=w.to_json(),
        checks=tuple(checks), counter=None, bounded=bounded,
    )


def node_name(w: OrderWitness, v: str) -> str:
    return w.node_of[v]


# ---------------------------------------------------------------------------
# Equidominance / search / refutation — backend-generic entry points
# ---------------------------------------------------------------------------


def _is_order(s: Schema) -> bool:
    return isinstance(s, CutType)


def rename_any(s: Schema, mapping: dict, name: Optional[str] = None) -> Schema:
    """Variable-rename that also handles product schemas (via their factors)."""
    if _is_order(s):
        return rename_order_type(s, dict(mapping), name=name or s.name)
    if s.factors is not None:
        from .schemas import tensor

        fp, fq = s.factors
        return tensor(rename_any(fp, mapping), rename_any(fq, mapping),
                      name=name or s.name)
    return rename_schema(s, dict(mapping), name=name or s.name)


def disjoint_copies(p: Schema, q: Schema) -> tuple[Schema, Schema, dict]:
    """Rename the goal's variables out of the premise's namespace."""
    clash = set(p.vars) & set(q.vars)
    if not clash:
        return p, q, {}
    mapping = {v: v + "'" for v in q.vars}
    return p, rename_any(q, mapping, name=q.name + "'"), mapping


def check_equidominance(
    p: Schema, q: Schema, w, param_budget: Optional[int] = None
) -> Verdict:
    """Both directions with the single shared witness; Entailed iff both."""
    d1 = check_domination(p, q, w, param_budget)
    d2 = check_domination(q, p, w.flipped(), param_budget)
    bounded = d1.bounded
    kind = ENTAILED if (d1.kind == ENTAILED and d2.kind == ENTAILED) \
        else REFUTED
    note = ""
    counter = None
    if kind == REFUTED:
        bad = d1 if d1.kind == REFUTED else d2
        direction = "premise->goal" if bad is d1 else "goal->premise"
        note = f"direction {direction} refuted"
        counter = bad.counter
    return Verdict(
        kind=kind, backend=d1.backend, witness=w.to_json(),
        checks=tuple(
            TargetCheck(
                target={"kind": "direction",
                        "direction": name, **c.target},
                verdict=c.verdict, method=c.method,
                certificate=c.certificate,
            )
            for name, d in (("p>=q", d1), ("q>=p", d2))
            for c in d.checks
        ),
        counter=counter, bounded=bounded, note=note,
    )


def _witness_stream(p: Schema, q: Schema, base_budget: int):
    if _is_order(p) != _is_order(q):
        raise DominationError("cannot mix backends in one check")
    if _is_order(p):
        return enumerate_order_witnesses(p, q, base_budget)
    return enumerate_witnesses(p, q, base_budget)


def search_witness(
    p: Schema,
    q: Schema,
    base_budget: int = 2,
    param_budget: Optional[int] = None,
    equi: bool = False,
) -> SearchOutcome:
    """First witness (deterministic order) entailing p >= q — or, with
    equi=True, entailing both directions through the same witness."""
    p2, q2, _ = disjoint_copies(p, q)
    cache = _ExtCache()
    tried = 0
    for w in _witness_stream(p2, q2, base_budget):
        tried += 1
        if equi:
            v = check_equidominance(p2, q2, w, param_budget)
        else:
            v = check_domination(p2, q2, w, param_budget, _cache=cache)
        if v.kind == ENTAILED:
            return SearchOutcome(verdict=v, witness=w,
                                 candidates_tried=tried)
    backend = "dense-order" if _is_order(p) else "amalgamation"
    return SearchOutcome(
        verdict=Verdict(
            kind=EXHAUSTED, backend=backend, witness=None, checks=(),
            counter=None,
            bounded={"base": base_budget, "param": param_budget},
            note=f"no witness over bases of size <= {base_budget} "
                 f"({tried} candidates checked)",
        ),
        witness=None, candidates_tried=tried,
    )


def refute_all_witnesses(
    p: Schema,
    q: Schema,
    base_budget: int = 1,
    param_budget: Optional[int] = None,
    probes: int = 0,
    parallel: bool = False,
    equi: bool = False,
) -> RefutationReport:
    """Check every witness candidate up to the base budget; the bounded
    universal refutation.  With equi=True each candidate is checked as a
    shared equidominance witness instead."""
    p2, q2, _ = disjoint_copies(p, q)
    candidates = list(_witness_stream(p2, q2, base_budget))
    cache = _ExtCache()

    def run(w) -> Verdict:
        if equi:
            return check_equidominance(p2, q2, w, param_budget)
        return check_domination(p2, q2, w, param_budget, _cache=cache)

    if parallel and candidates:
        with ThreadPoolExecutor() as pool:
            verdicts = tuple(pool.map(run, candidates))
    else:
        verdicts = tuple(run(w) for w in candidates)
    all_refuted = all(v.kind == REFUTED for v in verdicts)
    backend = "dense-order" if _is_order(p) else "amalgamation"
    relation = "equidominance" if equi else "domination"
    statement = (
        f"every witness candidate for {relation} of {q.name} by {p.name} "
        f"over bases of size <= {base_budget} is refuted; this is a bounded "
        f"claim about the enumerated candidates, not a theorem over all "
        f"small bases"
        if all_refuted else
        f"{sum(v.kind != REFUTED for v in verdicts)} candidate(s) were not "
        f"refuted"
    )
    probe_results: list[dict] = []
    if probes > 0:
        # probe a deterministic sample of the refuted counters, spread
        # across the candidate order rather than clustered at the front
        cap = 64
        refuted = [(w, v) for w, v in zip(candidates, verdicts)
                   if v.kind == REFUTED]
        stride = max(1, len(refuted) // cap)
        for w, v in refuted[::stride][:cap]:
            probe_results.append(probe_refutation(p2, q2, w, v, probes))
    return RefutationReport(
        premise=p.name, goal=q.name, backend=backend,
        candidate_count=len(candidates), verdicts=verdicts,
        all_refuted=all_refuted,
        bounded={"base": base_budget, "param": param_budget,
                 "relation": relation},
        statement=statement, probes=tuple(probe_results),
    )


# ---------------------------------------------------------------------------
# Probe mode: stress the locality behind Refuted verdicts
# ---------------------------------------------------------------------------


def probe_refutation(p: Schema, q: Schema, w, verdict: Verdict,
                     probes: int = 2) -> dict:
    """Adjoin j = 1..probes extra fresh points with premise-decided atoms to
    the counter and re-check consistency for every extension type of the
    base.  A counter that dies under a probe would falsify the locality
    contract behind Refuted."""
    if verdict.kind != REFUTED or verdict.counter is None:
        return {"witness": getattr(w, "label", "?"), "skipped": True}
    if _is_order(p):
        return _probe_order(p, w, verdict, probes)
    theory = p.theory
    counter = struct_from_json(theory, verdict.counter)
    name_pid = {pt.name: i for i, pt in enumerate(counter.points)}
    var_of = {}
    for v in p.free_vars:
        pid = w.p_pid[v]
        nm = w.core.points[pid].name
        if nm in name_pid:
            var_of[name_pid[nm]] = p.free_vars.index(v)
    results = []
    ok = True
    for j in range(1, probes + 1):
        for ext in enumerate_extensions(w.base, j, theory,
                                        fresh_prefix="e"):
            if not ext.fresh_pids:
                continue
            s = counter.copy()
            pid_map = {}
            for fp in ext.fresh_pids:
                nm = ext.struct.points[fp].name
                while s.has_point(nm):
                    nm += "'"
                pid_map[fp] = s.add_point(nm, PointKind.PARAM)
            try:
                fresh = set(ext.fresh_pids)
                for (ri, pts), val in sorted(ext.struct.atoms.items()):
                    if any(x in fresh for x in pts):
                        mapped = tuple(
                            pid_map[x] if x in pid_map
                            else name_pid[w.base.points[x].name]
                            for x in pts
                        )
                        s.set_value(ri, mapped, val)
                news = set(pid_map.values())
                base_in_counter = {
                    name_pid[pt.name] for pt in w.base.points
                    if pt.name in name_pid
                }
                scope = set(var_of) | base_in_counter | news
                pcache: dict = {}
                for ri, pts in s.all_slots():
                    if s.value(ri, pts) is not None:
                        continue
                    sp = set(pts)
                    if (sp & set(var_of)) and (sp & news) and sp <= scope:
                        s.set_value(ri, pts,
                                    p.decide_atom(s, ri, pts, var_of,
                                                  pcache))
                res = consistency_search(s, theory, want_trace=False)
                alive = res.consistent
            except (StructureError, SchemaError):
                alive = False
            results.append({"extra_points": j, "consistent": alive})
            ok = ok and alive
    return {"witness": w.label, "survived": ok, "rounds": results}


def _probe_order(p: CutType, w: OrderWitness, verdict: Verdict,
                 probes: int) -> dict:
    cert = verdict.checks[-1].certificate
    nodes = {n: tuple(k) for n, k in cert["nodes"].items()}
    lits = [tuple(l) for l in cert["literals"]]
    neg = tuple(cert["negated"])
    results = []
    ok = True
    for j in range(1, probes + 1):
        env = dict(nodes)
        for i in range(j):
            env[f"e{i}"] = ("U",)
        res = dlo_consistent(p.universe, env, lits + [neg])
        results.append({"extra_points": j, "consistent": res.consistent})
        ok = ok and res.consistent
    return {"witness": w.label, "survived": ok, "rounds": results}


# ---------------------------------------------------------------------------
# Weak orthogonality
# ---------------------------------------------------------------------------


def weakly_orthogonal(
    p: Schema, q: Schema, param_budget: Optional[int] = None
) -> Verdict:
    """Is the union of the two types complete — every atom mixing their
    variables (with parameters up to the budget) decided one way?"""
    p2, q2, _ = disjoint_copies(p, q)
    if _is_order(p2):
        return _weakly_orthogonal_order(p2, q2)
    theory = p2.theory
    if param_budget is None:
        param_budget = max(p2.max_rule_arity, q2.max_rule_arity)
    base = _joint_base(p2, q2)
    ws = witnesses_for_merge(p2, q2, base, ())
    bounded = {"base": len(base.points), "param": param_budget}
    if not ws:
        # the union is inconsistent at the restriction level: vacuous
        return Verdict(
            kind=ENTAILED, backend="amalgamation", witness=None, checks=(),
            counter=None, bounded=bounded,
            note="the joined restrictions are inconsistent",
        )
    # mixed content is what completion search leaves open: rebuild the seed
    seed = None
    checks: list[TargetCheck] = []
    w0 = ws[0]
    core = base.copy()
    # rebuild the pre-search seed exactly as witnesses_for_merge does
    p_pid, q_pid = w0.p_pid, w0.q_pid
    for schema, pid_of in ((p2, p_pid), (q2, q_pid)):
        cmap = {schema.core.pid(n): core.pid(n) for n in schema.base_names}
        for v in schema.vars:
            if v in dict(schema.realised):
                continue
            if not core.has_point(w0.core.points[pid_of[v]].name):
                core.add_point(w0.core.points[pid_of[v]].name,
                               PointKind.VAR)
    for schema, pid_of in ((p2, p_pid), (q2, q_pid)):
        cmap = {schema.core.pid(n): core.pid(n) for n in schema.base_names}
        for v in schema.vars:
            cmap[schema.var_pid[v]] = core.pid(
                w0.core.points[pid_of[v]].name)
        for (ri, pts), val in sorted(schema.core.atoms.items()):
            core.set_value(ri, tuple(cmap[x] for x in pts), val)
        var_of = {core.pid(w0.core.points[pid_of[v]].name): i
                  for i, v in enumerate(schema.free_vars)}
        base_pids = set(range(len(base.points)))
        for ri, pts in core.all_slots():
            sp = set(pts)
            if sp <= base_pids or core.value(ri, pts) is not None:
                continue
            if sp & set(var_of) and sp <= (set(var_of) | base_pids):
                core.set_value(ri, pts,
                               schema.decide_atom(core, ri, pts, var_of))
    p_set = {core.pid(w0.core.points[p_pid[v]].name)
             for v in p2.free_vars}
    q_set = {core.pid(w0.core.points[q_pid[v]].name)
             for v in q2.free_vars}
    base_pids = set(range(len(base.points)))
    cache = _ExtCache()
    max_m = max(0, param_budget)
    for m in range(0, max_m + 1):
        exts = ([None] if m == 0
                else [e for e in cache.get(base, m, theory) if
                      len(e.fresh_pids) == m])
        for ext in exts:
            if ext is None:
                scratch = core.copy()
                fresh_pids: set[int] = set()
            else:
                scratch = core.copy()
                pid_map = {i: i for i in range(len(base.points))}
                for fp in ext.fresh_pids:
                    nm = ext.struct.points[fp].name
                    while scratch.has_point(nm):
                        nm += "'"
                    pid_map[fp] = scratch.add_point(nm, PointKind.PARAM)
                fset = set(ext.fresh_pids)
                for (ri, pts), val in sorted(ext.struct.atoms.items()):
                    if any(x in fset for x in pts):
                        scratch.set_value(
                            ri, tuple(pid_map[x] for x in pts), val)
                fresh_pids = {pid_map[x] for x in ext.fresh_pids}
                # each schema's families at the fresh parameters
                for schema, vs in ((p2, p_set), (q2, q_set)):
                    var_of = {pid: i for pid, i in
                              _var_of_from(core, schema, w0, p_pid
                                           if schema is p2 else q_pid
                                           ).items()}
                    scope = vs | base_pids | fresh_pids
                    for ri, pts in scratch.all_slots():
                        if scratch.value(ri, pts) is not None:
                            continue
                        sp = set(pts)
                        if (sp & vs) and (sp & fresh_pids) and sp <= scope:
                            scratch.set_value(
                                ri, pts,
                                schema.decide_atom(scratch, ri, pts, var_of))
            closed = close(scratch, theory)
            work = closed.struct if closed.ok else scratch
            for ri, pts in work.all_slots():
                sp = set(pts)
                if not (sp & p_set) or not (sp & q_set):
                    continue
                if fresh_pids and not fresh_pids <= sp:
                    continue
                if not fresh_pids and any(
                        x not in p_set | q_set | base_pids for x in pts):
                    continue
                rel = theory.signature.relations[ri]
                if rel.symmetric and tuple(sorted(pts)) != pts:
                    continue
                if work.value(ri, pts) is not None:
                    continue
                names = [work.points[x].name for x in pts]
                outcomes = {}
                for val in (True, False):
                    trial = work.copy()
                    try:
                        trial.set_value(ri, pts, val)
                    except StructureError:
                        outcomes[val] = None
                        continue
                    res = consistency_search(trial, theory,
                                             want_trace=False)
                    outcomes[val] = (res.completion.struct
                                     if res.consistent else None)
                both = [v for v in (True, False)
                        if outcomes[v] is not None]
                if len(both) == 2:
                    return Verdict(
                        kind=REFUTED, backend="amalgamation", witness=None,
                        checks=tuple(checks) + (TargetCheck(
                            target={"kind": "mixed-atom",
                                    "literal": lit_json(rel.name, names,
                                                        True)},
                            verdict=REFUTED, method="both-consistent",
                            certificate={
                                "atom": lit_json(rel.name, names, True),
                                "true_model": struct_to_json(
                                    outcomes[True]),
                                "false_model": struct_to_json(
                                    outcomes[False]),
                            },
                        ),),
                        counter={
                            "atom": lit_json(rel.name, names, True),
                            "true_model": struct_to_json(outcomes[True]),
                            "false_model": struct_to_json(outcomes[False]),
                        },
                        bounded=bounded,
                        note=f"undecided mixed atom "
                             f"{rel.name}({','.join(names)})",
                    )
                checks.append(TargetCheck(
                    target={"kind": "mixed-atom",
                            "literal": lit_json(rel.name, names, True)},
                    verdict=ENTAILED, method="one-value-consistent",
                    certificate={"decided": bool(both and both[0])},
                ))
    # mixed equalities: both nonrealized means both placements possible
    realized_p = {v for v, _ in p2.realised}
    realized_q = {v for v, _ in q2.realised}
    for pv in p2.free_vars:
        for qv in q2.free_vars:
            if pv in realized_p or qv in realized_q:
                continue
            a = core.pid(w0.core.points[p_pid[pv]].name)
            b = core.pid(w0.core.points[q_pid[qv]].name)
            classes = [[x] for x in core.point_ids() if x not in (a, b)]
            classes.append([a, b])
            try:
                merged = core.quotient(classes)
            except StructureError:
                checks.append(TargetCheck(
                    target={"kind": "mixed-equality",
                            "literal": ["=", [pv, qv], True]},
                    verdict=ENTAILED, method="merge-clash",
                    certificate={"decided": False},
                ))
                continue
            res_eq = consistency_search(merged, theory, want_trace=False)
            res_ne = consistency_search(core, theory, want_trace=False)
            if res_eq.consistent and res_ne.consistent:
                return Verdict(
                    kind=REFUTED, backend="amalgamation", witness=None,
                    checks=tuple(checks) + (TargetCheck(
                        target={"kind": "mixed-equality",
                                "literal": ["=", [pv, qv], True]},
                        verdict=REFUTED, method="both-consistent",
                        certificate={
                            "atom": ["=", [pv, qv], True],
                            "true_model": struct_to_json(
                                res_eq.completion.struct),
                            "false_model": struct_to_json(
                                res_ne.completion.struct),
                        },
                    ),),
                    counter={
                        "atom": ["=", [pv, qv], True],
                        "true_model": struct_to_json(
                            res_eq.completion.struct),
                        "false_model": struct_to_json(
                            res_ne.completion.struct),
                    },
                    bounded=bounded,
                    note=f"undecided equality {pv} = {qv}",
                )
            checks.append(TargetCheck(
                target={"kind": "mixed-equality",
                        "literal": ["=", [pv, qv], True]},
                verdict=ENTAILED, method="one-value-consistent",
                certificate={"decided": bool(res_eq.consistent)},
            ))
    return Verdict(
        kind=ENTAILED, backend="amalgamation", witness=None,
        checks=tuple(checks), counter=None, bounded=bounded,
    )


def _var_of_from(core: PartialStructure, schema: TypeSchema,
                 w0: WitnessType, pid_of: dict[str, int]) -> dict[int, int]:
    return {core.pid(w0.core.points[pid_of[v]].name): i
            for i, v in enumerate(schema.free_vars)}


def _weakly_orthogonal_order(p: CutType, q: CutType) -> Verdict:
    """Order backend: the union is complete iff every cross pair of
    variables has its order decided by placements, bits, and internals."""
    universe = p.universe
    dlop = universe.predicate is not None
    nodes: dict[str, tuple] = {}
    anchor_names = {n for n, _ in universe.base_points}
    for b in anchor_names:
        nodes[b] = ("anchor", b)
    lits: list[OrderLit] = []
    for schema in (p, q):
        for v in schema.free_vars:
            pl = schema.placements[v]
            nodes[v] = ("at", pl[1])
            if dlop and pl[3] is not None:
                lits.append(("bit", v, pl[3]))
        for a, b in schema.internal:
            if a in schema.placements and b in schema.placements:
                pa, pb = schema.placements[a], schema.placements[b]
                na = a if pa[0] != "eq" else pa[1]
                nb = b if pb[0] != "eq" else pb[1]
                lits.append(("lt", na, nb))
    bounded = {"base": 0, "param": 0}
    checks: list[TargetCheck] = []
    for pv in p.free_vars:
        for qv in q.free_vars:
            target = {"kind": "mixed-order", "pair": [pv, qv]}
            shapes: list[OrderLit] = [("lt", pv, qv), ("lt", qv, pv),
                                      ("eq", pv, qv)]
            witnesses = []
            for shape in shapes:
                res = dlo_consistent(universe, nodes, lits + [shape])
                if res.consistent:
                    witnesses.append((shape, _order_placement_json(res)))
            if len(witnesses) >= 2:
                return Verdict(
                    kind=REFUTED, backend="dense-order", witness=None,
                    checks=tuple(checks) + (TargetCheck(
                        target=target, verdict=REFUTED,
                        method="both-consistent",
                        certificate={
                            "shapes": [
                                {"literal": list(s), **pj}
                                for s, pj in witnesses
                            ],
                            "nodes": {n: list(k)
                                      for n, k in nodes.items()},
                            "literals": [list(l) for l in lits],
                        },
                    ),),
                    counter={
                        "pair": [pv, qv],
                        "shapes": [
                            {"literal": list(s), **pj}
                            for s, pj in witnesses
                        ],
                    },
                    bounded=bounded,
                    note=f"order of {pv},{qv} undecided",
                )
            checks.append(TargetCheck(
                target=target, verdict=ENTAILED, method="one-shape",
                certificate={"shapes_consistent": len(witnesses)},
            ))
    return Verdict(
        kind=ENTAILED, backend="dense-order", witness=None,
        checks=tuple(checks), counter=None, bounded=bounded,
    )


# ---------------------------------------------------------------------------
# Helpers for scenario-level claims
# ---------------------------------------------------------------------------


def unmerged_coordinate_evidence(
    w: WitnessType, var: str
) -> Optional[dict]:
    """Degenerate-domination evidence: for an unmerged, nonrealized goal
    coordinate, exhibit a relational family atom at one fresh parameter that
    the premise plus witness leaves open both ways."""
    q = w.q
    theory = q.theory
    if var not in q.free_vars or w.q_pid[var] in w.p_var_of:
        return None
    for pattern in q.patterns:
        ri, slots = pattern
        m = sum(1 for s in slots if s is None)
        if m != 1:
            continue
        if [s for s in slots if s is not None] != \
                [q.free_vars.index(var)]:
            continue
        for ext in enumerate_extensions(w.base, 1, theory):
            if not ext.fresh_pids:
                continue
            scratch, slot_pids = _graft(w, ext)
            _premise_fill(scratch, w, slot_pids)
            param_iter = iter(slot_pids)
            pts = tuple(w.q_pid[var] if s is not None else next(param_iter)
                        for s in slots)
            if scratch.value(ri, pts) is not None:
                continue
            models = {}
            for val in (True, False):
                trial = scratch.copy()
                try:
                    trial.set_value(ri, pts, val)
                except StructureError:
                    break
                res = consistency_search(trial, theory, want_trace=False)
                if not res.consistent:
                    break
                models[val] = res.completion.struct
            if len(models) == 2:
                rel = theory.signature.relations[ri].name
                names = [scratch.points[x].name for x in pts]
                return {
                    "coordinate": var,
                    "atom": lit_json(rel, names, True),
                    "true_model": struct_to_json(models[True]),
                    "false_model": struct_to_json(models[False]),
                }
    return None


def extend_witness_left(
    w: WitnessType, q: TypeSchema,
    pq0: TypeSchema, pq1: TypeSchema,
) -> Optional[WitnessType]:
    """Given a witness for p0 >= p1 and a schema q, build the witness for
    tensor(p0,q) >= tensor(p1,q) that extends it by the q-coordinate
    identity merge.  pq0/pq1 must be the two tensor schemas, with pq1's
    variables renamed off pq0's.  Returns None when the extension has no
    completion (it always should have exactly one)."""
    p0, p1 = w.p, w.q
    rename = {}
    for v in pq1.vars:
        base = v[:-1] if v.endswith("'") else v
        rename[base] = v
    merge = []
    for a, b in w.merge:
        merge.append((a, rename.get(b, b)))
    for v in q.free_vars:
        merge.append((v, rename.get(v, v)))
    candidates = witnesses_for_merge(pq0, pq1, w.base, tuple(merge))
    for cand in candidates:
        agrees = True
        for (ri, pts), val in w.core.atoms.items():
            names = [w.core.points[x].name for x in pts]
            try:
                mapped = tuple(cand.core.pid(_left_name(n, rename, w, cand))
                               for n in names)
            except StructureError:
                agrees = False
                break
            if cand.core.value(ri, mapped) != val:
                agrees = False
                break
        if agrees:
            return cand
    return None


def _left_name(name: str, rename: dict, w: WitnessType,
               cand: WitnessType) -> str:
    if cand.core.has_point(name):
        return name
    # merged names change shape when the q-identity merge is added
    for v, pid in list(w.p_pid.items()) + list(w.q_pid.items()):
        if w.core.points[pid].name == name:
            for v2, pid2 in list(cand.p_pid.items()) + \
                    list(cand.q_pid.items()):
                if v2 == v or v2 == rename.get(v):
                    return cand.core.points[pid2].name
    return name
