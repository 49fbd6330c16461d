"""Type schemas: finitely presented complete types over a theory.

A schema describes a complete type in finitely many designated variables,
invariant over a finite named constant set A0.  Its data:

* an internal structure deciding every atom among A0 and the variables,
* per-pattern rule tables deciding every atom that mixes variables with
  parameters, as a function of the parameters' qf-type over A0 alone
  (that functional dependence is invariance),
* realized declarations (variable = constant) and distinctness among
  variables.

Schemas are authored in the .sch DSL (guarded decision lists) or arise as
tensor products; validation compiles both to the same table form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .structures import (
    AtomKey,
    CanonicalKey,
    Literal,
    PartialStructure,
    Point,
    PointKind,
    Relation,
    iso_canonical,
)
from .theory import TheorySpec
from .engine import (
    EngineError,
    Extension,
    consistency_search,
    enumerate_extensions,
    is_member,
)

MAX_PATTERN_PARAMS = 3


class SchemaError(Exception):
    """Raised for malformed or undecidable schema constructions."""


Lit = tuple[str, tuple[str, ...], bool]  # relation, point names, sign

# Guards: ("lit", rel, tokens, sign) with tokens mixing base-constant names
# and 1-based parameter indices; ("eq", a, b, positive) compares a parameter
# slot with a constant or another parameter slot.
Guard = tuple


@dataclass(frozen=True)
class SchemaRule:
    rel: str
    slots: tuple[str, ...]  # variable names or "*"
    value: bool
    guards: tuple[Guard, ...] = ()
    lineno: int = 0

    def pretty(self) -> str:
        head = f"{self.rel}({','.join(self.slots)}) := {str(self.value).lower()}"
        if not self.guards:
            return head
        parts = []
        for g in self.guards:
            if g[0] == "lit":
                _, rel, tokens, sign = g
                toks = ",".join(t if isinstance(t, str) else f"*{t}" for t in tokens)
                parts.append(("" if sign else "!") + f"{rel}({toks})")
            else:
                _, a, b, positive = g
                sa = a if isinstance(a, str) else f"*{a}"
                sb = b if isinstance(b, str) else f"*{b}"
                parts.append(f"{sa} {'=' if positive else '!='} {sb}")
        return head + " if " + " & ".join(parts)


@dataclass
class DerivedRule:
    pattern: str
    param_type: str
    value: bool
    certificate: tuple[str, ...]  # why the opposite value is inconsistent


@dataclass
class SchemaReport:
    ok: bool
    arity_checked: int
    pattern_status: dict[str, str]  # pattern pretty -> authored|derived|failed
    derived: list[DerivedRule]
    consistency_failures: list[str]
    messages: list[str]


Pattern = tuple[int, tuple[Optional[int], ...]]  # rel index, var-index/None slots


@dataclass(eq=False)
class TypeSchema:
    name: str
    theory: TheorySpec
    vars: tuple[str, ...]
    base_names: tuple[str, ...] = ()
    internals: tuple[Lit, ...] = ()
    distinct: tuple[tuple[str, str], ...] = ()
    realised: tuple[tuple[str, str], ...] = ()
    rules: tuple[SchemaRule, ...] = ()
    factors: Optional[tuple["TypeSchema", "TypeSchema"]] = None
    source: str = "<builtin>"
    # compiled by validate_schema:
    base_struct: Optional[PartialStructure] = None
    core: Optional[PartialStructure] = None
    var_pid: Optional[dict[str, int]] = None
    patterns: Optional[tuple[Pattern, ...]] = None
    tables: Optional[dict[Pattern, dict[CanonicalKey, bool]]] = None
    validated_arity: int = 0
    report: Optional[SchemaReport] = None

    def __post_init__(self) -> None:
        if len(set(self.vars)) != len(self.vars):
            raise SchemaError(f"schema {self.name}: duplicate variable names")
        clash = set(self.vars) & set(self.base_names)
        if clash:
            raise SchemaError(f"schema {self.name}: {clash} used as both "
                              "variable and constant")
        realized_vars = [v for v, _ in self.realised]
        if len(set(realized_vars)) != len(realized_vars):
            raise SchemaError(f"schema {self.name}: variable realized twice")
        for v, c in self.realised:
            if v not in self.vars:
                raise SchemaError(f"schema {self.name}: realized {v!r} is not "
                                  "a declared variable")
            if c not in self.base_names:
                raise SchemaError(f"schema {self.name}: realized target {c!r} "
                                  "is not a declared constant")

    # -------- convenience views --------

    @property
    def free_vars(self) -> tuple[str, ...]:
        done = {v for v, _ in self.realised}
        return tuple(v for v in self.vars if v not in done)

    @property
    def max_rule_arity(self) -> int:
        """Largest parameter count any rule pattern can carry."""
        arities = [r.arity for r in self.theory.signature.relations]
        if not arities or not self.free_vars:
            return 0
        return min(MAX_PATTERN_PARAMS, max(a - 1 for a in arities) if arities else 0)

    def is_validated(self) -> bool:
        return self.tables is not None

    def require_validated(self) -> None:
        if not self.is_validated():
            raise SchemaError(f"schema {self.name} has not been validated")

    def pretty_pattern(self, pat: Pattern) -> str:
        ri, slots = pat
        rel = self.theory.signature.relations[ri].name
        fv = self.free_vars
        names = [fv[s] if s is not None else "*" for s in slots]
        return f"{rel}({','.join(names)})"

    # -------- the two lookup primitives --------

    def param_key(
        self, ambient: PartialStructure, param_pids: Sequence[int]
    ) -> CanonicalKey:
        """Canonical qf-type of an ordered parameter tuple over this schema's
        constants, read off an ambient structure that contains them by name."""
        base_pids = [ambient.pid(n) for n in self.base_names]
        keep = list(base_pids)
        for p in param_pids:
            if p not in keep:
                keep.append(p)
        sub = ambient.induced(keep)
        for pid in range(len(base_pids), len(sub.points)):
            pt = sub.points[pid]
            if pt.kind != PointKind.PARAM:
                sub.points[pid] = Point(pt.name, PointKind.PARAM)
        slots = tuple(keep.index(p) for p in param_pids)
        return iso_canonical(sub, fixed=range(len(base_pids)), slots=slots)

    def decide_atom(
        self,
        ambient: PartialStructure,
        rel_idx: int,
        pts: tuple[int, ...],
        var_of: dict[int, int],
        param_cache: Optional[dict] = None,
    ) -> bool:
        """Value this schema gives the atom rel(pts) in an ambient structure.

        var_of maps ambient pids to this schema's free-variable indices; all
        other points of the atom are treated as parameters, and their atoms
        over the schema's constants must be decided in the ambient structure.
        param_cache, when given, memoizes parameter-type keys per parameter
        tuple; it is only sound while the parameters' atoms over the schema's
        constants stay unchanged in the ambient structure.
        """
        self.require_validated()
        rel = self.theory.signature.relations[rel_idx]
        raw = tuple(var_of.get(p) for p in pts)
        if all(s is None for s in raw):
            raise SchemaError("decide_atom needs at least one designated variable")
        canon, perm = canonical_pattern(rel, raw)
        pat = (rel_idx, canon)
        params = tuple(pts[perm[i]] for i, s in enumerate(canon) if s is None)
        table = self.tables.get(pat)
        if table is None:
            raise SchemaError(
                f"schema {self.name} has no rule family for pattern "
                f"{self.pretty_pattern(pat)}"
            )
        if param_cache is None:
            key = self.param_key(ambient, params)
        else:
            key = param_cache.get(params)
            if key is None:
                key = self.param_key(ambient, params)
                param_cache[params] = key
        if key not in table:
            raise SchemaError(
                f"schema {self.name}: pattern {self.pretty_pattern(pat)} is "
                f"undecided at a parameter type outside the validated arity "
                f"bound {self.validated_arity}"
            )
        return table[key]


def canonical_pattern(
    rel: Relation, slots: tuple[Optional[int], ...]
) -> tuple[tuple[Optional[int], ...], tuple[int, ...]]:
    """Least slot tuple under the relation's symmetry, with the permutation
    that produced it (canonical[i] = slots[perm[i]])."""

    def sort_key(tup):
        return tuple((0, s) if s is not None else (1, 0) for s in tup)

    identity = tuple(range(len(slots)))
    if not rel.symmetric:
        return slots, identity
    best = (sort_key(slots), identity, slots)
    for perm in itertools.permutations(range(len(slots))):
        cand = tuple(slots[i] for i in perm)
        entry = (sort_key(cand), perm, cand)
        if entry[:2] < best[:2]:
            best = entry
    return best[2], best[1]


def _all_patterns(schema: TypeSchema) -> tuple[Pattern, ...]:
    """Deterministic pattern order: relation arity descending (then
    declaration order), then slot tuples ascending with variables sorting
    before parameter slots.  Domination checks iterate targets in exactly
    this order, so relational patterns are probed most-specific-first."""
    sig = schema.theory.signature
    n_vars = len(schema.free_vars)
    rel_order = sorted(
        range(len(sig.relations)),
        key=lambda ri: (-sig.relations[ri].arity, ri),
    )
    out: list[Pattern] = []
    for ri in rel_order:
        rel = sig.relations[ri]
        seen: set[tuple[Optional[int], ...]] = set()
        ordered: list[tuple[Optional[int], ...]] = []
        choices: list[Optional[int]] = list(range(n_vars)) + [None]
        for raw in itertools.product(choices, repeat=rel.arity):
            if all(s is None for s in raw):
                continue
            canon, _ = canonical_pattern(rel, raw)
            if canon not in seen:
                seen.add(canon)
                ordered.append(canon)
        ordered.sort(
            key=lambda tup: tuple((0, s) if s is not None else (1, 0) for s in tup)
        )
        out.extend((ri, tup) for tup in ordered)
    return tuple(out)


# ---------------------------------------------------------------------------
# Compilation: internal structure, then rule tables.
# ---------------------------------------------------------------------------


def _forced_completion(
    struct: PartialStructure, theory: TheorySpec, what: str
) -> tuple[PartialStructure, list[str], list[str]]:
    """Complete a structure by closure plus forced values.

    Returns (completed structure, derivation notes, failures).  An atom whose
    both values admit member completions is a genuine ambiguity and is
    reported as a failure, not defaulted.
    """
    from .engine import close  # local import keeps module load order simple

    notes: list[str] = []
    failures: list[str] = []
    report = close(struct, theory)
    if not report.ok:
        return struct, notes, [f"{what}: inconsistent ({report.conflict})"]
    current = report.struct
    changed = True
    while changed and not failures:
        changed = False
        for key in list(current.undecided_slots()):
            if key in current.atoms:
                continue
            verdicts = {}
            for val in (False, True):
                trial = current.copy()
                trial.atoms[key] = val
                verdicts[val] = consistency_search(trial, theory, want_trace=True)
            ri, pts = key
            atom = (
                f"{current.sig.relations[ri].name}"
                f"({','.join(current.points[p].name for p in pts)})"
            )
            ok_false = verdicts[False].consistent
            ok_true = verdicts[True].consistent
            if ok_false and ok_true:
                failures.append(
                    f"{what}: atom {atom} is not determined (both values "
                    "admit members)"
                )
            elif not ok_false and not ok_true:
                failures.append(f"{what}: atom {atom} admits no value")
            else:
                val = ok_true
                current.atoms[key] = val
                rep = close(current, theory)
                if not rep.ok:
                    failures.append(f"{what}: forcing {atom} broke consistency")
                    break
                current = rep.struct
                notes.append(f"{atom} := {val} forced (other value inconsistent)")
                changed = True
    return current, notes, failures


def _scratch_with_params(
    schema: TypeSchema, ext: Extension
) -> tuple[PartialStructure, tuple[int, ...], tuple[int, ...]]:
    """Core plus the parameter points of an extension over the base.

    Returns (structure, slot pids, fresh param pids).  Atoms between free
    variables and parameters start undecided.
    """
    s = schema.core.copy()
    offset = len(schema.base_struct.points)
    remap: dict[int, int] = {pid: pid for pid in range(offset)}
    for old in range(offset, len(ext.struct.points)):
        pt = ext.struct.points[old]
        name = pt.name
        while s.has_point(name):
            name += "'"
        remap[old] = s.add_point(name, pt.kind)
    for (ri, pts), val in ext.struct.atoms.items():
        if all(p < offset for p in pts):
            continue  # base atoms are already in the core copy
        s.set_value(ri, tuple(remap[p] for p in pts), val)
    slot_pids = tuple(remap[p] for p in ext.slot_pids)
    fresh = tuple(remap[p] for p in ext.fresh_pids)
    return s, slot_pids, fresh


def _guards_hold(
    schema: TypeSchema,
    guards: tuple[Guard, ...],
    scratch: PartialStructure,
    slot_pids: tuple[int, ...],
) -> bool:
    def resolve(token) -> int:
        if isinstance(token, str):
            return scratch.pid(token)
        if not 1 <= token <= len(slot_pids):
            raise SchemaError(
                f"schema {schema.name}: guard parameter *{token} out of range"
            )
        return slot_pids[token - 1]

    sig = schema.theory.signature
    for g in guards:
        if g[0] == "lit":
            _, rel, tokens, sign = g
            pts = tuple(resolve(t) for t in tokens)
            val = scratch.value(sig.index(rel), pts)
            if val is None:
                raise SchemaError(
                    f"schema {schema.name}: guard {rel} atom undecided on "
                    "the parameter type"
                )
            if val != sign:
                return False
        elif g[0] == "eq":
            _, a, b, positive = g
            if (resolve(a) == resolve(b)) != positive:
                return False
        else:
            raise SchemaError(f"unknown guard form {g[0]!r}")
    return True


def _matching_rules(
    schema: TypeSchema, pat: Pattern
) -> list[tuple[SchemaRule, dict[int, int]]]:
    """Authored rules whose canonicalized slot tuple equals the pattern,
    with the remap from canonical parameter index to authored index."""
    sig = schema.theory.signature
    ri, canon = pat
    rel = sig.relations[ri]
    fv = {v: i for i, v in enumerate(schema.free_vars)}
    out = []
    for rule in schema.rules:
        if sig.index(rule.rel) != ri:
            continue
        raw = tuple(fv[s] if s != "*" else None for s in rule.slots)
        cand, perm = canonical_pattern(rel, raw)
        if cand != canon:
            continue
        raw_param_positions = [i for i, s in enumerate(raw) if s is None]
        param_remap: dict[int, int] = {}  # canonical index -> authored index
        k = 0
        for i, s in enumerate(cand):
            if s is None:
                k += 1
                original_pos = perm[i]
                param_remap[k] = raw_param_positions.index(original_pos) + 1
        out.append((rule, param_remap))
    return out


def _remap_guards(guards: tuple[Guard, ...], remap: dict[int, int]) -> tuple[Guard, ...]:
    inverse = {authored: canonical for canonical, authored in remap.items()}

    def conv(token):
        if isinstance(token, int):
            return inverse[token]
        return token

    out = []
    for g in guards:
        if g[0] == "lit":
            _, rel, tokens, sign = g
            out.append(("lit", rel, tuple(conv(t) for t in tokens), sign))
        else:
            _, a, b, positive = g
            out.append(("eq", conv(a), conv(b), positive))
    return tuple(out)


def validate_schema(
    schema: TypeSchema,
    arity_bound: Optional[int] = None,
    semantic_completion: bool = False,
) -> SchemaReport:
    """Compile and check a schema: internal structure fully determined,
    every rule pattern total over parameter types up to the arity bound,
    every restriction consistent.

    Patterns no authored rule covers are completed by forced values when the
    theory leaves exactly one choice; patterns over distinct variables that
    need this are accepted only with semantic_completion=True, and every
    derived value carries an inconsistency certificate for its opposite.
    """
    if schema.theory.backend != "amalgamation":
        raise SchemaError(
            "validate_schema handles amalgamation theories; order types "
            "validate in the order backend"
        )
    if arity_bound is None:
        arity_bound = schema.max_rule_arity
    if arity_bound > MAX_PATTERN_PARAMS:
        raise SchemaError(f"arity bound {arity_bound} exceeds {MAX_PATTERN_PARAMS}")
    if schema.factors is not None:
        return _validate_product(schema, arity_bound)

    theory = schema.theory
    sig = theory.signature
    messages: list[str] = []
    derived: list[DerivedRule] = []
    pattern_status: dict[str, str] = {}
    consistency_failures: list[str] = []

    # ---- base structure ----
    base = PartialStructure(sig)
    for n in schema.base_names:
        base.add_point(n, PointKind.BASE)
    names_all = set(schema.base_names) | set(schema.vars)
    for rel, pts, sign in schema.internals:
        for p in pts:
            if p not in names_all:
                raise SchemaError(
                    f"schema {schema.name}: internal literal names unknown "
                    f"point {p!r}"
                )
        if all(p in set(schema.base_names) for p in pts):
            base.set_value(sig.index(rel), tuple(base.pid(p) for p in pts), sign)
    base, notes, failures = _forced_completion(
        base, theory, f"schema {schema.name} base"
    )
    messages.extend(notes)
    if failures:
        return _finish_report(schema, arity_bound, pattern_status, derived,
                              consistency_failures, messages + failures, ok=False)

    # ---- core: base + variables, fully decided ----
    core = base.copy()
    var_pid: dict[str, int] = {}
    realized = dict(schema.realised)
    for v in schema.vars:
        if v in realized:
            var_pid[v] = core.pid(realized[v])
        else:
            var_pid[v] = core.add_point(v, PointKind.VAR)
    for rel, pts, sign in schema.internals:
        if all(p in set(schema.base_names) for p in pts):
            continue
        key = tuple(var_pid[p] if p in var_pid else core.pid(p) for p in pts)
        core.set_value(sig.index(rel), key, sign)
    for a, b in schema.distinct:
        if a not in var_pid or b not in var_pid:
            raise SchemaError(
                f"schema {schema.name}: distinctness names unknown variable"
            )
        if var_pid[a] == var_pid[b]:
            return _finish_report(
                schema, arity_bound, pattern_status, derived,
                consistency_failures,
                messages + [f"distinct variables {a},{b} are both realized "
                            "at the same constant"],
                ok=False,
            )
    core, notes, failures = _forced_completion(
        core, theory, f"schema {schema.name} core"
    )
    messages.extend(notes)
    if failures:
        return _finish_report(schema, arity_bound, pattern_status, derived,
                              consistency_failures, messages + failures, ok=False)

    schema.base_struct = base
    schema.core = core
    schema.var_pid = var_pid
    schema.patterns = _all_patterns(schema)
    schema.tables = {}

    # ---- rule tables: authored evaluation first, derivation second ----
    ext_cache: dict[int, list[Extension]] = {}

    def exts(m: int) -> list[Extension]:
        if m not in ext_cache:
            ext_cache[m] = enumerate_extensions(base, m, theory)
        return ext_cache[m]

    deferred: list[tuple[Pattern, Extension]] = []
    fv = schema.free_vars
    for pat in schema.patterns:
        ri, slots = pat
        m = sum(1 for s in slots if s is None)
        if m > arity_bound:
            # patterns beyond the bound stay untabled; lookups will fail
            # loudly rather than guess.
            pattern_status[schema.pretty_pattern(pat)] = (
                f"skipped (needs arity {m} > bound {arity_bound})"
            )
            continue
        rules = _matching_rules(schema, pat)
        table: dict[CanonicalKey, bool] = {}
        schema.tables[pat] = table
        all_authored = True
        for ext in exts(m) if m else [None]:
            if ext is None:
                # no parameters: the atom is internal, already in the core
                continue
            scratch, slot_pids, _ = _scratch_with_params(schema, ext)
            value: Optional[bool] = None
            for rule, remap in rules:
                guards = _remap_guards(rule.guards, remap)
                if _guards_hold(schema, guards, scratch, slot_pids):
                    value = rule.value
                    break
            if value is None:
                all_authored = False
                deferred.append((pat, ext))
            else:
                table[ext.key] = value
        if m == 0:
            pattern_status[schema.pretty_pattern(pat)] = "internal"
        elif all_authored:
            pattern_status[schema.pretty_pattern(pat)] = "authored"

    # Second pass: derive what authored rules left open.  Values decided in
    # the first pass give the derivation its surrounding context.
    ok = True
    for pat, ext in deferred:
        ri, slots = pat
        label = schema.pretty_pattern(pat)
        has_repeat = any(
            slots.count(s) > 1 for s in slots if s is not None
        )
        if not has_repeat and not semantic_completion:
            pattern_status[label] = (
                "failed: no authored rule covers a parameter type "
                "(semantic completion not requested)"
            )
            ok = False
            continue
        scratch, slot_pids, _ = _scratch_with_params(schema, ext)
        _fill_decided_var_param_atoms(schema, scratch, skip_pattern=pat)
        atom_pts = tuple(
            var_pid[fv[s]] if s is not None else None for s in slots
        )
        it = iter(slot_pids)
        atom_pts = tuple(p if p is not None else next(it) for p in atom_pts)
        verdicts = {}
        for val in (False, True):
            trial = scratch.copy()
            try:
                trial.set_value(ri, atom_pts, val)
            except Exception:
                verdicts[val] = None
                continue
            verdicts[val] = consistency_search(trial, theory, want_trace=True)
        ok_false = verdicts[False] is not None and verdicts[False].consistent
        ok_true = verdicts[True] is not None and verdicts[True].consistent
        param_desc = _describe_params(scratch, slot_pids)
        if ok_false == ok_true:
            pattern_status[label] = (
                "failed: value not forced at parameter type " + param_desc
                if ok_false
                else "failed: no consistent value at parameter type " + param_desc
            )
            ok = False
            continue
        value = ok_true
        refused = verdicts[not value]
        cert = refused.trace if refused is not None else ("value conflicts with decided atoms",)
        schema.tables[pat][ext.key] = value
        derived.append(DerivedRule(label, param_desc, value, tuple(cert)))
        if pattern_status.get(label) not in ("authored", "internal"):
            pattern_status[label] = "derived"

    # ---- consistency of restrictions at every arity up to the bound ----
    for m in range(1, arity_bound + 1):
        for ext in exts(m):
            scratch, slot_pids, _ = _scratch_with_params(schema, ext)
            try:
                _fill_decided_var_param_atoms(schema, scratch)
            except SchemaError as exc:
                if ok:
                    consistency_failures.append(str(exc))
                    ok = False
                continue
            res = consistency_search(scratch, theory, want_trace=False)
            if not res.consistent:
                consistency_failures.append(
                    "restriction inconsistent at parameter type "
                    + _describe_params(scratch, slot_pids)
                )
                ok = False

    return _finish_report(schema, arity_bound, pattern_status, derived,
                          consistency_failures, messages, ok=ok)


def _describe_params(scratch: PartialStructure, slot_pids: tuple[int, ...]) -> str:
    names = [scratch.points[p].name for p in slot_pids]
    lits = [
        str(l)
        for l in scratch.literals()
        if any(n in l.points for n in names)
    ]
    return f"({','.join(names)}): " + (" ".join(lits) if lits else "trivial")


def _fill_decided_var_param_atoms(
    schema: TypeSchema,
    scratch: PartialStructure,
    skip_pattern: Optional[Pattern] = None,
) -> None:
    """Decide every undecided atom mixing free variables with parameters,
    using the schema's tables built so far."""
    var_of = {pid: i for i, v in enumerate(schema.free_vars)
              for pid in [schema.var_pid[v]]}
    sig = schema.theory.signature
    for ri, pts in list(scratch.undecided_slots()):
        vc = [var_of.get(p) for p in pts]
        if all(s is None for s in vc):
            continue
        rel = sig.relations[ri]
        canon, _ = canonical_pattern(rel, tuple(vc))
        if skip_pattern is not None and (ri, canon) == skip_pattern:
            continue
        table = schema.tables.get((ri, canon))
        if table is None:
            continue
        params = tuple(p for p, s in zip(pts, vc) if s is None)
        # reorder params to the canonical permutation
        canon2, perm = canonical_pattern(rel, tuple(vc))
        params = tuple(pts[perm[i]] for i, s in enumerate(canon2) if s is None)
        key = schema.param_key(scratch, params)
        if key in table:
            scratch.set_value(ri, pts, table[key])


def _finish_report(schema, arity_bound, pattern_status, derived,
                   consistency_failures, messages, ok) -> SchemaReport:
    report = SchemaReport(
        ok=ok,
        arity_checked=arity_bound,
        pattern_status=pattern_status,
        derived=derived,
        consistency_failures=consistency_failures,
        messages=messages,
    )
    schema.report = report
    if ok:
        schema.validated_arity = arity_bound
    else:
        schema.tables = None  # refuse to serve lookups from a failed compile
    return report


# ---------------------------------------------------------------------------
# Restriction
# ---------------------------------------------------------------------------


def restriction_structure(
    schema: TypeSchema, params: PartialStructure
) -> tuple[PartialStructure, dict[str, int]]:
    """Adjoin the schema's variables to a parameter structure and decide
    every atom the schema speaks about.  The parameter structure must be a
    fully decided member containing the schema's constants by name."""
    schema.require_validated()
    theory = schema.theory
    if not params.fully_decided():
        raise SchemaError("restrict needs a fully decided parameter structure")
    if not is_member(params, theory):
        raise SchemaError("restrict needs a member parameter structure")
    for n in schema.base_names:
        if not params.has_point(n):
            raise SchemaError(
                f"parameter structure lacks the schema constant {n!r}"
            )
    for key, val in schema.base_struct.atoms.items():
        ri, pts = key
        mapped = tuple(params.pid(schema.base_struct.points[p].name) for p in pts)
        if params.value(ri, mapped) != val:
            raise SchemaError(
                f"parameter structure disagrees with constant atoms of "
                f"{schema.name}"
            )

    s = params.copy()
    var_pid: dict[str, int] = {}
    realized = dict(schema.realised)
    for v in schema.vars:
        if v in realized:
            var_pid[v] = s.pid(realized[v])
        else:
            name = v
            while s.has_point(name):
                name += "'"
            var_pid[v] = s.add_point(name, PointKind.VAR)
    # internal atoms, copied off the compiled core
    core = schema.core
    core_pid_to_new: dict[int, int] = {}
    for n in schema.base_names:
        core_pid_to_new[core.pid(n)] = s.pid(n)
    for v in schema.vars:
        core_pid_to_new[schema.var_pid[v]] = var_pid[v]
    for (ri, pts), val in core.atoms.items():
        s.set_value(ri, tuple(core_pid_to_new[p] for p in pts), val)
    # variable-parameter atoms via the tables
    var_of = {var_pid[v]: i for i, v in enumerate(schema.free_vars)}
    for ri, pts in list(s.undecided_slots()):
        vc = [var_of.get(p) for p in pts]
        if all(c is None for c in vc):
            continue  # atoms purely among parameters stay as given
        s.set_value(ri, pts, schema.decide_atom(s, ri, pts, var_of))
    return s, var_pid


def restrict(schema: TypeSchema, params: PartialStructure) -> tuple[Literal, ...]:
    """The schema's literals over a finite parameter structure: every decided
    atom involving a designated variable, plus realized equalities and
    declared distinctness."""
    s, var_pid = restriction_structure(schema, params)
    free = {var_pid[v] for v in schema.free_vars}
    out: list[Literal] = []
    for v, c in schema.realised:
        out.append(Literal("=", (v, c), True))
    for a, b in schema.distinct:
        out.append(Literal("=", (s.points[var_pid[a]].name,
                                 s.points[var_pid[b]].name), False))
    # a non-realized variable denotes a point outside the parameter set
    for v in schema.free_vars:
        vname = s.points[var_pid[v]].name
        for pp in params.point_ids():
            out.append(Literal("=", (vname, params.points[pp].name), False))
    for (ri, pts) in s.all_slots():
        val = s.atoms.get((ri, pts))
        if val is None or not any(p in free for p in pts):
            continue
        out.append(
            Literal(
                s.sig.relations[ri].name,
                tuple(s.points[p].name for p in pts),
                val,
            )
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# Tensor product
# ---------------------------------------------------------------------------


def tensor(p: TypeSchema, q: TypeSchema, name: Optional[str] = None) -> TypeSchema:
    """Product type: q's variables keep their content; atoms involving p's
    variables are decided by p's rules with q's variables (and genuine
    parameters) in the parameter slots, q's own rules supplying their types.
    The result is compiled immediately; an unresolved lookup is an error,
    never a silent default."""
    p.require_validated()
    q.require_validated()
    if p.theory is not q.theory and p.theory != q.theory:
        raise SchemaError("tensor factors live over different theories")
    if set(p.vars) & set(q.vars):
        raise SchemaError("tensor factors share variable names; rename first")
    for n in set(p.base_names) & set(q.base_names):
        pa, qa = p.base_struct, q.base_struct
        for (ri, pts), val in pa.atoms.items():
            names = [pa.points[x].name for x in pts]
            if all(m in q.base_names for m in names):
                if qa.value(ri, tuple(qa.pid(m) for m in names)) != val:
                    raise SchemaError(
                        f"tensor factors disagree about shared constant {n!r}"
                    )
    base_names = tuple(p.base_names) + tuple(
        n for n in q.base_names if n not in p.base_names
    )
    cross_distinct = []
    realized_p = dict(p.realised)
    realized_q = dict(q.realised)
    for xv in p.vars:
        for yv in q.vars:
            if xv in realized_p and yv in realized_q:
                continue  # both pinned to constants; equal iff same constant
            cross_distinct.append((xv, yv))
    out = TypeSchema(
        name=name or f"{p.name}(x){q.name}",
        theory=p.theory,
        vars=tuple(p.vars) + tuple(q.vars),
        base_names=base_names,
        internals=(),
        distinct=tuple(p.distinct) + tuple(q.distinct) + tuple(cross_distinct),
        realised=tuple(p.realised) + tuple(q.realised),
        rules=(),
        factors=(p, q),
    )
    report = validate_schema(out, arity_bound=max(p.validated_arity,
                                                  q.validated_arity))
    if not report.ok:
        raise SchemaError(
            f"tensor {out.name} failed to compile: "
            + "; ".join(report.consistency_failures + report.messages)
        )
    return out


def _validate_product(schema: TypeSchema, arity_bound: int) -> SchemaReport:
    p, q = schema.factors
    theory = schema.theory
    sig = theory.signature
    messages: list[str] = []
    pattern_status: dict[str, str] = {}

    # ---- joint base structure ----
    base = PartialStructure(sig)
    for n in schema.base_names:
        base.add_point(n, PointKind.BASE)
    for factor in (p, q):
        fb = factor.base_struct
        for (ri, pts), val in fb.atoms.items():
            base.set_value(ri, tuple(base.pid(fb.points[x].name) for x in pts), val)
    base, notes, failures = _forced_completion(
        base, theory, f"product {schema.name} base"
    )
    messages.extend(notes)
    if failures:
        return _finish_report(schema, arity_bound, pattern_status, [], [],
                              messages + failures, ok=False)
    schema.base_struct = base

    # ---- core: q's variables first get their content, then p's rules ----
    core = base.copy()
    var_pid: dict[str, int] = {}
    for factor in (p, q):
        realized = dict(factor.realised)
        for v in factor.vars:
            if v in realized:
                var_pid[v] = core.pid(realized[v])
            else:
                var_pid[v] = core.add_point(v, PointKind.VAR)
    for factor in (p, q):
        fc = factor.core
        remap = {}
        for n in factor.base_names:
            remap[fc.pid(n)] = core.pid(n)
        for v in factor.vars:
            remap[factor.var_pid[v]] = var_pid[v]
        for (ri, pts), val in fc.atoms.items():
            core.set_value(ri, tuple(remap[x] for x in pts), val)
    # cross atoms: the left factor's rules decide every slot one of its
    # variables touches (its global type speaks about the right factor's
    # points as parameters); the right factor only decides slots with none of
    # the left factor's variables.  This order is what makes the product
    # non-commutative.  A slot may only become decidable once the parameter's
    # own atoms over the deciding factor's constants are filled in, so sweep
    # to a fixpoint, deferring slots that are not ready yet.
    q_var_of = {var_pid[v]: i for i, v in enumerate(q.free_vars)}
    p_var_of = {var_pid[v]: i for i, v in enumerate(p.free_vars)}
    pending = [
        (ri, pts) for ri, pts in core.undecided_slots()
        if any(x in p_var_of or x in q_var_of for x in pts)
    ]
    while pending:
        deferred: list[AtomKey] = []
        last_err: Optional[SchemaError] = None
        for ri, pts in pending:
            factor, var_of = (
                (p, p_var_of) if any(x in p_var_of for x in pts)
                else (q, q_var_of)
            )
            try:
                val = factor.decide_atom(core, ri, pts, var_of)
            except SchemaError as exc:
                last_err = exc
                deferred.append((ri, pts))
                continue
            core.set_value(ri, pts, val)
        if len(deferred) == len(pending):
            return _finish_report(
                schema, arity_bound, pattern_status, [], [],
                messages + [f"cross atom unresolved: {last_err}"], ok=False)
        pending = deferred
    from .engine import close

    rep = close(core, theory)
    if not rep.ok:
        return _finish_report(schema, arity_bound, pattern_status, [], [],
                              messages + [f"product core inconsistent: "
                                          f"{rep.conflict}"], ok=False)
    core = rep.struct
    if not core.fully_decided():
        missing = core.undecided_slots()
        return _finish_report(
            schema, arity_bound, pattern_status, [], [],
            messages + [f"product core left {len(missing)} atoms undecided"],
            ok=False)
    schema.core = core
    schema.var_pid = var_pid
    schema.patterns = _all_patterns(schema)
    schema.tables = {}

    # ---- product tables ----
    fv = schema.free_vars
    p_set = set(p.free_vars)
    ext_cache: dict[int, list[Extension]] = {}

    def exts(m: int) -> list[Extension]:
        if m not in ext_cache:
            ext_cache[m] = enumerate_extensions(base, m, theory)
        return ext_cache[m]

    for pat in schema.patterns:
        ri, slots = pat
        m = sum(1 for s in slots if s is None)
        if m > arity_bound:
            pattern_status[schema.pretty_pattern(pat)] = (
                f"skipped (needs arity {m} > bound {arity_bound})"
            )
            continue
        table: dict[CanonicalKey, bool] = {}
        schema.tables[pat] = table
        uses_p = any(s is not None and fv[s] in p_set for s in slots)
        for ext in exts(m) if m else []:
            scratch, slot_pids, _ = _scratch_with_params(schema, ext)
            # q's variables get their parameter atoms first
            for ri2, pts2 in list(scratch.undecided_slots()):
                in_q = [q_var_of.get(x) for x in pts2]
                if all(c is None for c in in_q):
                    continue
                if any(x in p_var_of for x in pts2):
                    continue
                scratch.set_value(
                    ri2, pts2, q.decide_atom(scratch, ri2, pts2, q_var_of)
                )
            it = iter(slot_pids)
            atom_pts = tuple(
                var_pid[fv[s]] if s is not None else next(it) for s in slots
            )
            deciding = p if uses_p else q
            deciding_var_of = p_var_of if uses_p else q_var_of
            try:
                val = deciding.decide_atom(scratch, ri, atom_pts, deciding_var_of)
            except SchemaError as exc:
                return _finish_report(
                    schema, arity_bound, pattern_status, [], [],
                    messages + [f"product rule unresolved at "
                                f"{schema.pretty_pattern(pat)}: {exc}"],
                    ok=False)
            table[ext.key] = val
        pattern_status[schema.pretty_pattern(pat)] = (
            "from left factor" if uses_p else "from right factor"
        )
    return _finish_report(schema, arity_bound, pattern_status, [], [],
                          messages, ok=True)


# ---------------------------------------------------------------------------
# Renaming, powers, comparison
# ---------------------------------------------------------------------------


def rename_schema(schema: TypeSchema, mapping: dict[str, str],
                  name: Optional[str] = None) -> TypeSchema:
    """Copy an authored schema with variables renamed."""
    if schema.factors is not None:
        raise SchemaError("rename products by renaming their factors")
    missing = [v for v in schema.vars if v not in mapping]
    for v in missing:
        mapping[v] = v
    new_vars = tuple(mapping[v] for v in schema.vars)

    def conv_lit(lit: Lit) -> Lit:
        rel, pts, sign = lit
        return (rel, tuple(mapping.get(x, x) for x in pts), sign)

    out = TypeSchema(
        name=name or schema.name,
        theory=schema.theory,
        vars=new_vars,
        base_names=schema.base_names,
        internals=tuple(conv_lit(l) for l in schema.internals),
        distinct=tuple((mapping[a], mapping[b]) for a, b in schema.distinct),
        realised=tuple((mapping[v], c) for v, c in schema.realised),
        rules=tuple(
            SchemaRule(
                r.rel,
                tuple(mapping.get(s, s) if s != "*" else "*" for s in r.slots),
                r.value,
                r.guards,
                r.lineno,
            )
            for r in schema.rules
        ),
        source=schema.source,
    )
    if schema.is_validated():
        validate_schema(out, schema.validated_arity)
    return out


def power(schema: TypeSchema, n: int) -> TypeSchema:
    """Iterated self-product with freshly renamed coordinate tuples,
    right-associated: the highest-numbered copy is the leftmost factor."""
    if not 1 <= n <= 3:
        raise SchemaError("power exponent must be 1..3")
    schema.require_validated()

    def copy_at(i: int) -> TypeSchema:
        mapping = {v: f"{v}^{i}" for v in schema.vars}
        return rename_schema(schema, mapping, name=f"{schema.name}^{i}")

    result = copy_at(0)
    for i in range(1, n):
        result = tensor(copy_at(i), result,
                        name=f"{schema.name}^({i + 1})")
    return result


def strip_realised(schema: TypeSchema, name: Optional[str] = None) -> TypeSchema:
    """Project away realized coordinates (monoid bookkeeping convention)."""
    schema.require_validated()
    if not schema.realised:
        return schema
    keep = schema.free_vars
    if schema.factors is None:
        realized_set = {v for v, _ in schema.realised}
        out = TypeSchema(
            name=name or f"{schema.name}~",
            theory=schema.theory,
            vars=keep,
            base_names=schema.base_names,
            internals=tuple(
                l for l in schema.internals
                if not any(x in realized_set for x in l[1])
            ),
            distinct=tuple(
                (a, b) for a, b in schema.distinct
                if a not in realized_set and b not in realized_set
            ),
            realised=(),
            rules=tuple(r for r in schema.rules
                        if all(s == "*" or s not in realized_set
                               for s in r.slots)),
            source=schema.source,
        )
        validate_schema(out, schema.validated_arity)
        return out
    p, q = schema.factors
    sp, sq = strip_realised(p), strip_realised(q)
    if not sp.vars:
        return sq
    if not sq.vars:
        return sp
    return tensor(sp, sq, name=name)


def normalized_form(schema: TypeSchema):
    """Comparable fingerprint: realized shape, core up to isomorphism over
    the constants (variable tuple order kept), and the full rule tables."""
    schema.require_validated()
    base_pids = [schema.core.pid(n) for n in schema.base_names]
    var_slots = [schema.var_pid[v] for v in schema.vars]
    core_key = iso_canonical(schema.core, fixed=base_pids, slots=var_slots)

    def pat_key(pat: Pattern):
        ri, slots = pat
        return (ri, tuple((0, s) if s is not None else (1, 0) for s in slots))

    tables = tuple(
        (pat, tuple(sorted(schema.tables[pat].items())))
        for pat in sorted(schema.tables, key=pat_key)
    )
    realized = tuple(
        (schema.vars.index(v), c) for v, c in schema.realised
    )
    distinct = tuple(sorted(
        tuple(sorted((schema.vars.index(a), schema.vars.index(b))))
        for a, b in schema.distinct
    ))
    return (len(schema.vars), realized, distinct, core_key, tables)
