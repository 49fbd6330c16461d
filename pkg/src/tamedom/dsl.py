"""Line-oriented text formats for theories (.thy) and type schemas (.sch).

Theory files declare relations, symmetry/irreflexivity tags, Horn closure
rules, and forbidden configurations, or select the dense-order backend and
describe its cut universe.  Schema files carry guarded rule families for
amalgamation theories (`type` header) or cut placements for order theories
(`order-type` header).  `#` starts a comment; blank lines are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .structures import Relation, Signature
from .theory import (
    ForbiddenConfig,
    HornRule,
    MAX_RELATION_ARITY,
    TheorySpec,
)
from .schemas import Guard, SchemaRule, TypeSchema
from .cuts import CutType, OrderUniverse
from .engine import enumerate_extensions


class DslError(Exception):
    def __init__(self, source: str, lineno: int, message: str):
        super().__init__(f"{source}:{lineno}: {message}")
        self.source = source
        self.lineno = lineno
        self.message = message


_LIT_RE = re.compile(r"^(!?)\s*([A-Za-z_]\w*)\s*\(([^()]*)\)$")
_NEQ_RE = re.compile(r"^(\S+)\s*!=\s*(\S+)$")
_EQ_RE = re.compile(r"^(\S+)\s*=\s*(\S+)$")


def _strip(line: str) -> str:
    if "#" in line:
        line = line[: line.index("#")]
    return line.strip()


def _parse_lit(text: str, source: str, lineno: int) -> tuple[str, tuple[str, ...], bool]:
    m = _LIT_RE.match(text.strip())
    if not m:
        raise DslError(source, lineno, f"cannot parse literal {text.strip()!r}")
    neg, rel, args = m.groups()
    pts = tuple(a.strip() for a in args.split(",")) if args.strip() else ()
    if any(not p for p in pts):
        raise DslError(source, lineno, f"empty slot in literal {text.strip()!r}")
    return rel, pts, not neg


# ---------------------------------------------------------------------------
# Theories
# ---------------------------------------------------------------------------


def parse_theory(
    text: str, name: str, source: str = "<string>"
) -> Union[TheorySpec, OrderUniverse]:
    """Parse a .thy file.  Amalgamation files yield a TheorySpec; files
    declaring `backend dense-order` yield an OrderUniverse."""
    lines = text.splitlines()
    backend = "amalgamation"
    for i, raw in enumerate(lines, start=1):
        line = _strip(raw)
        if line.startswith("backend"):
            parts = line.split()
            if len(parts) != 2 or parts[1] not in ("amalgamation", "dense-order"):
                raise DslError(source, i, f"bad backend line {line!r}")
            backend = parts[1]
    if backend == "dense-order":
        return _parse_order_universe(lines, name, source)

    relations: list[Relation] = []
    rel_names: set[str] = set()
    symmetric: set[str] = set()
    irreflexive: list[str] = []
    rules: list[HornRule] = []
    forbids: list[ForbiddenConfig] = []

    def known(rel: str, lineno: int) -> Relation:
        for r in relations:
            if r.name == rel:
                return r
        raise DslError(source, lineno, f"undeclared relation {rel!r}")

    for i, raw in enumerate(lines, start=1):
        line = _strip(raw)
        if not line:
            continue
        parts = line.split(None, 1)
        head, rest = parts[0], (parts[1] if len(parts) > 1 else "")
        if head == "backend":
            continue
        elif head == "relation":
            bits = rest.split()
            if len(bits) != 2 or not bits[1].isdigit():
                raise DslError(source, i, f"bad relation line {line!r}")
            rname, arity = bits[0], int(bits[1])
            if rname in rel_names:
                raise DslError(source, i, f"duplicate relation name {rname!r}")
            if not 1 <= arity <= MAX_RELATION_ARITY:
                raise DslError(
                    source, i, f"relation arity must be 1..{MAX_RELATION_ARITY}"
                )
            rel_names.add(rname)
            relations.append(Relation(rname, arity))
        elif head == "symmetric":
            known(rest.strip(), i)
            symmetric.add(rest.strip())
        elif head == "irreflexive":
            r = known(rest.strip(), i)
            if r.arity < 2:
                raise DslError(source, i, "irreflexive needs arity >= 2")
            irreflexive.append(r.name)
        elif head == "rule":
            if "->" not in rest:
                raise DslError(source, i, "rule line needs '->'")
            body_text, head_text = rest.split("->", 1)
            body = []
            for piece in filter(None, (s.strip() for s in body_text.split("&"))):
                rel, pts, sign = _parse_lit(piece, source, i)
                if not sign:
                    raise DslError(
                        source, i, "closure-rule bodies take positive literals"
                    )
                if len(pts) != known(rel, i).arity:
                    raise DslError(source, i, f"arity mismatch in {piece!r}")
                body.append((rel, pts))
            rel, pts, sign = _parse_lit(head_text, source, i)
            if not sign:
                raise DslError(source, i, "closure-rule heads are positive")
            if len(pts) != known(rel, i).arity:
                raise DslError(source, i, f"arity mismatch in rule head")
            rules.append(HornRule(tuple(body), (rel, pts)))
        elif head == "forbid":
            lits = []
            distinct = []
            for piece in filter(None, (s.strip() for s in rest.split("&"))):
                m = _NEQ_RE.match(piece)
                if m and "(" not in piece:
                    distinct.append((m.group(1), m.group(2)))
                    continue
                rel, pts, sign = _parse_lit(piece, source, i)
                if len(pts) != known(rel, i).arity:
                    raise DslError(source, i, f"arity mismatch in {piece!r}")
                lits.append((rel, pts, sign))
            if not lits:
                raise DslError(source, i, "forbid line needs at least one literal")
            forbids.append(ForbiddenConfig(tuple(lits), tuple(distinct)))
        else:
            raise DslError(source, i, f"unknown directive {head!r}")

    relations = [
        Relation(r.name, r.arity, symmetric=r.name in symmetric) for r in relations
    ]
    for rname in irreflexive:
        arity = next(r.arity for r in relations if r.name == rname)
        forbids.append(
            ForbiddenConfig(
                ((rname, ("a",) * arity, True),),
                derived_from=f"irreflexive {rname}",
            )
        )
    try:
        return TheorySpec(
            name=name,
            signature=Signature(tuple(relations)),
            horn_rules=tuple(rules),
            forbidden=tuple(forbids),
            backend="amalgamation",
            irreflexive=tuple(irreflexive),
        )
    except Exception as exc:
        raise DslError(source, len(lines), str(exc)) from exc


def _parse_order_universe(lines, name, source) -> OrderUniverse:
    cuts: list[tuple[str, str]] = []
    points: list[tuple[str, Optional[bool]]] = []
    order: Optional[list[str]] = None
    predicate: Optional[str] = None
    for i, raw in enumerate(lines, start=1):
        line = _strip(raw)
        if not line:
            continue
        parts = line.split()
        if parts[0] == "backend":
            continue
        elif parts[0] == "predicate":
            if len(parts) != 2:
                raise DslError(source, i, "predicate line: `predicate <name>`")
            predicate = parts[1]
        elif parts[0] == "cut":
            if len(parts) != 4 or parts[2] != "side" or parts[3] not in ("left", "right"):
                raise DslError(
                    source, i, "cut line: `cut <name> side left|right`"
                )
            cuts.append((parts[1], parts[3]))
        elif parts[0] == "point":
            bit: Optional[bool] = None
            if len(parts) == 4 and parts[2] == "in":
                if parts[3] == "P":
                    bit = True
                elif parts[3] == "notP":
                    bit = False
                else:
                    raise DslError(source, i, "point bit must be P or notP")
            elif len(parts) != 2:
                raise DslError(source, i, "point line: `point <name> [in P|notP]`")
            points.append((parts[1], bit))
        elif parts[0] == "order":
            order = [t.strip() for t in " ".join(parts[1:]).split("<")]
            if any(not t for t in order):
                raise DslError(source, i, "order line: `order a < b < ...`")
        else:
            raise DslError(source, i, f"unknown directive {parts[0]!r}")
    try:
        return OrderUniverse(
            name=name,
            cuts=tuple(cuts),
            base_points=tuple(points),
            order=tuple(order) if order is not None else tuple(
                [c for c, _ in cuts] + [p for p, _ in points]
            ),
            predicate=predicate,
        )
    except Exception as exc:
        raise DslError(source, len(lines), str(exc)) from exc


def pretty_print_theory(theory: Union[TheorySpec, OrderUniverse]) -> str:
    if isinstance(theory, OrderUniverse):
        out = ["backend dense-order"]
        if theory.predicate:
            out.append(f"predicate {theory.predicate}")
        for c, side in theory.cuts:
            out.append(f"cut {c} side {side}")
        for p, bit in theory.base_points:
            if bit is None:
                out.append(f"point {p}")
            else:
                out.append(f"point {p} in {'P' if bit else 'notP'}")
        out.append("order " + " < ".join(theory.order))
        return "\n".join(out) + "\n"
    out = []
    for r in theory.signature.relations:
        out.append(f"relation {r.name} {r.arity}")
    for r in theory.signature.relations:
        if r.symmetric:
            out.append(f"symmetric {r.name}")
    for rname in theory.irreflexive:
        out.append(f"irreflexive {rname}")
    for rule in theory.horn_rules:
        body = " & ".join(f"{rel}({','.join(pts)})" for rel, pts in rule.body)
        rel, pts = rule.head
        out.append(f"rule {body}{' ' if body else ''}-> {rel}({','.join(pts)})")
    for cfg in theory.forbidden:
        if cfg.derived_from:
            continue
        pieces = [
            ("" if sign else "!") + f"{rel}({','.join(pts)})"
            for rel, pts, sign in cfg.literals
        ]
        pieces.extend(f"{a} != {b}" for a, b in cfg.distinct)
        out.append("forbid " + " & ".join(pieces))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Schemas (amalgamation backend)
# ---------------------------------------------------------------------------


def _parse_guard_token(tok: str, source: str, lineno: int):
    tok = tok.strip()
    if tok == "*":
        return 0  # positional: resolved against the rule's wildcard count
    if tok.startswith("*"):
        if not tok[1:].isdigit() or int(tok[1:]) < 1:
            raise DslError(source, lineno, f"bad wildcard token {tok!r}")
        return int(tok[1:])
    return tok


def parse_schema(text: str, theory: TheorySpec, source: str = "<string>") -> TypeSchema:
    lines = text.splitlines()
    name: Optional[str] = None
    vars_: tuple[str, ...] = ()
    base_names: tuple[str, ...] = ()
    internals: list = []
    distinct: list[tuple[str, str]] = []
    realised: list[tuple[str, str]] = []
    rules: list[SchemaRule] = []
    header_seen = False

    for i, raw in enumerate(lines, start=1):
        line = _strip(raw)
        if not line:
            continue
        if not header_seen:
            m = re.match(
                r"^type\s+(\S+)\s+over\s+(\S+)\s+vars\s*(.*)$", line
            )
            if not m:
                raise DslError(
                    source, i,
                    "schema file must start with `type <name> over <theory> "
                    "vars <v1,...>`",
                )
            name, tname, vtext = m.groups()
            if tname != theory.name:
                raise DslError(
                    source, i,
                    f"schema is over theory {tname!r}, got {theory.name!r}",
                )
            vars_ = tuple(v.strip() for v in vtext.split(",")) if vtext.strip() else ()
            header_seen = True
            continue
        parts = line.split(None, 1)
        head, rest = parts[0], (parts[1] if len(parts) > 1 else "")
        if head == "base":
            base_names = tuple(c.strip() for c in rest.split(","))
        elif head == "internal":
            m = _NEQ_RE.match(rest)
            if m and "(" not in rest:
                a, b = m.group(1), m.group(2)
                if a not in vars_ or b not in vars_:
                    raise DslError(
                        source, i, "distinctness names designated variables"
                    )
                distinct.append((a, b))
                continue
            rel, pts, sign = _parse_lit(rest, source, i)
            if not theory.signature.has(rel):
                raise DslError(source, i, f"unknown relation {rel!r}")
            if len(pts) != theory.signature.relation(rel).arity:
                raise DslError(source, i, f"arity mismatch in internal {rel}")
            if not any(p in vars_ for p in pts):
                raise DslError(
                    source, i, "internal literal mentions no designated variable"
                )
            internals.append((rel, pts, sign))
        elif head == "realised":
            m = _EQ_RE.match(rest)
            if not m:
                raise DslError(source, i, "realised line: `realised <var> = <const>`")
            realised.append((m.group(1), m.group(2)))
        else:
            rules.append(_parse_schema_rule(line, vars_, theory, source, i))

    if not header_seen:
        raise DslError(source, len(lines) or 1, "missing `type` header")
    try:
        return TypeSchema(
            name=name,
            theory=theory,
            vars=vars_,
            base_names=base_names,
            internals=tuple(internals),
            distinct=tuple(distinct),
            realised=tuple(realised),
            rules=tuple(rules),
            source=source,
        )
    except Exception as exc:
        raise DslError(source, len(lines), str(exc)) from exc


def _parse_schema_rule(
    line: str, vars_: tuple[str, ...], theory: TheorySpec, source: str, lineno: int
) -> SchemaRule:
    if ":=" not in line:
        raise DslError(source, lineno, f"cannot parse schema line {line!r}")
    head_text, rest = line.split(":=", 1)
    rel, slots, sign = _parse_lit(head_text.strip(), source, lineno)
    if not sign:
        raise DslError(source, lineno, "rule heads are written without '!'")
    if not theory.signature.has(rel):
        raise DslError(source, lineno, f"unknown relation {rel!r}")
    if len(slots) != theory.signature.relation(rel).arity:
        raise DslError(source, lineno, f"arity mismatch for {rel!r}")
    for s in slots:
        if s != "*" and s not in vars_:
            raise DslError(
                source, lineno,
                f"rule slot {s!r} is neither a designated variable nor '*'",
            )
    if all(s == "*" for s in slots):
        raise DslError(source, lineno, "rule mentions no designated variable")
    n_params = sum(1 for s in slots if s == "*")
    rest = rest.strip()
    if rest.startswith("true"):
        value, rest = True, rest[4:].strip()
    elif rest.startswith("false"):
        value, rest = False, rest[5:].strip()
    else:
        raise DslError(source, lineno, "rule value must be true or false")
    guards: list[Guard] = []
    if rest:
        if not rest.startswith("if"):
            raise DslError(source, lineno, f"unexpected trailing text {rest!r}")
        for piece in filter(None, (s.strip() for s in rest[2:].split("&"))):
            guards.append(
                _parse_one_guard(piece, n_params, theory, source, lineno)
            )
    return SchemaRule(rel, slots, value, tuple(guards), lineno)


def _parse_one_guard(
    piece: str, n_params: int, theory: TheorySpec, source: str, lineno: int
) -> Guard:
    def finish_token(tok):
        if tok == 0:  # bare `*`
            if n_params != 1:
                raise DslError(
                    source, lineno,
                    "bare '*' in a guard is only allowed with exactly one "
                    "wildcard slot; use *1, *2, ...",
                )
            return 1
        if isinstance(tok, int) and tok > n_params:
            raise DslError(
                source, lineno,
                f"guard wildcard *{tok} exceeds the rule's {n_params} "
                "wildcard slot(s)",
            )
        return tok

    m = _NEQ_RE.match(piece)
    if m and "(" not in piece:
        a = finish_token(_parse_guard_token(m.group(1), source, lineno))
        b = finish_token(_parse_guard_token(m.group(2), source, lineno))
        return ("eq", a, b, False)
    m = _EQ_RE.match(piece)
    if m and "(" not in piece:
        a = finish_token(_parse_guard_token(m.group(1), source, lineno))
        b = finish_token(_parse_guard_token(m.group(2), source, lineno))
        return ("eq", a, b, True)
    rel, raw_pts, sign = _parse_lit(piece, source, lineno)
    if not theory.signature.has(rel):
        raise DslError(source, lineno, f"unknown relation {rel!r} in guard")
    if len(raw_pts) != theory.signature.relation(rel).arity:
        raise DslError(source, lineno, f"arity mismatch in guard {rel!r}")
    tokens = tuple(
        finish_token(_parse_guard_token(t, source, lineno)) for t in raw_pts
    )
    return ("lit", rel, tokens, sign)


def pretty_print_schema(schema: TypeSchema) -> str:
    """Serialize a schema.  Authored schemas round-trip their own rule lines;
    product schemas are expanded: one guarded line per rule pattern and
    parameter type, the guard spelling out that type completely."""
    out = [
        f"type {schema.name} over {schema.theory.name} vars "
        + ",".join(schema.vars)
    ]
    if schema.base_names:
        out.append("base " + ",".join(schema.base_names))
    for v, c in schema.realised:
        out.append(f"realised {v} = {c}")
    for a, b in schema.distinct:
        out.append(f"internal {a} != {b}")
    if schema.factors is None:
        for rel, pts, sign in schema.internals:
            out.append(f"internal {'' if sign else '!'}{rel}({','.join(pts)})")
        for r in schema.rules:
            out.append(r.pretty())
        return "\n".join(out) + "\n"

    # product: expanded serialization off the compiled core and tables
    schema.require_validated()
    core = schema.core
    free = {schema.var_pid[v] for v in schema.free_vars}
    for (ri, pts), val in sorted(core.atoms.items()):
        if not any(p in free for p in pts):
            continue
        if core.sig.relations[ri].symmetric and tuple(sorted(pts)) != pts:
            continue  # one slot per symmetric orbit is enough
        names = [core.points[p].name for p in pts]
        out.append(
            f"internal {'' if val else '!'}"
            f"{core.sig.relations[ri].name}({','.join(names)})"
        )
    sig = schema.theory.signature
    fv = schema.free_vars
    ext_cache = {}
    for pat in schema.patterns:
        ri, slots = pat
        m = sum(1 for s in slots if s is None)
        if m == 0 or pat not in schema.tables:
            continue
        slot_names = [fv[s] if s is not None else "*" for s in slots]
        if m not in ext_cache:
            ext_cache[m] = enumerate_extensions(
                schema.base_struct, m, schema.theory
            )
        for ext in ext_cache[m]:
            value = schema.tables[pat].get(ext.key)
            if value is None:
                continue
            guards = _describe_extension_guards(schema, ext)
            line = f"{sig.relations[ri].name}({','.join(slot_names)}) := " \
                   f"{str(value).lower()}"
            if guards:
                line += " if " + " & ".join(guards)
            out.append(line)
    return "\n".join(out) + "\n"


def _describe_extension_guards(schema: TypeSchema, ext) -> list[str]:
    """A complete positive description of one parameter type, as guard text."""
    s = ext.struct
    n_base = len(schema.base_struct.points)
    guards: list[str] = []

    def token(pid: int) -> str:
        if pid in ext.slot_pids:
            return f"*{ext.slot_pids.index(pid) + 1}"
        return s.points[pid].name

    for j, pid in enumerate(ext.slot_pids):
        if pid < n_base:
            guards.append(f"*{j + 1} = {s.points[pid].name}")
        else:
            for b in range(n_base):
                guards.append(f"*{j + 1} != {s.points[b].name}")
        for k in range(j + 1, len(ext.slot_pids)):
            other = ext.slot_pids[k]
            if other == pid:
                guards.append(f"*{j + 1} = *{k + 1}")
            elif pid >= n_base and other >= n_base:
                guards.append(f"*{j + 1} != *{k + 1}")
    mentioned = set(ext.slot_pids)
    for (ri, pts), val in sorted(s.atoms.items()):
        if not any(p in mentioned and p >= n_base for p in pts):
            continue
        if s.sig.relations[ri].symmetric and tuple(sorted(pts)) != pts:
            continue
        guards.append(
            ("" if val else "!")
            + f"{s.sig.relations[ri].name}({','.join(token(p) for p in pts)})"
        )
    return guards


# ---------------------------------------------------------------------------
# Order types (dense-order backend)
# ---------------------------------------------------------------------------


def parse_order_type(
    text: str, universe: OrderUniverse, source: str = "<string>"
) -> CutType:
    lines = text.splitlines()
    name: Optional[str] = None
    vars_: tuple[str, ...] = ()
    placements: dict[str, tuple] = {}
    internal: list[tuple[str, str]] = []
    header_seen = False
    for i, raw in enumerate(lines, start=1):
        line = _strip(raw)
        if not line:
            continue
        if not header_seen:
            m = re.match(r"^order-type\s+(\S+)\s+over\s+(\S+)\s+vars\s*(.*)$", line)
            if not m:
                raise DslError(
                    source, i,
                    "order-type file must start with `order-type <name> over "
                    "<universe> vars <v1,...>`",
                )
            name, uname, vtext = m.groups()
            if uname != universe.name:
                raise DslError(
                    source, i,
                    f"order type is over {uname!r}, got {universe.name!r}",
                )
            vars_ = tuple(v.strip() for v in vtext.split(",")) if vtext.strip() else ()
            header_seen = True
            continue
        m = re.match(
            r"^(\S+)\s+at\s+cut\s+(\S+)\s+from\s+(below|above)"
            r"(?:\s+in\s+(P|notP))?$",
            line,
        )
        if m:
            v, cut, side, bit = m.groups()
            if v not in vars_:
                raise DslError(source, i, f"unknown variable {v!r}")
            placements[v] = (
                "cut", cut, side, None if bit is None else (bit == "P")
            )
            continue
        m = re.match(r"^(\S+)\s*<\s*(\S+)$", line)
        if m:
            a, b = m.groups()
            if a not in vars_ or b not in vars_:
                raise DslError(source, i, "internal order names variables only")
            internal.append((a, b))
            continue
        m = _EQ_RE.match(line)
        if m and "!" not in line:
            v, c = m.group(1), m.group(2)
            if v not in vars_:
                raise DslError(source, i, f"unknown variable {v!r}")
            placements[v] = ("eq", c)
            continue
        raise DslError(source, i, f"cannot parse order-type line {line!r}")
    if not header_seen:
        raise DslError(source, len(lines) or 1, "missing `order-type` header")
    try:
        return CutType(
            name=name,
            universe=universe,
            vars=vars_,
            placements=placements,
            internal=tuple(internal),
            source=source,
        )
    except Exception as exc:
        raise DslError(source, len(lines), str(exc)) from exc


def pretty_print_order_type(t: CutType) -> str:
    out = [f"order-type {t.name} over {t.universe.name} vars " + ",".join(t.vars)]
    for v in t.vars:
        pl = t.placements[v]
        if pl[0] == "eq":
            out.append(f"{v} = {pl[1]}")
        else:
            _, cut, side, bit = pl
            line = f"{v} at cut {cut} from {side}"
            if bit is not None:
                line += f" in {'P' if bit else 'notP'}"
            out.append(line)
    for a, b in t.internal:
        out.append(f"{a} < {b}")
    return "\n".join(out) + "\n"
