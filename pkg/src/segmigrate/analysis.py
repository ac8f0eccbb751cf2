"""Facts the transformation needs: explicit types for implicitly typed
symbols, external-name classification, parameter intents, module imports."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import MigrationError
from .frontend import ast_nodes as A
from .frontend.lexer import DottedAccess, ExprToken, SlashDim, Token, NAME, INT, PUNCT
from .model import ProjectModel, SegmentDefinition, UnitSummary

# --- implicit typing --------------------------------------------------------

DECLARED = "declared"
IMPLICIT_RULE = "implicit-rule"
POINTEUR_DECL = "pointeur-decl"
FUNCTION_RETURN = "function-return"


@dataclass(frozen=True)
class TypeAssignment:
    symbol: str
    inferred_type: str
    origin: str


def default_implicit_type(name: str) -> str:
    """The standard naming rule: `i` through `n` are integers, the rest reals."""
    return "integer" if name[0].lower() in "ijklmn" else "real"


def implicit_rule_table(unit: A.ProgramUnitAst) -> Dict[str, str]:
    """Per-letter type map after applying the unit's implicit statements on
    top of the default rule."""
    table = {letter: default_implicit_type(letter) for letter in "abcdefghijklmnopqrstuvwxyz"}
    for node in unit.body:
        if isinstance(node, A.ImplicitDeclNode) and not node.none:
            for type_name, letters in node.rules:
                m = re.match(r"character\s*\*\s*(\d+)", type_name)
                if m:
                    type_name = f"character(len={m.group(1)})"
                for letter in _expand_letters(letters):
                    table[letter] = type_name
    return table


def _expand_letters(spec: str) -> List[str]:
    out: List[str] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(chr(c) for c in range(ord(lo), ord(hi) + 1))
        elif part:
            out.append(part)
    return out


def declared_types(unit: A.ProgramUnitAst) -> Dict[str, str]:
    """Explicitly declared symbol types, POINTEUR declarations winning over
    plain ``integer`` declarations of the same name (the Esope pointer-as-
    integer idiom)."""
    types: Dict[str, str] = {}
    dims_only: Set[str] = set()
    for node in unit.body:
        if isinstance(node, A.TypeDeclNode):
            for ent in node.entities:
                if node.base_type is None:
                    dims_only.add(ent.name)
                    continue
                types[ent.name] = _format_type(node.base_type, node.char_len)
    for node in unit.body:
        if isinstance(node, A.PointerDeclNode):
            for pname, seg in node.entries:
                types[pname] = f"type({seg}), pointer"
    for name in dims_only:
        types.setdefault(name, "")  # typed by implicit rule, dimensioned here
    return types


def _format_type(base: str, char_len) -> str:
    if base == "character":
        if char_len is None:
            return "character(len=1)"
        length = "*" if char_len == "*" else str(char_len)
        return f"character(len={length})"
    return base


def infer_implicit_types(unit: A.ProgramUnitAst, model: ProjectModel) -> List[TypeAssignment]:
    """Give every referenced symbol of the unit exactly one type."""
    table = implicit_rule_table(unit)
    declared = declared_types(unit)
    called = {e.callee for e in model.calls_from(unit.name)}

    referenced = A.referenced_symbols(unit) | set(unit.params)
    segs_in_scope = _segments_in_scope(unit, model)
    field_owner: Dict[str, str] = {}
    for seg in segs_in_scope:
        for f in seg.fields:
            field_owner.setdefault(f.name, seg.name)

    out: List[TypeAssignment] = []
    seen: Set[str] = set()
    for sym in sorted(referenced):
        if sym in seen:
            continue
        seen.add(sym)
        if sym == unit.name:
            continue
        if sym in called:
            if sym in declared and declared[sym]:
                raise MigrationError(
                    f"symbol {sym!r} used as both variable and called routine in {unit.name}"
                )
            continue  # plain subroutine reference, not a variable
        if _is_pointer(sym, unit):
            out.append(TypeAssignment(sym, declared[sym], POINTEUR_DECL))
        elif sym in declared and declared[sym]:
            out.append(TypeAssignment(sym, declared[sym], DECLARED))
        elif sym in declared:
            # dimensioned (DIMENSION stmt) but typed by the implicit rule
            out.append(TypeAssignment(sym, table[sym[0]], IMPLICIT_RULE))
        elif sym in model.functions():
            u = model.functions()[sym]
            rt = u.return_type or table[sym[0]]
            out.append(TypeAssignment(sym, rt, FUNCTION_RETURN))
        elif sym in segs_names(segs_in_scope) or sym in field_owner:
            # segment default pointer or bare field access; typed by rewrite
            continue
        else:
            out.append(TypeAssignment(sym, table[sym[0]], IMPLICIT_RULE))
    return out


def segs_names(segs: Sequence[SegmentDefinition]) -> Set[str]:
    return {s.name for s in segs}


def _is_pointer(sym: str, unit: A.ProgramUnitAst) -> bool:
    for node in unit.body:
        if isinstance(node, A.PointerDeclNode):
            if any(p == sym for p, _ in node.entries):
                return True
    return False


def _segments_in_scope(unit: A.ProgramUnitAst, model: ProjectModel) -> List[SegmentDefinition]:
    names = [s.name for s in A.segment_definitions(unit)]
    names += [n for n in unit.extra_segments_in_scope if n not in names]
    if unit.name in model.units:
        for n in model.units[unit.name].segments_in_scope:
            if n not in names:
                names.append(n)
    return [model.segments[n] for n in names if n in model.segments]


# --- external-name classification ------------------------------------------

EXTERNAL_ROUTINE_DECL = "externalRoutineDecl"
RETURN_TYPE_DECL = "returnTypeDecl"
PLAIN_VARIABLE_DECL = "plainVariableDecl"


def invoked_names(unit: A.ProgramUnitAst) -> Set[str]:
    """Names invoked with parentheses in expression context."""
    found: Set[str] = set()

    def scan(stream: Sequence[ExprToken]):
        for i, t in enumerate(stream):
            if isinstance(t, Token) and t.kind == NAME:
                nxt = stream[i + 1] if i + 1 < len(stream) else None
                if isinstance(nxt, Token) and nxt == Token(PUNCT, "("):
                    found.add(t.value)
            elif isinstance(t, DottedAccess):
                for sub in t.subscripts:
                    scan(sub)
            elif isinstance(t, SlashDim):
                scan([t.base])

    for node in unit.body:
        if isinstance(node, A.AssignmentNode):
            scan(node.rhs)
            scan(node.lhs[1:])
            if node.guard:
                scan(node.guard)
        elif isinstance(node, A.CallNode):
            for arg in node.args:
                scan(arg)
            if node.guard:
                scan(node.guard)
        elif isinstance(node, A.OpaqueNode):
            scan(node.tokens)
    return found


def assigned_names(unit: A.ProgramUnitAst) -> Set[str]:
    names: Set[str] = set()
    for name, kind in _unit_events(unit, model=None):
        if kind == "w":
            names.add(name)
    return names


def classify_external_names(unit: A.ProgramUnitAst, model: ProjectModel) -> Dict[str, str]:
    """Partition explicitly typed names into external routine declarations,
    function return-type declarations, and plain variables."""
    external: Set[str] = set()
    typed: Set[str] = set()
    for node in unit.body:
        if isinstance(node, A.ExternalDeclNode):
            external |= set(node.names)
        elif isinstance(node, A.TypeDeclNode) and node.base_type is not None:
            typed |= {e.name for e in node.entities}

    invoked = invoked_names(unit)
    assigned = assigned_names(unit)
    arrays = {
        e.name
        for node in unit.body
        if isinstance(node, A.TypeDeclNode)
        for e in node.entities
        if e.dims
    }
    functions = set(model.functions()) | set(model.intent_catalog)

    out: Dict[str, str] = {}
    for name in sorted(external):
        out[name] = EXTERNAL_ROUTINE_DECL
    for name in sorted(typed):
        if name in out:
            continue
        calls_like = name in invoked and name not in arrays
        is_function = calls_like or name in functions
        if is_function and name in assigned:
            raise MigrationError(
                f"name {name!r} is both assigned and invoked in {unit.name}"
            )
        if is_function and name in invoked:
            out[name] = RETURN_TYPE_DECL
        else:
            out[name] = PLAIN_VARIABLE_DECL
    return out


# --- parameter intent inference --------------------------------------------

IN = "in"
OUT = "out"
INOUT = "inout"
UNKNOWN = "unknown"

#: 4-state machine over first-access character
_READ = {UNKNOWN: IN, IN: IN, OUT: OUT, INOUT: INOUT}
_WRITE = {UNKNOWN: OUT, IN: INOUT, OUT: OUT, INOUT: INOUT}


@dataclass
class RoutineSpec:
    """Events of one routine, in textual order, restricted to what the
    intent solver needs."""

    params: List[str]
    # ('r', name) | ('w', name) | ('f', callee, position, name)
    events: List[Tuple]


IntentTable = Dict[Tuple[str, int], str]


def solve_intents(routines: Dict[str, RoutineSpec], catalog: Dict[str, List[str]]) -> IntentTable:
    """Monotone Jacobi fixpoint over the call graph.

    Externals are seeded from the catalog; anything still untouched after
    stabilization defaults to inout (the FORTRAN 77 by-reference behavior).
    """
    state: IntentTable = {
        (name, i): UNKNOWN for name, spec in routines.items() for i in range(len(spec.params))
    }
    changed = True
    while changed:
        changed = False
        snapshot = dict(state)
        for name, spec in routines.items():
            local = _run_events(spec, snapshot, routines, catalog)
            for i, value in enumerate(local):
                if value != state[(name, i)]:
                    state[(name, i)] = value
                    changed = True
    return {key: (INOUT if v == UNKNOWN else v) for key, v in state.items()}


def _run_events(spec: RoutineSpec, table: IntentTable, routines, catalog) -> List[str]:
    pos = {p: i for i, p in enumerate(spec.params)}
    states = [UNKNOWN] * len(spec.params)

    def read(name):
        if name in pos:
            states[pos[name]] = _READ[states[pos[name]]]

    def write(name):
        if name in pos:
            states[pos[name]] = _WRITE[states[pos[name]]]

    for ev in spec.events:
        if ev[0] == "r":
            read(ev[1])
        elif ev[0] == "w":
            write(ev[1])
        else:
            _, callee, cpos, name = ev
            intent = _callee_intent(callee, cpos, table, routines, catalog)
            if intent == IN:
                read(name)
            elif intent == OUT:
                write(name)
            elif intent == INOUT:
                read(name)
                write(name)
            # UNKNOWN: no effect yet; the fixpoint will revisit
    return states


def _callee_intent(callee, cpos, table, routines, catalog) -> str:
    if callee in routines:
        if cpos >= len(routines[callee].params):
            return INOUT  # arity mismatch: stay safe
        return table[(callee, cpos)]
    if callee in catalog:
        intents = catalog[callee]
        if cpos < len(intents):
            return intents[cpos]
    return INOUT  # unknown external: safe over-approximation


def infer_intents(model: ProjectModel, units: Sequence[A.ProgramUnitAst]) -> IntentTable:
    """Intent table for every routine of the project."""
    routines = {
        unit.name: RoutineSpec(params=list(unit.params), events=routine_events(unit, model))
        for unit in units
        if unit.kind in ("subroutine", "function")
    }
    return solve_intents(routines, model.intent_catalog)


def routine_events(unit: A.ProgramUnitAst, model: Optional[ProjectModel]) -> List[Tuple]:
    """Read/write/forward events of one routine, in textual order."""
    events: List[Tuple] = []
    for name, kind in _unit_events(unit, model):
        events.append((kind, name) if kind in ("r", "w") else name)
    return events


def _unit_events(unit: A.ProgramUnitAst, model: Optional[ProjectModel]):
    """Yield ('name', 'r'|'w') pairs, or (('f', callee, pos, name), 'f')."""
    seg_by_pointer = _pointer_segments(unit, model)
    for node in unit.body:
        yield from _statement_events(node, unit, model, seg_by_pointer)


def _pointer_segments(unit, model) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for node in unit.body:
        if isinstance(node, A.PointerDeclNode):
            for p, s in node.entries:
                out[p] = s
    return out


def _statement_events(node, unit, model, seg_by_pointer):
    def reads(stream):
        for n in _ordered_names(stream):
            yield (n, "r")

    if isinstance(node, A.TypeDeclNode):
        # adjustable-array bounds are read on entry
        for ent in node.entities:
            for dim in ent.dims:
                yield from reads(dim)
    elif isinstance(node, A.AssignmentNode):
        if node.guard:
            yield from reads(node.guard)
        yield from reads(node.rhs)
        head, rest = (node.lhs[0], node.lhs[1:]) if node.lhs else (None, [])
        yield from reads(rest)
        if isinstance(head, Token) and head.kind == NAME:
            if head.value != unit.name:  # function-result assignment is not a param
                yield (head.value, "w")
        elif isinstance(head, DottedAccess):
            for sub in head.subscripts:
                yield from reads(sub)
            if head.pointer:
                yield (head.pointer, "r")  # writing a field reads the pointer
    elif isinstance(node, A.CallNode):
        if node.guard:
            yield from reads(node.guard)
        for i, arg in enumerate(node.args):
            if len(arg) == 1 and isinstance(arg[0], Token) and arg[0].kind == NAME:
                yield (("f", node.callee, i, arg[0].value), "f")
            else:
                yield from reads(arg)
    elif isinstance(node, A.EsopeCommandNode):
        seg = None
        if model is not None and seg_by_pointer.get(node.target) in model.segments:
            seg = model.segments[seg_by_pointer[node.target]]
        dim_vars = seg.dimensioning_vars if seg else []
        if node.kind == A.SEGINI:
            for v in dim_vars:
                yield (v, "r")
            yield (node.target, "w")
        elif node.kind == A.SEGINI_COPY:
            yield (node.source, "r")
            yield (node.target, "w")
        elif node.kind == A.SEGACT_MOVE:
            yield (node.source, "r")
            yield (node.target, "r")
            yield (node.target, "w")
        elif node.kind == A.SEGADJ:
            for v in dim_vars:
                yield (v, "r")
            yield (node.target, "r")
            yield (node.target, "w")
        elif node.kind == A.SEGSUP:
            yield (node.target, "r")
            yield (node.target, "w")
        else:  # segprt, segact, segdes
            yield (node.target, "r")
    elif isinstance(node, A.OpaqueNode):
        yield from _opaque_events(node.tokens)


def _opaque_events(tokens: List[ExprToken]):
    head = tokens[0] if tokens else None
    if not (isinstance(head, Token) and head.kind == NAME):
        for n in _ordered_names(tokens):
            yield (n, "r")
        return
    kw = head.value
    if kw in ("write", "print"):
        for n in _ordered_names(tokens[1:]):
            yield (n, "r")
    elif kw == "read":
        control, rest = _split_control(tokens[1:])
        for n in _ordered_names(control):
            yield (n, "r")
        for item in _split_items(rest):
            base = item[0] if item else None
            for n in _ordered_names(item[1:]):
                yield (n, "r")
            if isinstance(base, Token) and base.kind == NAME:
                yield (base.value, "w")
    elif kw == "do":
        k = next(
            (
                i
                for i, t in enumerate(tokens)
                if isinstance(t, Token) and t.kind == "op" and t.value == "="
            ),
            None,
        )
        if k is not None and k >= 1:
            var = tokens[k - 1]
            for n in _ordered_names(tokens[k + 1 :]):
                yield (n, "r")
            if isinstance(var, Token) and var.kind == NAME:
                yield (var.value, "w")
        else:
            for n in _ordered_names(tokens[1:]):
                yield (n, "r")
    else:
        for n in _ordered_names(tokens):
            if n not in A.STATEMENT_KEYWORDS:
                yield (n, "r")


def _split_control(tokens):
    if tokens and isinstance(tokens[0], Token) and tokens[0] == Token(PUNCT, "("):
        depth = 0
        for i, t in enumerate(tokens):
            if isinstance(t, Token) and t == Token(PUNCT, "("):
                depth += 1
            elif isinstance(t, Token) and t == Token(PUNCT, ")"):
                depth -= 1
                if depth == 0:
                    return tokens[1:i], tokens[i + 1 :]
    return [], tokens


def _split_items(tokens):
    parts, depth = [[]], 0
    for t in tokens:
        if isinstance(t, Token):
            if t == Token(PUNCT, "("):
                depth += 1
            elif t == Token(PUNCT, ")"):
                depth -= 1
        if depth == 0 and isinstance(t, Token) and t == Token(PUNCT, ","):
            parts.append([])
        else:
            parts[-1].append(t)
    return [p for p in parts if p]


def _ordered_names(stream) -> List[str]:
    out: List[str] = []
    for t in stream:
        if isinstance(t, Token):
            if t.kind == NAME and t.value not in A.INTRINSIC_FUNCTIONS:
                out.append(t.value)
        elif isinstance(t, DottedAccess):
            if t.pointer:
                out.append(t.pointer)
            for sub in t.subscripts:
                out.extend(_ordered_names(sub))
        elif isinstance(t, SlashDim):
            out.extend(_ordered_names([t.base]))
    return out


# --- module imports ---------------------------------------------------------


def compute_uses(
    required: Set[str],
    defined: Set[str],
    module_of: Dict[str, str],
    external_ok: Set[str],
) -> List[str]:
    """Modules to import: one per migrated module defining a required symbol,
    alphabetically.  A symbol defined nowhere and not known external is an
    error."""
    modules: Set[str] = set()
    for sym in sorted(required - defined):
        if sym in module_of:
            modules.add(module_of[sym])
        elif sym in external_ok or sym in A.INTRINSIC_FUNCTIONS:
            continue
        else:
            raise MigrationError(f"required symbol {sym!r} is defined by no module")
    return sorted(modules)


# --- intent catalog file ----------------------------------------------------

_CATALOG_LINE_RE = re.compile(r"^([a-z][a-z0-9_]*)\(([a-z, ]*)\)$", re.IGNORECASE)


def load_intent_catalog(text: str) -> Dict[str, List[str]]:
    """Plain text, one line per routine: ``name(intent,intent,...)``."""
    catalog: Dict[str, List[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _CATALOG_LINE_RE.match(line)
        if not m:
            raise MigrationError(f"intent catalog line {lineno}: cannot parse {raw!r}")
        intents = [p.strip().lower() for p in m.group(2).split(",") if p.strip()]
        for intent in intents:
            if intent not in (IN, OUT, INOUT):
                raise MigrationError(f"intent catalog line {lineno}: bad intent {intent!r}")
        catalog[m.group(1).lower()] = intents
    return catalog
