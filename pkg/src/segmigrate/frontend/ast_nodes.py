"""AST node classes for one program unit (the full-fidelity level).

Only constructs that must be rewritten are deeply parsed; any other host
statement survives as an :class:`OpaqueNode` wrapping its token stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Set, Tuple

from ..errors import SourceSpan
from .lexer import DottedAccess, ExprToken, IncludeDirective, SlashDim, Token, NAME, INT, PUNCT

if TYPE_CHECKING:
    from ..model import SegmentDefinition


@dataclass
class Node:
    span: SourceSpan
    label: Optional[int] = None


@dataclass
class CommentNode(Node):
    text: str = ""  # empty text is a preserved blank line


@dataclass
class DirectiveNode(Node):
    """Non-include preprocessor line, passed through verbatim."""

    text: str = ""


@dataclass
class IncludeNode(Node):
    directive: IncludeDirective = None


@dataclass
class SegmentDefNode(Node):
    definition: "SegmentDefinition" = None


@dataclass
class PointerDeclNode(Node):
    # POINTEUR p.seg[, q.seg2 ...]
    entries: List[Tuple[str, str]] = field(default_factory=list)


# Esope command kinds
SEGINI = "segini"
SEGINI_COPY = "segini-copy"
SEGACT = "segact"
SEGACT_MOVE = "segact-move"
SEGADJ = "segadj"
SEGSUP = "segsup"
SEGPRT = "segprt"
SEGDES = "segdes"

COMMAND_KINDS = (SEGINI, SEGINI_COPY, SEGACT, SEGACT_MOVE, SEGADJ, SEGSUP, SEGPRT, SEGDES)
ESOPE_KEYWORDS = (
    "segment", "pointeur",
    "segini", "segact", "segadj", "segsup", "segprt", "segdes", "segcop", "segmov",
)


@dataclass
class EsopeCommandNode(Node):
    kind: str = ""
    target: str = ""
    source: Optional[str] = None  # second operand of the copy/move forms
    original: str = ""  # source text, for traceability comments


@dataclass
class DeclEntity:
    name: str
    dims: Tuple[Tuple[ExprToken, ...], ...] = ()


@dataclass
class TypeDeclNode(Node):
    # `dimension a(10)` is modelled as a declaration with base_type None
    base_type: Optional[str] = None
    char_len: Optional[object] = None
    entities: List[DeclEntity] = field(default_factory=list)


@dataclass
class ExternalDeclNode(Node):
    names: List[str] = field(default_factory=list)


@dataclass
class ImplicitDeclNode(Node):
    # none=True for `implicit none`; otherwise (type, letters) rules
    none: bool = False
    rules: List[Tuple[str, str]] = field(default_factory=list)
    original: str = ""


@dataclass
class CallNode(Node):
    callee: str = ""
    args: List[List[ExprToken]] = field(default_factory=list)
    guard: Optional[List[ExprToken]] = None  # condition of a logical IF


@dataclass
class AssignmentNode(Node):
    lhs: List[ExprToken] = field(default_factory=list)
    rhs: List[ExprToken] = field(default_factory=list)
    guard: Optional[List[ExprToken]] = None  # condition of a logical IF

    def lhs_name(self) -> Optional[str]:
        head = self.lhs[0] if self.lhs else None
        if isinstance(head, Token) and head.kind == NAME:
            return head.value
        if isinstance(head, DottedAccess) and head.pointer:
            return head.pointer
        return None


@dataclass
class OpaqueNode(Node):
    tokens: List[ExprToken] = field(default_factory=list)


@dataclass
class ProgramUnitAst:
    name: str
    kind: str  # program | subroutine | function
    params: List[str]
    body: List[Node]
    span: SourceSpan
    file_id: str
    return_type: Optional[str] = None
    # segments made visible by resolved includes (not declared in this file)
    extra_segments_in_scope: List[str] = field(default_factory=list)


# --- traversal helpers ------------------------------------------------------


def walk_statements(unit: ProgramUnitAst):
    yield from unit.body


def segment_definitions(unit: ProgramUnitAst) -> List["SegmentDefinition"]:
    return [n.definition for n in unit.body if isinstance(n, SegmentDefNode)]


def token_names(stream: Sequence[ExprToken]) -> Set[str]:
    """All identifier names occurring in a folded token stream."""
    names: Set[str] = set()
    for t in stream:
        if isinstance(t, Token):
            if t.kind == NAME:
                names.add(t.value)
        elif isinstance(t, DottedAccess):
            if t.pointer:
                names.add(t.pointer)
            for sub in t.subscripts:
                names |= token_names(sub)
        elif isinstance(t, SlashDim):
            names |= token_names([t.base])
    return names


#: statement keywords that must not be mistaken for symbol references
STATEMENT_KEYWORDS = {
    "if", "then", "else", "elseif", "endif", "end",
    "do", "enddo", "while", "continue",
    "goto", "go", "to", "return", "stop", "pause",
    "write", "read", "print", "format", "open", "close", "rewind",
    "backspace", "inquire", "endfile",
    "call", "common", "equivalence", "data", "save", "parameter",
    "dimension", "entry", "intrinsic",
}

#: intrinsics that may appear in expressions without a declaration
INTRINSIC_FUNCTIONS = {
    "abs", "max", "min", "mod", "sqrt", "exp", "log", "log10",
    "sin", "cos", "tan", "asin", "acos", "atan", "atan2",
    "int", "nint", "real", "float", "dble", "char", "ichar", "len",
    "index", "sign", "iabs", "amax1", "amin1", "max0", "min0",
    "size", "trim", "adjustl", "null",
}


def statement_reference_names(node: Node) -> Set[str]:
    """Names a statement references, with statement keywords filtered out."""
    if isinstance(node, AssignmentNode):
        names = token_names(node.lhs) | token_names(node.rhs)
        if node.guard:
            names |= token_names(node.guard)
        return names - INTRINSIC_FUNCTIONS
    if isinstance(node, CallNode):
        names = set()
        for arg in node.args:
            names |= token_names(arg)
        if node.guard:
            names |= token_names(node.guard)
        return names - INTRINSIC_FUNCTIONS
    if isinstance(node, OpaqueNode):
        return _opaque_reference_names(node.tokens)
    if isinstance(node, TypeDeclNode):
        names = set()
        for ent in node.entities:
            for dim in ent.dims:
                names |= token_names(dim)
        return names - INTRINSIC_FUNCTIONS
    return set()


def _opaque_reference_names(tokens: Sequence[ExprToken]) -> Set[str]:
    names = token_names(tokens)
    skip = set()
    for idx, t in enumerate(tokens):
        if not (isinstance(t, Token) and t.kind == NAME):
            break
        if t.value in STATEMENT_KEYWORDS:
            skip.add(t.value)
        else:
            break
    # `if (...) then`, `do 10 i = ...`: keywords may also follow groups
    for t in tokens:
        if isinstance(t, Token) and t.kind == NAME and t.value in ("then", "to"):
            skip.add(t.value)
    # common block names sit between slashes and are not variables
    first = tokens[0] if tokens else None
    if isinstance(first, Token) and first.kind == NAME and first.value == "common":
        inside = False
        for t in tokens[1:]:
            if isinstance(t, Token) and t.value == "/":
                inside = not inside
            elif inside and isinstance(t, Token) and t.kind == NAME:
                skip.add(t.value)
    return (names - skip - STATEMENT_KEYWORDS) - INTRINSIC_FUNCTIONS


def referenced_symbols(unit: ProgramUnitAst) -> Set[str]:
    names: Set[str] = set()
    for node in unit.body:
        names |= statement_reference_names(node)
        if isinstance(node, CallNode):
            names.add(node.callee)
    return names


def defined_symbols(unit: ProgramUnitAst) -> Set[str]:
    """Symbols declared by the unit itself (incl. parameters and pointers)."""
    names: Set[str] = set(unit.params)
    names.add(unit.name)
    for node in unit.body:
        if isinstance(node, TypeDeclNode):
            names |= {e.name for e in node.entities}
        elif isinstance(node, PointerDeclNode):
            names |= {p for p, _ in node.entries}
        elif isinstance(node, ExternalDeclNode):
            names |= set(node.names)
        elif isinstance(node, SegmentDefNode):
            names.add(node.definition.name)
            names |= node.definition.field_names()
    return names
