"""Per-unit rewriting: statement catalog plus module wrapping.

Every source statement maps to free-form statements, a traceability
comment, or both; nothing is dropped silently.  The input AST is never
mutated, so a failed run leaves earlier results reusable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .. import analysis
from .. import target as T
from ..errors import MigrationError
from ..frontend import ast_nodes as A
from ..frontend.lexer import DottedAccess, ExprToken, SlashDim, Token
from ..model import ProjectModel, SegmentDefinition, segment_for_field
from .tokens import render_tokens

MARK = "[seg-migrate]"


@dataclass
class RewriteContext:
    unit: A.ProgramUnitAst
    model: ProjectModel
    intents: Dict[Tuple[str, int], str]
    pointer_map: Dict[str, str] = field(default_factory=dict)  # pointer -> segment
    scope: List[SegmentDefinition] = field(default_factory=list)
    classification: Dict[str, str] = field(default_factory=dict)
    rewritten: int = 0
    removed: int = 0
    passthrough: int = 0

    def segment_of(self, name: str) -> Optional[SegmentDefinition]:
        seg_name = self.pointer_map.get(name)
        if seg_name is None and any(s.name == name for s in self.scope):
            seg_name = name  # default pointer carries the segment's name
        if seg_name is None:
            return None
        if seg_name not in self.model.segments:
            raise MigrationError(
                f"pointer {name!r} targets unknown segment {seg_name!r}", self.unit.span
            )
        return self.model.segments[seg_name]

    def resolve_field(self, field_name: str) -> str:
        seg = segment_for_field(self.model, field_name, [s.name for s in self.scope])
        if seg is None:
            raise MigrationError(
                f"bare field {field_name!r} matches no in-scope segment", self.unit.span
            )
        return seg.default_pointer


def make_context(
    unit: A.ProgramUnitAst,
    model: ProjectModel,
    intents: Dict[Tuple[str, int], str],
) -> RewriteContext:
    ctx = RewriteContext(unit=unit, model=model, intents=intents)
    for node in unit.body:
        if isinstance(node, A.PointerDeclNode):
            for p, s in node.entries:
                ctx.pointer_map[p] = s
    ctx.scope = analysis._segments_in_scope(unit, model)
    ctx.classification = analysis.classify_external_names(unit, model)
    return ctx


def _stmt(ctx: RewriteContext, text: str, label: Optional[int]) -> T.TargetNode:
    if label is not None:
        text = f"{label} {text}"
    return T.statement(text)


def _removed(original: str, reason: str) -> T.TargetNode:
    return T.comment(f"{MARK} removed ({reason}): {original}")


def rewrite_statement(node: A.Node, ctx: RewriteContext) -> List[T.OutputNode]:
    """One source statement to its free-form replacement."""
    if isinstance(node, A.CommentNode):
        ctx.passthrough += 1
        return [T.blank() if not node.text else T.comment(node.text)]
    if isinstance(node, A.DirectiveNode):
        ctx.passthrough += 1
        return [T.TargetNode(T.DIRECTIVE, node.text)]
    if isinstance(node, A.SegmentDefNode):
        ctx.rewritten += 1
        seg = node.definition
        return [T.comment(f"{MARK} segment {seg.name} moved to module {seg.name}_mod")]
    if isinstance(node, A.PointerDeclNode):
        ctx.rewritten += 1
        return [
            T.declaration(f"type({seg}), pointer :: {ptr}") for ptr, seg in node.entries
        ]
    if isinstance(node, A.EsopeCommandNode):
        return _rewrite_command(node, ctx)
    if isinstance(node, A.ImplicitDeclNode):
        ctx.removed += 1
        return [_removed(node.original, "implicit typing replaced by implicit none")]
    if isinstance(node, A.ExternalDeclNode):
        return _rewrite_external(node, ctx)
    if isinstance(node, A.TypeDeclNode):
        return _rewrite_type_decl(node, ctx)
    if isinstance(node, A.CallNode):
        return _rewrite_call(node, ctx)
    if isinstance(node, A.AssignmentNode):
        return _rewrite_assignment(node, ctx)
    if isinstance(node, A.OpaqueNode):
        touched = _has_esope_tokens(node.tokens)
        if touched:
            ctx.rewritten += 1
        else:
            ctx.passthrough += 1
        text = render_tokens(node.tokens, ctx.resolve_field)
        return [_stmt(ctx, text, node.label)]
    if isinstance(node, A.IncludeNode):
        raise MigrationError("unresolved include reached the rewriter", node.span)
    raise MigrationError(f"unhandled statement node {type(node).__name__}", node.span)


def _has_esope_tokens(stream: Sequence[ExprToken]) -> bool:
    return any(isinstance(t, (DottedAccess, SlashDim)) for t in stream)


def _rewrite_command(node: A.EsopeCommandNode, ctx: RewriteContext) -> List[T.OutputNode]:
    seg = ctx.segment_of(node.target)
    if seg is None:
        raise MigrationError(
            f"{node.kind} target {node.target!r} is not a declared pointer", node.span
        )
    if node.kind in (A.SEGACT, A.SEGDES):
        ctx.removed += 1
        return [_removed(node.original, "activation is implicit in migrated code")]
    ctx.rewritten += 1
    if node.kind == A.SEGINI_COPY:
        text = f"call segcop({node.target}, {node.source})"
    elif node.kind == A.SEGACT_MOVE:
        text = f"call segmov({node.target}, {node.source})"
    elif node.kind in (A.SEGINI, A.SEGADJ):
        args = ", ".join([node.target] + seg.dimensioning_vars)
        text = f"call {node.kind}({args})"
    elif node.kind in (A.SEGSUP, A.SEGPRT):
        text = f"call {node.kind}({node.target})"
    else:
        raise MigrationError(f"unknown command kind {node.kind!r}", node.span)
    return [_stmt(ctx, text, node.label)]


def _rewrite_external(node: A.ExternalDeclNode, ctx: RewriteContext) -> List[T.OutputNode]:
    out: List[T.OutputNode] = []
    internal = [n for n in node.names if n in ctx.model.units]
    true_external = [n for n in node.names if n not in ctx.model.units]
    if internal:
        ctx.removed += 1
        out.append(_removed("external " + ", ".join(internal), "routine is module-resident"))
    for name in true_external:
        block = _interface_block(name, ctx)
        if block is None:
            ctx.removed += 1
            out.append(_removed(f"external {name}", "no call signature available"))
        else:
            ctx.rewritten += 1
            out.append(block)
    return out


def _interface_block(name: str, ctx: RewriteContext) -> Optional[T.TargetNode]:
    """Explicit interface for a routine outside the migrated project."""
    catalog = ctx.model.intent_catalog
    arity: Optional[int] = None
    if name in catalog:
        arity = len(catalog[name])
    else:
        counts = {e.arg_count for e in ctx.model.call_graph if e.callee == name}
        if len(counts) == 1:
            arity = counts.pop()
    if arity is None:
        return None
    node = T.TargetNode(T.INTERFACE, "interface", footer="end interface")
    args = [f"arg{i}" for i in range(1, arity + 1)]
    proc = T.TargetNode(
        T.PROCEDURE,
        f"subroutine {name}({', '.join(args)})",
        footer=f"end subroutine {name}",
    )
    for i, arg in enumerate(args):
        intent = analysis.INOUT
        if name in catalog and i < len(catalog[name]):
            intent = catalog[name][i]
        # dummy names are generated, so the default implicit rule types them
        proc.add(T.declaration(
            f"{analysis.default_implicit_type(arg)}, intent({intent}) :: {arg}"
        ))
    node.add(proc)
    return node


def _format_type(base: Optional[str], char_len) -> str:
    if base == "character":
        length = "*" if char_len == "*" else str(char_len if char_len is not None else 1)
        return f"character(len={length})"
    return base or ""


def _entity_text(ent: A.DeclEntity, ctx: RewriteContext) -> str:
    if not ent.dims:
        return ent.name
    dims = ", ".join(render_tokens(d, ctx.resolve_field) for d in ent.dims)
    return f"{ent.name}({dims})"


def _rewrite_type_decl(node: A.TypeDeclNode, ctx: RewriteContext) -> List[T.OutputNode]:
    unit = ctx.unit
    base = node.base_type  # None for a `dimension` statement
    out: List[T.OutputNode] = []
    plain: List[Tuple[str, A.DeclEntity]] = []
    ctx.rewritten += 1
    table = analysis.implicit_rule_table(unit)
    for ent in node.entities:
        type_text = _format_type(base, node.char_len) or table[ent.name[0]]
        if ent.name in ctx.pointer_map:
            out.append(_removed(
                f"{type_text} {ent.name}", "superseded by pointer declaration"))
            continue
        if ent.name in unit.params:
            pos = unit.params.index(ent.name)
            intent = ctx.intents.get((unit.name, pos), analysis.INOUT)
            out.append(T.declaration(
                f"{type_text}, intent({intent}) :: {_entity_text(ent, ctx)}"))
            continue
        if (
            ctx.classification.get(ent.name) == analysis.RETURN_TYPE_DECL
            and ent.name in ctx.model.functions()
        ):
            out.append(_removed(
                f"{type_text} {ent.name}", f"type provided by use of {ent.name}_mod"))
            continue
        plain.append((type_text, ent))
    by_type: Dict[str, List[A.DeclEntity]] = {}
    order: List[str] = []
    for type_text, ent in plain:
        if type_text not in by_type:
            by_type[type_text] = []
            order.append(type_text)
        by_type[type_text].append(ent)
    for type_text in order:
        names = ", ".join(_entity_text(e, ctx) for e in by_type[type_text])
        out.append(T.declaration(f"{type_text} :: {names}"))
    return out


def _guard_prefix(guard: Optional[List[ExprToken]], ctx: RewriteContext) -> str:
    if not guard:
        return ""
    return f"if ({render_tokens(guard, ctx.resolve_field)}) "


def _rewrite_call(node: A.CallNode, ctx: RewriteContext) -> List[T.OutputNode]:
    if _call_has_esope(node):
        ctx.rewritten += 1
    else:
        ctx.passthrough += 1
    args = ", ".join(render_tokens(a, ctx.resolve_field) for a in node.args)
    text = f"{_guard_prefix(node.guard, ctx)}call {node.callee}({args})"
    if not node.args:
        text = f"{_guard_prefix(node.guard, ctx)}call {node.callee}()"
    return [_stmt(ctx, text, node.label)]


def _call_has_esope(node: A.CallNode) -> bool:
    for arg in node.args:
        if _has_esope_tokens(arg):
            return True
    return bool(node.guard and _has_esope_tokens(node.guard))


def _rewrite_assignment(node: A.AssignmentNode, ctx: RewriteContext) -> List[T.OutputNode]:
    streams = [node.lhs, node.rhs] + ([node.guard] if node.guard else [])
    if any(_has_esope_tokens(s) for s in streams):
        ctx.rewritten += 1
    else:
        ctx.passthrough += 1
    lhs = render_tokens(node.lhs, ctx.resolve_field)
    rhs = render_tokens(node.rhs, ctx.resolve_field)
    text = f"{_guard_prefix(node.guard, ctx)}{lhs} = {rhs}"
    return [_stmt(ctx, text, node.label)]


# --- module wrapping --------------------------------------------------------

#: opaque statements that still belong to the declaration part
_DECL_KEYWORDS = {
    "data", "save", "parameter", "common", "equivalence", "intrinsic", "format",
}


def _is_executable(node: A.Node) -> bool:
    if isinstance(node, (A.AssignmentNode, A.CallNode, A.EsopeCommandNode)):
        return True
    if isinstance(node, A.OpaqueNode):
        head = node.tokens[0] if node.tokens else None
        if isinstance(head, Token) and head.value in _DECL_KEYWORDS:
            return False
        return True
    return False


def _inferred_declarations(ctx: RewriteContext) -> List[T.OutputNode]:
    unit = ctx.unit
    declared = analysis.declared_types(unit)
    assignments = analysis.infer_implicit_types(unit, ctx.model)
    todo = [
        a for a in assignments
        if a.origin == analysis.IMPLICIT_RULE and a.symbol not in declared
    ]
    out: List[T.OutputNode] = []
    if todo:
        out.append(T.comment(f"{MARK} declarations inferred from implicit typing"))
        for a in sorted(todo, key=lambda a: a.symbol):
            if a.symbol in unit.params:
                pos = unit.params.index(a.symbol)
                intent = ctx.intents.get((unit.name, pos), analysis.INOUT)
                out.append(T.declaration(f"{a.inferred_type}, intent({intent}) :: {a.symbol}"))
            else:
                out.append(T.declaration(f"{a.inferred_type} :: {a.symbol}"))
    return out


def _default_pointer_decls(ctx: RewriteContext) -> List[T.OutputNode]:
    """Pointers named after a segment exist without any POINTEUR line."""
    used: List[str] = []
    scope_names = {s.name for s in ctx.scope}
    for node in ctx.unit.body:
        for name in _default_pointer_uses(node, scope_names, ctx):
            if name not in used:
                used.append(name)
    return [T.declaration(f"type({n}), pointer :: {n}") for n in sorted(used)]


def _default_pointer_uses(node: A.Node, scope_names: Set[str], ctx: RewriteContext):
    if isinstance(node, A.EsopeCommandNode):
        for name in (node.target, node.source):
            if name in scope_names and name not in ctx.pointer_map:
                yield name
        return
    streams: List[Sequence[ExprToken]] = []
    if isinstance(node, A.AssignmentNode):
        streams = [node.lhs, node.rhs] + ([node.guard] if node.guard else [])
    elif isinstance(node, A.CallNode):
        streams = list(node.args) + ([node.guard] if node.guard else [])
    elif isinstance(node, A.OpaqueNode):
        streams = [node.tokens]
    for stream in streams:
        for name in _dotted_pointers(stream):
            if name in scope_names and name not in ctx.pointer_map:
                yield name


def _dotted_pointers(stream: Sequence[ExprToken]):
    for t in stream:
        if isinstance(t, DottedAccess):
            if t.pointer:
                yield t.pointer
            for sub in t.subscripts:
                yield from _dotted_pointers(sub)
        elif isinstance(t, SlashDim):
            yield from _dotted_pointers([t.base])


def compute_unit_uses(ctx: RewriteContext) -> List[str]:
    """Module imports of one migrated unit, alphabetically."""
    model = ctx.model
    unit = ctx.unit
    module_of: Dict[str, str] = {}
    for name in model.units:
        if name != unit.name and model.units[name].kind != "program":
            module_of[name] = f"{name}_mod"
    for seg in model.segments.values():
        module_of[seg.name] = f"{seg.name}_mod"
        for f in seg.fields:
            module_of.setdefault(f.name, f"{seg.name}_mod")

    required = set(model.units[unit.name].referenced)
    defined = set(model.units[unit.name].defined)
    # implicitly typed locals get a generated declaration, so they count;
    # module functions do not, their type comes with the use
    defined |= {
        a.symbol
        for a in analysis.infer_implicit_types(unit, model)
        if a.origin != analysis.FUNCTION_RETURN
    }
    # segment names and fields resolve through use, not local definitions
    for seg in ctx.scope:
        defined.discard(seg.name)
        defined -= seg.field_names()

    external_ok = set(model.intent_catalog)
    for node in unit.body:
        if isinstance(node, A.ExternalDeclNode):
            # project-internal routines resolve through use, not interfaces
            external_ok |= {n for n in node.names if n not in model.units}
            defined -= {n for n in node.names if n in model.units}
    for edge in model.calls_from(unit.name):
        if edge.external:
            external_ok.add(edge.callee)

    uses = set(analysis.compute_uses(required, defined, module_of, external_ok))
    for seg_name in ctx.pointer_map.values():
        uses.add(f"{seg_name}_mod")
    for seg in ctx.scope:
        if _segment_is_used(seg, ctx):
            uses.add(f"{seg.name}_mod")
    return sorted(uses)


def _segment_is_used(seg: SegmentDefinition, ctx: RewriteContext) -> bool:
    if seg.name in ctx.pointer_map.values():
        return True
    referenced = ctx.model.units[ctx.unit.name].referenced
    return seg.name in referenced or bool(seg.field_names() & referenced)


def wrap_in_module(ctx: RewriteContext) -> T.TargetNode:
    """Rewrite the whole unit and wrap it in a module (or program)."""
    unit = ctx.unit
    uses = compute_unit_uses(ctx)

    body: List[T.OutputNode] = []
    inserted_decls = False
    for node in unit.body:
        if not inserted_decls and _is_executable(node):
            body.extend(_inferred_declarations(ctx))
            body.extend(_default_pointer_decls(ctx))
            inserted_decls = True
        body.extend(rewrite_statement(node, ctx))
    if not inserted_decls:
        body.extend(_inferred_declarations(ctx))
        body.extend(_default_pointer_decls(ctx))

    if unit.kind == "program":
        top = T.program_node(unit.name)
        for mod in uses:
            top.add(T.use(mod))
        top.add(T.statement("implicit none"))
        top.add(*body)
        return top

    params = ", ".join(unit.params)
    if unit.kind == "function":
        header = f"function {unit.name}({params})"
        footer = f"end function {unit.name}"
    else:
        header = f"subroutine {unit.name}({params})"
        footer = f"end subroutine {unit.name}"
    proc = T.TargetNode(T.PROCEDURE, header, footer=footer)
    if unit.kind == "function" and unit.return_type:
        declared = analysis.declared_types(unit)
        if not declared.get(unit.name):
            proc.add(T.declaration(f"{unit.return_type} :: {unit.name}"))
    proc.add(*body)

    mod = T.module_node(f"{unit.name}_mod")
    for m in uses:
        mod.add(T.use(m))
    mod.add(T.statement("implicit none"))
    mod.add(T.statement("private"))
    mod.add(T.statement(f"public :: {unit.name}"))
    mod.add(T.TargetNode(T.CONTAINS))
    mod.add(proc)
    return mod
