"""Two-level code representation: project-wide dependency model plus the
per-unit ASTs it links to.

The dependency model (units, segments, call edges, include edges) is small
enough to stay resident for a whole run; unit ASTs are transient and may be
dropped once their unit has been migrated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import MigrationError
from .frontend.lexer import ExprToken, Token, NAME


@dataclass(frozen=True)
class FieldDef:
    """One field of a segment."""

    name: str
    base_type: str  # integer | real | double precision | logical | character | pointer
    char_len: Optional[object] = None  # int or "*" for character fields
    dims: Tuple[Tuple[ExprToken, ...], ...] = ()
    segment: Optional[str] = None  # target segment for pointer fields
    is_dynamic: bool = False

    @property
    def is_array(self) -> bool:
        return bool(self.dims)


@dataclass
class SegmentDefinition:
    """A segment: name, ordered fields, and the variables that size them."""

    name: str
    fields: List[FieldDef]
    dimensioning_vars: List[str]  # first-encounter order
    file_id: str = "<unknown>"
    # comments found inside the SEGMENT block; they move to the segment module
    comments: List[str] = field(default_factory=list)

    @property
    def default_pointer(self) -> str:
        # Esope implicitly declares a pointer named after the segment.
        return self.name

    def field_names(self) -> Set[str]:
        return {f.name for f in self.fields}

    def dynamic_fields(self) -> List[FieldDef]:
        return [f for f in self.fields if f.is_dynamic]


@dataclass
class UnitSummary:
    name: str
    kind: str  # program | subroutine | function
    parameters: List[str]
    file_id: str
    return_type: Optional[str] = None
    referenced: Set[str] = field(default_factory=set)
    defined: Set[str] = field(default_factory=set)
    esope_statements: List[str] = field(default_factory=list)  # command kinds, in order
    segments_in_scope: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    arg_count: int
    external: bool = False


@dataclass
class ProjectModel:
    units: Dict[str, UnitSummary] = field(default_factory=dict)
    segments: Dict[str, SegmentDefinition] = field(default_factory=dict)
    call_graph: List[CallEdge] = field(default_factory=list)
    include_graph: List[Tuple[str, str]] = field(default_factory=list)
    intent_catalog: Dict[str, List[str]] = field(default_factory=dict)

    def functions(self) -> Dict[str, UnitSummary]:
        return {n: u for n, u in self.units.items() if u.kind == "function"}

    def calls_from(self, caller: str) -> List[CallEdge]:
        return [e for e in self.call_graph if e.caller == caller]


def build_project_model(units: Sequence[object]) -> ProjectModel:
    """Collect every unit, segment, call edge and include edge of a project.

    ``units`` are parsed :class:`ProgramUnitAst` objects (included fragments
    already registered as fragments, not passed here).  Symbols referenced
    but nowhere defined are flagged external on their call edges.
    """
    from .frontend import ast_nodes as A

    model = ProjectModel()
    for unit in units:
        if unit.name in model.units:
            raise MigrationError(f"unit {unit.name!r} defined twice", unit.span)
        summary = UnitSummary(
            name=unit.name,
            kind=unit.kind,
            parameters=list(unit.params),
            file_id=unit.file_id,
            return_type=unit.return_type,
        )
        model.units[unit.name] = summary
        for seg in A.segment_definitions(unit):
            register_segment(model, seg)
            summary.segments_in_scope.append(seg.name)
        for name in unit.extra_segments_in_scope:
            if name not in summary.segments_in_scope:
                summary.segments_in_scope.append(name)
        summary.referenced = A.referenced_symbols(unit)
        summary.defined = A.defined_symbols(unit)
        summary.esope_statements = [
            node.kind for node in A.walk_statements(unit) if isinstance(node, A.EsopeCommandNode)
        ]

    for unit in units:
        for callee, argc in _call_sites(unit):
            external = callee not in model.units
            model.units[unit.name].referenced.add(callee)
            model.call_graph.append(CallEdge(unit.name, callee, argc, external))

    return model


def register_segment(model: ProjectModel, seg: SegmentDefinition) -> None:
    if seg.name in model.segments:
        raise MigrationError(f"segment {seg.name!r} defined twice")
    model.segments[seg.name] = seg


def _call_sites(unit) -> List[Tuple[str, int]]:
    from .frontend import ast_nodes as A

    sites = []
    for node in A.walk_statements(unit):
        if isinstance(node, A.CallNode):
            sites.append((node.callee, len(node.args)))
    return sites


def segment_for_field(
    model: ProjectModel, field_name: str, unit_scope: Sequence[str]
) -> Optional[SegmentDefinition]:
    """Find the unique in-scope segment owning ``field_name``.

    Two in-scope owners make the default-pointer rewrite unsound, so that
    case is a hard error rather than a pick-one.
    """
    owners = [
        model.segments[s]
        for s in unit_scope
        if s in model.segments and field_name in model.segments[s].field_names()
    ]
    if not owners:
        return None
    if len(owners) > 1:
        names = ", ".join(sorted(o.name for o in owners))
        raise MigrationError(
            f"field {field_name!r} is owned by several in-scope segments: {names}"
        )
    return owners[0]


def dump_model(model: ProjectModel) -> str:
    """Line-oriented debug report: one entity per line (kind, name, file)."""
    lines = []
    for name in sorted(model.units):
        u = model.units[name]
        lines.append(f"unit\t{u.kind}\t{name}\t{u.file_id}")
    for name in sorted(model.segments):
        lines.append(f"segment\t{name}\t{model.segments[name].file_id}")
    for e in sorted(model.call_graph, key=lambda e: (e.caller, e.callee)):
        flag = "external" if e.external else "internal"
        lines.append(f"call\t{e.caller}\t{e.callee}\t{e.arg_count}\t{flag}")
    for inc in sorted(model.include_graph):
        lines.append(f"include\t{inc[0]}\t{inc[1]}")
    return "\n".join(lines) + ("\n" if lines else "")
