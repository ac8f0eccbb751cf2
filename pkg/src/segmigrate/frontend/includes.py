"""Include resolution: the four include syntaxes are flattened in-place,
between traceability marker comments."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

from ..errors import MigrationError
from ..model import SegmentDefinition
from . import ast_nodes as A
from .lexer import split_logical_lines
from .parser import parse_fragment

BEGIN_MARK = '[seg-migrate] begin include "{path}"'
END_MARK = '[seg-migrate] end include "{path}"'


@dataclass
class Fragment:
    """A migrated included file: segment definitions pulled out, comments
    dropped, nested includes already flattened."""

    path: str
    resolved: Path
    statements: List[A.Node] = field(default_factory=list)
    segments: List[SegmentDefinition] = field(default_factory=list)
    includes: List[str] = field(default_factory=list)  # nested include paths


FragmentCache = Dict[str, Fragment]


def find_include_file(path: str, search_paths: Sequence[Path]) -> Path:
    tried = []
    for base in search_paths:
        candidate = Path(base) / path
        tried.append(str(candidate))
        if candidate.is_file():
            return candidate
    raise MigrationError(
        f"include file {path!r} not found; tried: " + ", ".join(tried)
    )


def build_fragment_cache(
    include_paths: Sequence[str],
    search_paths: Sequence[Path],
    encoding: str = "utf-8",
) -> FragmentCache:
    """Sequential prepass: load and flatten every included file first.

    Nested includes are resolved recursively; a cycle is a fatal error.
    """
    cache: FragmentCache = {}
    for path in include_paths:
        _load_fragment(path, search_paths, encoding, cache, stack=[])
    return cache


def _load_fragment(path, search_paths, encoding, cache, stack) -> Fragment:
    if path in cache:
        return cache[path]
    if path in stack:
        cycle = " -> ".join(stack + [path])
        raise MigrationError(f"include cycle: {cycle}")
    resolved = find_include_file(path, search_paths)
    lines = split_logical_lines(resolved.read_text(encoding=encoding), str(resolved))
    raw = parse_fragment(lines, str(resolved))

    frag = Fragment(path=path, resolved=resolved)
    for node in raw.body:
        if isinstance(node, A.CommentNode):
            continue  # comments in included files are not copied
        if isinstance(node, A.SegmentDefNode):
            frag.segments.append(node.definition)
            continue
        if isinstance(node, A.IncludeNode):
            nested = _load_fragment(
                node.directive.path, search_paths, encoding, cache, stack + [path]
            )
            frag.includes.append(nested.path)
            frag.statements.append(
                A.CommentNode(span=node.span, text=BEGIN_MARK.format(path=nested.path))
            )
            frag.statements.extend(copy.deepcopy(nested.statements))
            frag.statements.append(
                A.CommentNode(span=node.span, text=END_MARK.format(path=nested.path))
            )
            frag.segments.extend(nested.segments)
            continue
        frag.statements.append(node)
    cache[path] = frag
    return frag


def resolve_includes(
    unit: A.ProgramUnitAst,
    search_paths: Sequence[Path],
    cache: FragmentCache,
) -> A.ProgramUnitAst:
    """Replace every include directive of ``unit`` by marker comments
    enclosing the fragment's statements.  Returns a new AST; the input is
    left untouched."""
    out = copy.deepcopy(unit)
    body: List[A.Node] = []
    for node in out.body:
        if not isinstance(node, A.IncludeNode):
            body.append(node)
            continue
        path = node.directive.path
        if path not in cache:
            # tolerate a cache miss by loading on demand (still cycle-safe)
            _load_fragment(path, search_paths, "utf-8", cache, stack=[])
        frag = cache[path]
        body.append(A.CommentNode(span=node.span, text=BEGIN_MARK.format(path=path)))
        body.extend(copy.deepcopy(frag.statements))
        body.append(A.CommentNode(span=node.span, text=END_MARK.format(path=path)))
        for seg in frag.segments:
            if seg.name not in out.extra_segments_in_scope:
                out.extra_segments_in_scope.append(seg.name)
    out.body = body
    return out
