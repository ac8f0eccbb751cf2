"""Frontend: fixed-form lexing, island parsing, include resolution."""

from . import ast_nodes
from .includes import Fragment, FragmentCache, build_fragment_cache, resolve_includes
from .lexer import (
    IncludeDirective,
    LogicalLine,
    detect_include,
    scan_expression,
    split_logical_lines,
    tokenize,
)
from .parser import parse_fragment, parse_segment_definition, parse_source, parse_unit, parse_units

__all__ = [
    "ast_nodes",
    "Fragment",
    "FragmentCache",
    "IncludeDirective",
    "LogicalLine",
    "build_fragment_cache",
    "detect_include",
    "parse_fragment",
    "parse_segment_definition",
    "parse_source",
    "parse_unit",
    "parse_units",
    "resolve_includes",
    "scan_expression",
    "split_logical_lines",
    "tokenize",
]
