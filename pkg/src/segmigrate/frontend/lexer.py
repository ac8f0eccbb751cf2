"""Fixed-form lexing: card splitting, tokenization, island folding.

Column rules: 1-5 statement label, 6 continuation marker, 7-72 statement
body, 73+ sequence numbers (ignored).  Tabs expand to 8-column stops
before the rules apply.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from ..errors import MigrationError, SourceSpan

STATEMENT = "statement"
COMMENT = "comment"
DIRECTIVE = "directive"

# The four include flavors found in the legacy code base.
FLAVOR_HASH = "preprocessor-hash"
FLAVOR_FORTRAN = "fortran-include"
FLAVOR_PERCENT = "esope-percent-inc"
FLAVOR_DASH = "esope-dash-inc"

_HASH_INCLUDE_RE = re.compile(r'^\s*#\s*include\s+["<]([^">]+)[">]\s*$', re.IGNORECASE)
_FORTRAN_INCLUDE_RE = re.compile(r"^include\s+['\"]([^'\"]+)['\"]\s*$", re.IGNORECASE)
_ESOPE_INCLUDE_RE = re.compile(r"^[%-]inc\s+['\"]?([^'\"\s]+)['\"]?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class LogicalLine:
    """One statement (continuations merged), comment, or directive."""

    kind: str
    text: str
    span: SourceSpan
    label: Optional[int] = None


@dataclass(frozen=True)
class IncludeDirective:
    flavor: str
    path: str
    span: SourceSpan


def expand_tabs(line: str) -> str:
    return line.expandtabs(8)


def split_logical_lines(source: str, file_id: str = "<input>") -> List[LogicalLine]:
    """Split a whole fixed-form file into logical lines.

    Comments (including blank lines, kept with empty text) and preprocessor
    directives stay as distinct lines in original order; continuation cards
    are merged into the statement they continue.
    """
    out: List[LogicalLine] = []
    pending: Optional[dict] = None  # statement being assembled

    def flush():
        nonlocal pending
        if pending is not None:
            out.append(
                LogicalLine(
                    kind=STATEMENT,
                    text=pending["text"].rstrip(),
                    span=SourceSpan(file_id, pending["start"], 1, pending["end"], 72),
                    label=pending["label"],
                )
            )
            pending = None

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = expand_tabs(raw)
        span = SourceSpan(file_id, lineno, 1, lineno, max(1, len(line.rstrip())))
        first = line[0] if line else ""

        if not line.strip():
            flush()
            out.append(LogicalLine(COMMENT, "", span))
            continue
        if first in ("C", "c", "*", "!"):
            flush()
            out.append(LogicalLine(COMMENT, line[1:].rstrip(), span))
            continue
        if first == "#":
            flush()
            out.append(LogicalLine(DIRECTIVE, line.rstrip(), span))
            continue

        label_field = line[0:5]
        cont_field = line[5:6]
        body = line[6:72]

        if cont_field.strip() and cont_field != "0":
            if pending is None:
                raise MigrationError("continuation card with no preceding statement", span)
            pending["text"] += body.rstrip()
            pending["end"] = lineno
            continue

        flush()
        label: Optional[int] = None
        if label_field.strip():
            try:
                label = int(label_field.strip())
            except ValueError:
                raise MigrationError(f"bad statement label {label_field.strip()!r}", span)
        pending = {"text": body.rstrip(), "label": label, "start": lineno, "end": lineno}

    flush()
    return out


def detect_include(line: LogicalLine) -> Optional[IncludeDirective]:
    """Recognize any of the four include syntaxes on one logical line."""
    if line.kind == DIRECTIVE:
        m = _HASH_INCLUDE_RE.match(line.text)
        if m:
            return IncludeDirective(FLAVOR_HASH, m.group(1), line.span)
        return None
    if line.kind != STATEMENT:
        return None
    text = line.text.strip()
    m = _FORTRAN_INCLUDE_RE.match(text)
    if m:
        return IncludeDirective(FLAVOR_FORTRAN, m.group(1), line.span)
    m = _ESOPE_INCLUDE_RE.match(text)
    if m:
        flavor = FLAVOR_PERCENT if text.startswith("%") else FLAVOR_DASH
        return IncludeDirective(flavor, m.group(1), line.span)
    return None


# --- statement tokenization -------------------------------------------------

NAME = "name"
INT = "int"
REAL = "real"
STRING = "string"
OP = "op"
PUNCT = "punct"

_LOGICAL_WORDS = {
    "eq", "ne", "lt", "le", "gt", "ge",
    "and", "or", "not", "eqv", "neqv", "xor",
    "true", "false",
}

_NAME_RE = re.compile(r"[a-z_][a-z0-9_]*", re.IGNORECASE)
_DOTWORD_RE = re.compile(r"\.([a-z]+)\.", re.IGNORECASE)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str


@dataclass(frozen=True)
class DottedAccess:
    """Esope field access ``p.f`` or ``p.f(i, j)``; pointer None means the
    default-pointer shorthand resolved later by the rewriter."""

    pointer: Optional[str]
    field: str
    subscripts: Tuple[Tuple["ExprToken", ...], ...] = ()


@dataclass(frozen=True)
class SlashDim:
    """Esope array-extent query ``a(/k)`` / ``p.f(/k)``."""

    base: Union[Token, DottedAccess]
    dim: int


ExprToken = Union[Token, DottedAccess, SlashDim]


def tokenize(text: str, span: Optional[SourceSpan] = None) -> List[Token]:
    """Tokenize one statement body.  Identifiers are lowercased; string
    literals keep their quotes and case."""
    toks: List[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "'" or c == '"':
            j = i + 1
            quote = c
            while j < n:
                if text[j] == quote:
                    if j + 1 < n and text[j + 1] == quote:  # doubled quote escape
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise MigrationError("unterminated string literal", span)
            toks.append(Token(STRING, text[i : j + 1]))
            i = j + 1
            continue
        m = _NAME_RE.match(text, i)
        if m:
            toks.append(Token(NAME, m.group(0).lower()))
            i = m.end()
            continue
        if c.isdigit():
            i = _scan_number(text, i, toks)
            continue
        if c == ".":
            m = _DOTWORD_RE.match(text, i)
            if m and m.group(1).lower() in _LOGICAL_WORDS:
                toks.append(Token(OP, m.group(0).lower()))
                i = m.end()
                continue
            if i + 1 < n and text[i + 1].isdigit() and not _prev_is_value(toks):
                i = _scan_number(text, i, toks)
                continue
            toks.append(Token(PUNCT, "."))
            i += 1
            continue
        if text.startswith("**", i) or text.startswith("//", i) or text.startswith("=>", i):
            toks.append(Token(OP, text[i : i + 2]))
            i += 2
            continue
        if c in "+-*/=":
            toks.append(Token(OP, c))
            i += 1
            continue
        if c in "(),:%$":
            toks.append(Token(PUNCT, c))
            i += 1
            continue
        raise MigrationError(f"unexpected character {c!r} in statement", span)
    return toks


def _prev_is_value(toks: List[Token]) -> bool:
    if not toks:
        return False
    t = toks[-1]
    return t.kind in (NAME, INT, REAL) or (t.kind == PUNCT and t.value == ")")


def _scan_number(text: str, i: int, toks: List[Token]) -> int:
    n = len(text)
    j = i
    while j < n and text[j].isdigit():
        j += 1
    is_real = False
    if j < n and text[j] == ".":
        # do not swallow the dot of `1.eq.2`
        m = _DOTWORD_RE.match(text, j)
        if not (m and m.group(1).lower() in _LOGICAL_WORDS):
            is_real = True
            j += 1
            while j < n and text[j].isdigit():
                j += 1
    if j < n and text[j] in "eEdD":
        k = j + 1
        if k < n and text[k] in "+-":
            k += 1
        if k < n and text[k].isdigit():
            is_real = True
            j = k
            while j < n and text[j].isdigit():
                j += 1
    value = text[i:j].lower()
    toks.append(Token(REAL if is_real else INT, value))
    return j


# --- island folding ---------------------------------------------------------


def scan_expression(tokens: Sequence[Token], span: Optional[SourceSpan] = None) -> List[ExprToken]:
    """Fold dotted accesses and slash-dims into structured tokens; every
    other token passes through unchanged."""
    out: List[ExprToken] = []
    i = 0
    toks = list(tokens)
    n = len(toks)
    while i < n:
        t = toks[i]
        if isinstance(t, Token) and t.kind == NAME:
            if (
                i + 2 < n
                and isinstance(toks[i + 1], Token)
                and toks[i + 1] == Token(PUNCT, ".")
                and isinstance(toks[i + 2], Token)
                and toks[i + 2].kind == NAME
            ):
                access = DottedAccess(t.value, toks[i + 2].value)
                i += 3
                access, i = _fold_paren_suffix(access, toks, i, span)
                out.append(access)
                continue
            slash = _try_plain_slash(t, toks, i, span)
            if slash is not None:
                out.append(slash[0])
                i = slash[1]
                continue
        out.append(t)
        i += 1
    return out


def _try_plain_slash(t: Token, toks: List[Token], i: int, span):
    # name ( / k )
    if (
        i + 4 < len(toks) + 1
        and i + 3 < len(toks)
        and toks[i + 1] == Token(PUNCT, "(")
        and toks[i + 2] == Token(OP, "/")
    ):
        if not (isinstance(toks[i + 3], Token) and toks[i + 3].kind == INT):
            raise MigrationError("slash-dim index must be an integer literal", span)
        if i + 4 >= len(toks) or toks[i + 4] != Token(PUNCT, ")"):
            raise MigrationError("malformed slash-dim", span)
        return SlashDim(t, int(toks[i + 3].value)), i + 5
    return None


def _fold_paren_suffix(access: DottedAccess, toks: List[Token], i: int, span):
    """Attach a subscript list or a slash-dim following a dotted access."""
    n = len(toks)
    if i >= n or toks[i] != Token(PUNCT, "("):
        return access, i
    if i + 1 < n and toks[i + 1] == Token(OP, "/"):
        if not (i + 2 < n and isinstance(toks[i + 2], Token) and toks[i + 2].kind == INT):
            raise MigrationError("slash-dim index must be an integer literal", span)
        if i + 3 >= n or toks[i + 3] != Token(PUNCT, ")"):
            raise MigrationError("malformed slash-dim", span)
        return SlashDim(access, int(toks[i + 2].value)), i + 4
    inner, j = _collect_group(toks, i, span)
    subs = tuple(tuple(scan_expression(part, span)) for part in _split_top_commas(inner))
    return DottedAccess(access.pointer, access.field, subs), j


def _collect_group(toks: List[Token], i: int, span) -> Tuple[List[Token], int]:
    """Return tokens inside the balanced paren group opening at ``i``."""
    depth = 0
    inner: List[Token] = []
    j = i
    while j < len(toks):
        t = toks[j]
        if t == Token(PUNCT, "("):
            depth += 1
            if depth > 1:
                inner.append(t)
        elif t == Token(PUNCT, ")"):
            depth -= 1
            if depth == 0:
                return inner, j + 1
            inner.append(t)
        else:
            inner.append(t)
        j += 1
    raise MigrationError("unbalanced parentheses", span)


def _split_top_commas(toks: List[Token]) -> List[List[Token]]:
    parts: List[List[Token]] = [[]]
    depth = 0
    for t in toks:
        if t == Token(PUNCT, "("):
            depth += 1
        elif t == Token(PUNCT, ")"):
            depth -= 1
        if depth == 0 and t == Token(PUNCT, ","):
            parts.append([])
        else:
            parts[-1].append(t)
    if parts == [[]]:
        return []
    return parts
