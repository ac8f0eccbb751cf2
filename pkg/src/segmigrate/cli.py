"""Command line driver: migrate, check, dump-model."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import analysis
from .emit import RenderConfig, write_tree
from .errors import ConfigError, MigrationError
from .frontend import ast_nodes as A
from .frontend.includes import build_fragment_cache, resolve_includes
from .frontend.lexer import split_logical_lines
from .frontend.parser import parse_units
from .model import ProjectModel, build_project_model, dump_model, register_segment
from .transform import migrate_project, negative_pointer_uses

#: files parsed as program units
UNIT_EXTENSIONS = (".f", ".F", ".eso")
#: additionally listed by `check`, but only reachable through includes
INCLUDE_EXTENSIONS = (".inc", ".seg")


@dataclass(frozen=True)
class RunConfig:
    src: Optional[Path] = None
    out: Optional[Path] = None
    include_paths: Tuple[Path, ...] = ()
    intent_catalog: Optional[Path] = None
    indent_width: int = 2
    max_line_length: int = 132
    keyword_case: str = "lower"
    verbose: bool = False

    def validated_for_migrate(self) -> "RunConfig":
        if self.src is None or self.out is None:
            raise ConfigError("migrate needs both --src and --out")
        if self.src.resolve() == self.out.resolve():
            raise ConfigError("output directory must differ from the source directory")
        if not self.src.is_dir():
            raise ConfigError(f"source directory not found: {self.src}")
        return self

    def render_config(self) -> RenderConfig:
        try:
            return RenderConfig(
                indent_width=self.indent_width,
                max_line_length=self.max_line_length,
                keyword_case=self.keyword_case,
            )
        except MigrationError as exc:
            raise ConfigError(str(exc))


_CONFIG_KEYS = {
    "src", "out", "include_path", "intent_catalog",
    "indent_width", "max_line_length", "keyword_case", "verbose",
}


def parse_config_file(text: str, base: Path) -> Dict[str, object]:
    """key = value lines, `#` comments; paths are relative to the file."""
    values: Dict[str, object] = {}
    include_paths: List[Path] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in ("src", "out", "intent_catalog"):
            values[key] = base / value
        elif key == "include_path":
            include_paths.append(base / value)
        elif key in ("indent_width", "max_line_length"):
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"config line {lineno}: {key} must be an integer")
        elif key == "verbose":
            values[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            values[key] = value
    if include_paths:
        values["include_paths"] = tuple(include_paths)
    return values


def load_config(args: argparse.Namespace) -> RunConfig:
    """Flags win over config file values, which win over the defaults."""
    cfg = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = replace(cfg, **parse_config_file(path.read_text(), path.parent))
    updates: Dict[str, object] = {}
    if args.src:
        updates["src"] = Path(args.src)
    if args.out:
        updates["out"] = Path(args.out)
    if args.include_path:
        updates["include_paths"] = cfg.include_paths + tuple(
            Path(p) for p in args.include_path
        )
    if args.intent_catalog:
        updates["intent_catalog"] = Path(args.intent_catalog)
    if args.verbose:
        updates["verbose"] = True
    return replace(cfg, **updates)


# --- pipeline ---------------------------------------------------------------


def discover_sources(src: Path) -> List[Path]:
    out = [p for p in sorted(src.rglob("*")) if p.is_file() and p.suffix in UNIT_EXTENSIONS]
    return out


def load_units(cfg: RunConfig) -> Tuple[List[A.ProgramUnitAst], ProjectModel]:
    """Parse, resolve includes, and build the project model."""
    sources = discover_sources(cfg.src)
    if not sources:
        raise MigrationError(f"no source files under {cfg.src}")

    raw_units: List[A.ProgramUnitAst] = []
    include_paths: List[str] = []
    for path in sources:
        lines = split_logical_lines(path.read_text(), str(path))
        for unit in parse_units(lines, str(path)):
            raw_units.append(unit)
            for node in unit.body:
                if isinstance(node, A.IncludeNode) and node.directive.path not in include_paths:
                    include_paths.append(node.directive.path)

    search_paths = [cfg.src] + list(cfg.include_paths)
    cache = build_fragment_cache(include_paths, search_paths)
    units = [resolve_includes(u, search_paths, cache) for u in raw_units]

    model = build_project_model(units)
    for path in sorted(cache):
        for seg in cache[path].segments:
            existing = model.segments.get(seg.name)
            if existing is None:
                register_segment(model, seg)
            elif existing is not seg and existing.file_id != seg.file_id:
                raise MigrationError(
                    f"segment {seg.name!r} defined in both "
                    f"{existing.file_id} and {seg.file_id}"
                )
    for raw in raw_units:
        for node in raw.body:
            if isinstance(node, A.IncludeNode):
                model.include_graph.append((raw.name, node.directive.path))
    for frag in cache.values():
        for nested in frag.includes:
            model.include_graph.append((frag.path, nested))

    if cfg.intent_catalog:
        if not cfg.intent_catalog.is_file():
            raise ConfigError(f"intent catalog not found: {cfg.intent_catalog}")
        model.intent_catalog = analysis.load_intent_catalog(cfg.intent_catalog.read_text())
    return units, model


def cmd_migrate(cfg: RunConfig) -> int:
    cfg = cfg.validated_for_migrate()
    render_cfg = cfg.render_config()
    units, model = load_units(cfg)
    intents = analysis.infer_intents(model, units)
    result = migrate_project(units, model, intents, render_cfg)
    if not result.ok:
        sys.stderr.write(result.format_report())
        return 1
    report = write_tree(result.outputs, cfg.out)
    if cfg.verbose:
        sys.stdout.write(result.format_report())
    sys.stdout.write(report.format())
    return 0 if report.ok else 1


def cmd_check(cfg: RunConfig) -> int:
    """Census of the project; writes nothing."""
    if cfg.src is None:
        raise ConfigError("check needs --src")
    if not cfg.src.is_dir():
        raise ConfigError(f"source directory not found: {cfg.src}")
    units, model = load_units(cfg)

    kinds: Dict[str, int] = {}
    for u in model.units.values():
        kinds[u.kind] = kinds.get(u.kind, 0) + 1
    commands: Dict[str, int] = {}
    for u in model.units.values():
        for kind in u.esope_statements:
            commands[kind] = commands.get(kind, 0) + 1

    lines = []
    for kind in sorted(kinds):
        lines.append(f"units[{kind}]: {kinds[kind]}")
    lines.append(f"segments: {len(model.segments)}")
    for kind in sorted(commands):
        lines.append(f"commands[{kind}]: {commands[kind]}")
    lines.append(f"includes: {len(model.include_graph)}")

    warning_count = 0
    for unit in units:
        for w in negative_pointer_uses(unit, model):
            lines.append(f"warning: {w}")
            warning_count += 1
    lines.append(f"warnings: {warning_count}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_dump_model(cfg: RunConfig) -> int:
    if cfg.src is None:
        raise ConfigError("dump-model needs --src")
    if not cfg.src.is_dir():
        raise ConfigError(f"source directory not found: {cfg.src}")
    _, model = load_units(cfg)
    sys.stdout.write(dump_model(model))
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seg-migrate",
        description="Migrate fixed-form Fortran with Esope segments to Fortran 2008.",
    )
    parser.add_argument("command", choices=["migrate", "check", "dump-model"])
    parser.add_argument("--src", help="source directory")
    parser.add_argument("--out", help="output directory (migrate only)")
    parser.add_argument(
        "--include-path", action="append", default=[], metavar="DIR",
        help="extra directory searched for included files (repeatable)",
    )
    parser.add_argument("--intent-catalog", metavar="FILE",
                        help="known intents of external routines")
    parser.add_argument("--config", metavar="FILE", help="key=value configuration file")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "migrate":
            return cmd_migrate(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        return cmd_dump_model(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 2
    except MigrationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
