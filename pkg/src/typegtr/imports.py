"""Project indexing and one-hop visibility of user-defined types.

A type is "visible" from a file when it is defined in that file or in a
file the current file imports directly.  Visibility is deliberately not
transitive: types reachable only through an import's own imports are
excluded.  Imports of modules without in-project source contribute their
imported names as opaque user-defined type names.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from pathlib import Path

from .source import Diagnostic

SAME_FILE = "same_file"
IMPORTED = "imported"


class FileNotIndexed(KeyError):
    """The requested file is not part of the project index."""


@dataclass(frozen=True)
class ImportStatement:
    """One import edge: target module plus named imports (None = all)."""

    module: str
    names: tuple[str, ...] | None = None


@dataclass
class FileInfo:
    defined_types: list[str] = field(default_factory=list)
    imports: list[ImportStatement] = field(default_factory=list)


@dataclass
class ProjectIndex:
    """Per-file type definitions and import edges for a source tree."""

    root: str
    files: dict[str, FileInfo] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self):
        self._module_map = {}
        for path in self.files:
            self._module_map[_module_of(path)] = path

    def resolve_module(self, module: str) -> str | None:
        return self._module_map.get(module)

    def to_json(self) -> str:
        payload = {
            "files": {
                path: {
                    "defined_types": info.defined_types,
                    "imports": [
                        [imp.module, "*" if imp.names is None else list(imp.names)]
                        for imp in info.imports
                    ],
                }
                for path, info in sorted(self.files.items())
            }
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, root: str = "") -> "ProjectIndex":
        payload = json.loads(text)
        files = {}
        for path, entry in payload["files"].items():
            imports = [
                ImportStatement(mod, None if names == "*" else tuple(names))
                for mod, names in entry["imports"]
            ]
            files[path] = FileInfo(list(entry["defined_types"]), imports)
        return cls(root=root, files=files)


@dataclass(frozen=True)
class VisibleTypeSet:
    """User-defined type names reachable from one file, with provenance."""

    names: frozenset
    provenance: dict

    @classmethod
    def empty(cls) -> "VisibleTypeSet":
        return cls(frozenset(), {})

    def sorted_names(self) -> list[str]:
        return sorted(self.names)


def _module_of(path: str) -> str:
    parts = Path(path).with_suffix("").parts
    if parts and parts[-1] == "__init__":
        parts = parts[:-1]
    return ".".join(parts)


def _package_of(path: str) -> str:
    """Package a file belongs to (its directory as a dotted path)."""
    parts = Path(path).parts[:-1]
    return ".".join(parts)


_TYPEISH_VALUE = (ast.Name, ast.Attribute, ast.Subscript)


def _collect_defined_types(tree: ast.Module) -> list[str]:
    names = []

    def classes(body):
        for node in body:
            if isinstance(node, ast.ClassDef):
                names.append(node.name)
                classes(node.body)

    classes(tree.body)
    for node in tree.body:
        if isinstance(node, ast.Assign):
            if len(node.targets) == 1 and isinstance(node.targets[0], ast.Name):
                if isinstance(node.value, _TYPEISH_VALUE) or (
                    isinstance(node.value, ast.Constant)
                    and isinstance(node.value.value, str)
                ):
                    names.append(node.targets[0].id)
        elif isinstance(node, ast.AnnAssign):
            if (
                isinstance(node.target, ast.Name)
                and node.value is not None
                and isinstance(node.value, _TYPEISH_VALUE)
            ):
                names.append(node.target.id)
    return sorted(set(names))


def _iter_import_nodes(body):
    """Imports at module level, descending into if/try but not defs."""
    for node in body:
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            yield node
        elif isinstance(node, (ast.If, ast.Try)):
            for attr in ("body", "orelse", "finalbody"):
                yield from _iter_import_nodes(getattr(node, attr, []) or [])
            for handler in getattr(node, "handlers", []) or []:
                yield from _iter_import_nodes(handler.body)


def _collect_imports(tree: ast.Module, file_path: str) -> list[ImportStatement]:
    statements = []
    for node in _iter_import_nodes(tree.body):
        if isinstance(node, ast.Import):
            for alias in node.names:
                statements.append(ImportStatement(alias.name, None))
            continue
        base = node.module or ""
        if node.level:
            package = _package_of(file_path)
            parts = package.split(".") if package else []
            up = node.level - 1
            if up > len(parts):
                continue  # relative import escaping the project root
            parts = parts[: len(parts) - up] if up else parts
            base = ".".join(parts + ([node.module] if node.module else []))
        if any(alias.name == "*" for alias in node.names):
            statements.append(ImportStatement(base, None))
        else:
            statements.append(
                ImportStatement(base, tuple(alias.name for alias in node.names))
            )
    return statements


def index_sources(sources, root: str = "") -> ProjectIndex:
    """Index (path, source_text) pairs.

    Class definitions and top-level type aliases count as defined types.
    Unparseable files stay in the index with empty entries plus a
    diagnostic, so downstream lookups never miss.
    """
    files: dict[str, FileInfo] = {}
    diagnostics: list[Diagnostic] = []
    for rel, text in sources:
        try:
            if text is None:
                raise OSError("unreadable file")
            tree = ast.parse(text)
        except Exception as exc:
            files[rel] = FileInfo()
            diagnostics.append(Diagnostic(rel, str(exc)))
            continue
        files[rel] = FileInfo(
            defined_types=_collect_defined_types(tree),
            imports=_collect_imports(tree, rel),
        )
    return ProjectIndex(root=root, files=files, diagnostics=diagnostics)


def walk_python_files(root):
    """(relative_posix_path, text) for every ``.py`` under root, sorted.

    Unreadable files yield text None; the indexer records a diagnostic.
    """
    root = Path(root)
    for path in sorted(root.rglob("*.py"), key=lambda p: p.as_posix()):
        rel = path.relative_to(root).as_posix()
        try:
            yield rel, path.read_text(encoding="utf-8")
        except OSError:
            yield rel, None


def index_project(root) -> ProjectIndex:
    """Index every ``.py`` file under ``root``."""
    return index_sources(walk_python_files(root), root=str(root))


def visible_types(index: ProjectIndex, file: str) -> VisibleTypeSet:
    """Types visible from ``file``: its own definitions plus one hop of
    imports.  Same-file provenance wins on name collisions."""
    if file not in index.files:
        raise FileNotIndexed(file)
    info = index.files[file]
    provenance: dict[str, str] = {}

    def add(name: str, origin: str):
        if origin == SAME_FILE or name not in provenance:
            provenance[name] = origin

    for imp in info.imports:
        target = index.resolve_module(imp.module)
        if target is not None:
            target_types = index.files[target].defined_types
            if imp.names is None:
                for name in target_types:
                    add(name, IMPORTED)
            else:
                for name in imp.names:
                    if name in target_types:
                        add(name, IMPORTED)
                    else:
                        sub = index.resolve_module(f"{imp.module}.{name}" if imp.module else name)
                        if sub is not None:
                            for sub_name in index.files[sub].defined_types:
                                add(sub_name, IMPORTED)
        elif imp.names is not None:
            # External module: imported names become opaque type names.
            for name in imp.names:
                add(name, IMPORTED)

    for name in info.defined_types:
        add(name, SAME_FILE)

    return VisibleTypeSet(frozenset(provenance), provenance)
