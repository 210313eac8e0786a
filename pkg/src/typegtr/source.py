"""Python source handling: function extraction, annotation slots, masking.

Functions are treated as raw text units.  The supported grammar subset is
what the slot machinery understands (defs, assignments, annotated
assignments); everything else inside a body is carried along verbatim.
Edits are byte-exact splices so that a masked function differs from the
original only at the annotation being masked.
"""

from __future__ import annotations

import ast
import io
import re
import tokenize
from dataclasses import dataclass

from . import typelang

PLACEHOLDER = "<TYPE>"

_SKIP_ARG_NAMES = ("self", "cls")


class VarKind:
    LOCAL = "local"
    ARG = "arg"
    RET = "ret"

    ALL = (LOCAL, ARG, RET)


class SlotNotFound(LookupError):
    """Requested annotation slot does not exist in the function."""


class InvalidFunctionText(ValueError):
    """Text does not contain a parseable function definition."""


@dataclass(frozen=True)
class PythonFunction:
    """A single function definition as found in a source file."""

    file_path: str
    name: str
    source_text: str
    line_span: tuple[int, int]


@dataclass(frozen=True)
class TypeSlot:
    """An annotatable position: a local, an argument, or the return type.

    ``occurrence_index`` is the ordinal among same-named binding sites;
    it is 0 except for rebound locals annotated at a later binding.
    """

    var_kind: str
    var_name: str = ""
    occurrence_index: int = 0


@dataclass(frozen=True)
class TypeMissedFunction:
    """A function whose text carries exactly one ``<TYPE>`` placeholder."""

    function: PythonFunction
    slot: TypeSlot


@dataclass(frozen=True)
class TrainingPair:
    """A masked function together with the annotation that was removed."""

    input: TypeMissedFunction
    expected_type: str
    category: str


@dataclass(frozen=True)
class Diagnostic:
    file_path: str
    error: str


def whitespace_normalize(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return re.sub(r"\s+", " ", text).strip()


# ---------------------------------------------------------------------------
# Re-parsing function text with position mapping
# ---------------------------------------------------------------------------


class _Reparsed:
    """A function's text parsed as a mini-module.

    Method text arrives indented; the def-line indent is stripped from
    every line that carries it before parsing, and per-line strip widths
    are kept so node positions can be mapped back onto the original text.
    """

    def __init__(self, source_text: str):
        self.lines = source_text.split("\n")
        first = self.lines[0] if self.lines else ""
        indent = first[: len(first) - len(first.lstrip())]
        stripped = []
        self.strips = []
        for line in self.lines:
            if indent and line.startswith(indent):
                stripped.append(line[len(indent):])
                self.strips.append(len(indent))
            elif not line.strip():
                stripped.append("")
                self.strips.append(0)
            else:
                stripped.append(line)
                self.strips.append(0)
        self.parse_text = "\n".join(stripped)
        try:
            self.tree = ast.parse(self.parse_text)
        except (SyntaxError, ValueError) as exc:
            raise InvalidFunctionText(str(exc)) from exc
        self.fn = None
        for node in self.tree.body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self.fn = node
                break
        if self.fn is None:
            raise InvalidFunctionText("no function definition found")

    def col(self, lineno: int, col_offset: int) -> int:
        """Map a parsed column back to the original text."""
        return col_offset + self.strips[lineno - 1]

    def segment(self, node: ast.AST) -> str:
        """Original text covered by a node (may span lines)."""
        l1, c1 = node.lineno, self.col(node.lineno, node.col_offset)
        l2, c2 = node.end_lineno, self.col(node.end_lineno, node.end_col_offset)
        if l1 == l2:
            return self.lines[l1 - 1][c1:c2]
        parts = [self.lines[l1 - 1][c1:]]
        parts.extend(self.lines[l1:l2 - 1])
        parts.append(self.lines[l2 - 1][:c2])
        return "\n".join(parts)

    def splice(self, start: tuple[int, int], end: tuple[int, int], text: str) -> str:
        """Replace the (line, col) span with ``text``; positions are original."""
        (l1, c1), (l2, c2) = start, end
        lines = list(self.lines)
        head = lines[l1 - 1][:c1]
        tail = lines[l2 - 1][c2:]
        merged = head + text + tail
        lines[l1 - 1:l2] = [merged]
        return "\n".join(lines)

    def header_colon(self) -> tuple[int, int]:
        """Original position of the ``:`` that ends the def header."""
        reader = io.StringIO(self.parse_text).readline
        depth = 0
        seen_def = False
        for tok in tokenize.generate_tokens(reader):
            if tok.type == tokenize.NAME and tok.string == "def" and not seen_def:
                if tok.start[0] >= self.fn.lineno:
                    seen_def = True
                continue
            if not seen_def:
                continue
            if tok.type == tokenize.OP:
                if tok.string in "([{":
                    depth += 1
                elif tok.string in ")]}":
                    depth -= 1
                elif tok.string == ":" and depth == 0:
                    line, col = tok.start
                    return line, self.col(line, col)
        raise InvalidFunctionText("def header colon not found")


@dataclass
class _Site:
    """One concrete annotatable site inside a function."""

    kind: str
    name: str
    occurrence: int
    annotation: ast.AST | None
    insert_at: tuple[int, int]  # original (line, col) for a fresh annotation
    insert_text: str  # text to insert when no annotation exists


def _iter_body_statements(body):
    """Top-level-of-function statements in line order, entering control-flow
    blocks but not nested defs, lambdas, or class bodies."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            continue
        for attr in ("body", "orelse", "finalbody"):
            yield from _iter_body_statements(getattr(stmt, attr, []) or [])
        for handler in getattr(stmt, "handlers", []) or []:
            yield from _iter_body_statements(handler.body)
        for case in getattr(stmt, "cases", []) or []:
            yield from _iter_body_statements(case.body)


def _collect_sites(rp: _Reparsed) -> list[_Site]:
    fn = rp.fn
    sites: list[_Site] = []

    args = list(fn.args.posonlyargs) + list(fn.args.args)
    if fn.args.vararg is not None:
        args.append(fn.args.vararg)
    args += list(fn.args.kwonlyargs)
    if fn.args.kwarg is not None:
        args.append(fn.args.kwarg)
    for a in args:
        if a.arg in _SKIP_ARG_NAMES:
            continue
        name_end = (a.lineno, rp.col(a.lineno, a.col_offset) + len(a.arg))
        sites.append(_Site(VarKind.ARG, a.arg, 0, a.annotation, name_end, f": {PLACEHOLDER}"))

    bindings: dict[str, int] = {}
    for stmt in _iter_body_statements(fn.body):
        if isinstance(stmt, ast.Assign):
            if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
                continue
            target, annotation = stmt.targets[0], None
        elif isinstance(stmt, ast.AnnAssign):
            if stmt.value is None or not isinstance(stmt.target, ast.Name):
                continue
            target, annotation = stmt.target, stmt.annotation
        else:
            continue
        occ = bindings.get(target.id, 0)
        bindings[target.id] = occ + 1
        name_end = (target.lineno, rp.col(target.lineno, target.col_offset) + len(target.id))
        sites.append(_Site(VarKind.LOCAL, target.id, occ, annotation, name_end, f": {PLACEHOLDER}"))

    sites.append(_Site(VarKind.RET, "", 0, fn.returns, rp.header_colon(), f" -> {PLACEHOLDER}"))
    return sites


def _apply_site(rp: _Reparsed, site: _Site) -> str:
    if site.annotation is not None:
        ann = site.annotation
        start = (ann.lineno, rp.col(ann.lineno, ann.col_offset))
        end = (ann.end_lineno, rp.col(ann.end_lineno, ann.end_col_offset))
        return rp.splice(start, end, PLACEHOLDER)
    return rp.splice(site.insert_at, site.insert_at, site.insert_text)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def extract_functions(
    source_text: str, file_path: str
) -> tuple[list[PythonFunction], list[Diagnostic]]:
    """Extract every top-level and method-level function from a file.

    Nested inner functions stay embedded in their enclosing function's
    text.  Never raises: files or blocks that fail to parse produce
    diagnostics instead, and the remaining functions are still returned.
    """
    try:
        tree = ast.parse(source_text)
    except Exception as exc:  # SyntaxError, ValueError on NUL bytes, ...
        return _extract_with_recovery(source_text, file_path, exc)

    lines = source_text.split("\n")
    functions = []
    for node in _walk_defs(tree.body):
        text = "\n".join(lines[node.lineno - 1:node.end_lineno])
        functions.append(
            PythonFunction(file_path, node.name, text, (node.lineno, node.end_lineno))
        )
    return functions, []


def _walk_defs(body):
    """Defs in a module or class body; recurses into classes only."""
    for node in body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            yield node
        elif isinstance(node, ast.ClassDef):
            yield from _walk_defs(node.body)


_DEF_LINE_RE = re.compile(r"^(\s*)(async\s+)?def\s")


def _extract_with_recovery(
    source_text: str, file_path: str, file_error: Exception
) -> tuple[list[PythonFunction], list[Diagnostic]]:
    """Salvage individually parseable def blocks from a broken file."""
    lines = source_text.split("\n")
    starts = []
    for i, line in enumerate(lines):
        m = _DEF_LINE_RE.match(line)
        if m:
            starts.append((i, len(m.group(1))))
    if not starts:
        return [], [Diagnostic(file_path, f"file skipped: {file_error}")]

    functions = []
    diagnostics = []
    consumed_until = 0
    for start, indent in starts:
        if start < consumed_until:
            continue  # nested def inside an already captured block
        end = len(lines)
        for j in range(start + 1, len(lines)):
            line = lines[j]
            if line.strip() and (len(line) - len(line.lstrip())) <= indent:
                end = j
                break
        while end > start + 1 and not lines[end - 1].strip():
            end -= 1
        consumed_until = end
        block = "\n".join(lines[start:end])
        try:
            rp = _Reparsed(block)
        except InvalidFunctionText as exc:
            diagnostics.append(Diagnostic(file_path, f"line {start + 1}: {exc}"))
            continue
        functions.append(
            PythonFunction(file_path, rp.fn.name, block, (start + 1, end))
        )
    if not functions and not diagnostics:
        diagnostics.append(Diagnostic(file_path, f"file skipped: {file_error}"))
    return functions, diagnostics


def enumerate_slots(function: PythonFunction) -> list[TypeSlot]:
    """All annotatable slots: args in declaration order, locals by first
    binding line, return type last.  ``self``/``cls`` never appear."""
    rp = _Reparsed(function.source_text)
    slots = []
    for site in _collect_sites(rp):
        if site.kind == VarKind.LOCAL and site.occurrence > 0:
            continue
        slots.append(TypeSlot(site.kind, site.name, site.occurrence))
    return slots


def insert_placeholder(function: PythonFunction, slot: TypeSlot) -> TypeMissedFunction:
    """Insert (or substitute) a ``<TYPE>`` placeholder at the given slot.

    All text other than the annotation site is preserved byte for byte.
    """
    rp = _Reparsed(function.source_text)
    for site in _collect_sites(rp):
        if (site.kind, site.name, site.occurrence) == (
            slot.var_kind,
            slot.var_name,
            slot.occurrence_index,
        ):
            new_text = _apply_site(rp, site)
            masked = PythonFunction(
                function.file_path, function.name, new_text, function.line_span
            )
            return TypeMissedFunction(masked, slot)
    raise SlotNotFound(f"{slot.var_kind} {slot.var_name!r} #{slot.occurrence_index}")


def mask_annotations(function: PythonFunction) -> list[TrainingPair]:
    """One training pair per existing annotation.

    Each pair masks exactly one annotation and leaves the others intact.
    Annotations whose text does not parse as a type expression are
    outside the supported subset and yield no pair.
    """
    rp = _Reparsed(function.source_text)
    pairs = []
    for site in _collect_sites(rp):
        if site.annotation is None:
            continue
        expected = whitespace_normalize(rp.segment(site.annotation))
        parsed = typelang.try_parse_type(expected)
        if parsed is None:
            continue
        masked_text = _apply_site(rp, site)
        masked = PythonFunction(
            function.file_path, function.name, masked_text, function.line_span
        )
        slot = TypeSlot(site.kind, site.name, site.occurrence)
        pairs.append(
            TrainingPair(
                TypeMissedFunction(masked, slot),
                expected,
                typelang.classify(parsed),
            )
        )
    return pairs
