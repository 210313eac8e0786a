"""Type expression parsing, normalization, classification and matching.

A type annotation such as ``Dict[str, List[int]]`` is modeled as a small
tree: an outermost base name plus an ordered list of parameter subtrees.
Comparisons work on normalized trees so that surface spellings like
``List[int]`` and ``list[int]`` are treated as the same type, while
``Optional[T]`` and ``Union[T, None]`` stay distinct.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class TypeParseError(ValueError):
    """Raised when a type annotation cannot be parsed into a tree."""


@dataclass(frozen=True)
class TypeExpr:
    """Parsed type expression: a base name with ordered parameters.

    ``params`` is empty for atomic types.  A bare bracket group (the
    argument list of ``Callable[[int, str], int]``) uses the pseudo-base
    ``"[]"``.
    """

    base: str
    params: tuple["TypeExpr", ...] = ()

    def __str__(self) -> str:
        return render(self)


# Aliases that normalize to the same canonical name.  ``typing.`` prefixes
# are stripped before this table is consulted.
_ALIASES = {
    "List": "list",
    "Dict": "dict",
    "Set": "set",
    "Tuple": "tuple",
    "FrozenSet": "frozenset",
    "Frozenset": "frozenset",
    "Type": "type",
}

# Built-in and standard typing names, in canonical (post-alias) spelling.
_DEFAULT_BUILTIN_NAMES = frozenset(
    {
        "int",
        "str",
        "float",
        "bool",
        "bytes",
        "None",
        "list",
        "dict",
        "set",
        "tuple",
        "frozenset",
        "Optional",
        "Union",
        "Any",
        "Callable",
        "Iterable",
        "Iterator",
        "Sequence",
        "Mapping",
        "type",
    }
)


def _strip_typing(name: str) -> str:
    return name[len("typing."):] if name.startswith("typing.") else name


def canonical_name(name: str) -> str:
    """Canonical spelling of a (possibly dotted) base name.

    Keeps dotted prefixes but normalizes the final segment, so
    ``typing.List`` -> ``list`` and ``a.b.Dict`` -> ``a.b.dict``.
    """
    name = _strip_typing(name)
    head, _, tail = name.rpartition(".")
    tail = _ALIASES.get(tail, tail)
    return f"{head}.{tail}" if head else tail


def final_segment(name: str) -> str:
    """Last dotted segment of a canonical name (``a.b.Foo`` -> ``Foo``)."""
    return name.rpartition(".")[2]


@dataclass(frozen=True)
class BuiltinTable:
    """Set of built-in / standard typing names, closed under aliases."""

    names: frozenset = field(default=_DEFAULT_BUILTIN_NAMES)

    def contains(self, name: str) -> bool:
        return final_segment(canonical_name(name)) in self.names


DEFAULT_BUILTINS = BuiltinTable()


class TypeCategory:
    """Category labels for type expressions."""

    ELEMENTARY = "elementary"
    GENERIC = "generic"
    USER_DEFINED = "user"

    ALL = (ELEMENTARY, GENERIC, USER_DEFINED)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\s*\.\s*[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<ellipsis>\.\.\.)
  | (?P<empty>\(\s*\))
  | (?P<punct>[\[\],])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise TypeParseError(f"unexpected character {text[pos]!r} in type {text!r}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group()))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], text: str):
        self.tokens = tokens
        self.text = text
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise TypeParseError(f"unexpected end of type {self.text!r}")
        self.pos += 1
        return tok

    def parse_expr(self) -> TypeExpr:
        expr = self.parse_atom()
        tok = self.peek()
        if tok is not None and tok[1] == "[":
            if expr.params:
                raise TypeParseError(f"double parameter list in type {self.text!r}")
            self.take()
            params = self.parse_param_list()
            expr = TypeExpr(expr.base, tuple(params))
        return expr

    def parse_atom(self) -> TypeExpr:
        kind, value = self.take()
        if kind == "name":
            return TypeExpr(re.sub(r"\s+", "", value))
        if kind in ("number", "ellipsis", "empty"):
            return TypeExpr(value.replace(" ", ""))
        if kind == "string":
            inner = value[1:-1].strip()
            if not inner:
                raise TypeParseError(f"empty forward reference in type {self.text!r}")
            return parse_type(inner)
        if value == "[":
            # Bare bracket group, e.g. the argument list of a Callable.
            nxt = self.peek()
            if nxt is not None and nxt[1] == "]":
                self.take()
                return TypeExpr("[]")
            params = self.parse_param_list()
            return TypeExpr("[]", tuple(params))
        raise TypeParseError(f"unexpected token {value!r} in type {self.text!r}")

    def parse_param_list(self) -> list[TypeExpr]:
        # Opening "[" already consumed; consumes through the matching "]".
        params = []
        while True:
            tok = self.peek()
            if tok is None:
                raise TypeParseError(f"unbalanced brackets in type {self.text!r}")
            if tok[1] == "]" and not params:
                raise TypeParseError(f"empty parameter in type {self.text!r}")
            params.append(self.parse_expr())
            kind, value = self.take()
            if value == "]":
                return params
            if value != ",":
                raise TypeParseError(f"expected ',' or ']' in type {self.text!r}")
            nxt = self.peek()
            if nxt is not None and nxt[1] == "]":
                raise TypeParseError(f"empty parameter in type {self.text!r}")


def parse_type(text: str) -> TypeExpr:
    """Parse a type annotation string into a :class:`TypeExpr` tree.

    Bracketed suffixes become parameters, quoted forward references are
    unquoted, and whitespace is insignificant.  Raises
    :class:`TypeParseError` on unbalanced brackets or empty parameters.
    """
    if not text or not text.strip():
        raise TypeParseError("empty type text")
    parser = _Parser(_lex(text), text)
    expr = parser.parse_expr()
    if parser.peek() is not None:
        raise TypeParseError(f"trailing tokens in type {text!r}")
    return expr


def try_parse_type(text: str) -> TypeExpr | None:
    """Like :func:`parse_type` but returns None instead of raising."""
    try:
        return parse_type(text)
    except TypeParseError:
        return None


# ---------------------------------------------------------------------------
# Rendering and normalization
# ---------------------------------------------------------------------------


def render(t: TypeExpr) -> str:
    """Canonical text: base followed by ``[p1, p2]``, one space after commas."""
    inner = ", ".join(render(p) for p in t.params)
    if t.base == "[]":
        return f"[{inner}]"
    return f"{t.base}[{inner}]" if t.params else t.base


def normalize(t: TypeExpr) -> TypeExpr:
    """Rewrite base names to canonical spelling throughout the tree."""
    return TypeExpr(canonical_name(t.base), tuple(normalize(p) for p in t.params))


def normalized_text(t: TypeExpr) -> str:
    return render(normalize(t))


def comparison_key(t: TypeExpr):
    """Hashable key under which equal-up-to-normalization trees collide.

    Dotted and bare spellings of a name (``a.b.Foo`` vs ``Foo``) compare
    by final segment.
    """
    base = final_segment(canonical_name(t.base))
    return (base, tuple(comparison_key(p) for p in t.params))


def base_of(t: TypeExpr) -> str:
    """Normalized outermost base name."""
    return canonical_name(t.base)


def classify(t: TypeExpr, builtins: BuiltinTable = DEFAULT_BUILTINS) -> str:
    """Category of a type: generic, elementary, or user-defined.

    Any parameterized type is generic; an atomic builtin is elementary;
    everything else (project or third-party names) is user-defined.
    """
    if t.params:
        return TypeCategory.GENERIC
    if builtins.contains(t.base):
        return TypeCategory.ELEMENTARY
    return TypeCategory.USER_DEFINED


def is_admissible(
    t: TypeExpr,
    visible_names,
    builtins: BuiltinTable = DEFAULT_BUILTINS,
) -> bool:
    """Whether a candidate type may stay in a candidate pool.

    Admissible when the base is a builtin (atomic or as the base of a
    generic) or appears among the visible user-defined names.  Parameters
    are deliberately not checked.
    """
    if builtins.contains(t.base):
        return True
    base = final_segment(canonical_name(t.base))
    return any(final_segment(canonical_name(v)) == base for v in visible_names)


def match(pred: TypeExpr, gold: TypeExpr) -> tuple[bool, bool]:
    """(exact, base) match of a prediction against a gold annotation.

    Exact compares whole normalized trees; base compares only the
    outermost names.  Exact implies base.
    """
    base_ok = final_segment(base_of(pred)) == final_segment(base_of(gold))
    exact_ok = base_ok and comparison_key(pred) == comparison_key(gold)
    return exact_ok, base_ok
