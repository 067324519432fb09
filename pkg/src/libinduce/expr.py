"""Lambda-calculus terms with de Bruijn indices.

Terms are immutable and hash-cached so they can be used freely as dict keys
and shared between threads or pickled into worker processes.

Surface syntax::

    expr := '$'INT | '#'INT | IDENT | QUOTED | '(' 'lambda' expr ')' | '(' expr expr+ ')'

``$i`` is a bound variable, ``#i`` a pattern metavariable (compression only),
``'a'`` a quoted constant. Multi-argument application is left-nested.
"""

from __future__ import annotations

import re
from collections.abc import Callable, Container, Iterator
from typing import Union

from .errors import ParseError, PatternNotPrintable, UnboundVariable, UnknownIdentifier

__all__ = [
    "Expr", "BoundVar", "Prim", "Lam", "App", "MetaVar",
    "size", "free_vars", "shift", "substitute", "beta", "spine", "apply_all",
    "subterms", "is_closed", "has_metavar", "prim_names", "rename_prims",
    "parse", "to_sexpr",
]


class BoundVar:
    __slots__ = ("index", "_hash")
    __match_args__ = ("index",)

    def __init__(self, index: int):
        if index < 0:
            raise ValueError("de Bruijn index must be non-negative")
        self.index = index
        self._hash = hash(("$", index))

    def __eq__(self, other):
        return self is other or (type(other) is BoundVar and other.index == self.index)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"BoundVar({self.index})"

    def __reduce__(self):
        return (BoundVar, (self.index,))


class Prim:
    """A named leaf: base primitive, constant or learned abstraction."""

    __slots__ = ("name", "_hash")
    __match_args__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("p", name))

    def __eq__(self, other):
        return self is other or (type(other) is Prim and other.name == self.name)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Prim({self.name!r})"

    def __reduce__(self):
        return (Prim, (self.name,))


class MetaVar:
    __slots__ = ("slot", "_hash")
    __match_args__ = ("slot",)

    def __init__(self, slot: int):
        self.slot = slot
        self._hash = hash(("#", slot))

    def __eq__(self, other):
        return self is other or (type(other) is MetaVar and other.slot == self.slot)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"MetaVar({self.slot})"

    def __reduce__(self):
        return (MetaVar, (self.slot,))


class Lam:
    __slots__ = ("body", "_hash", "_size")
    __match_args__ = ("body",)

    def __init__(self, body: Expr):
        self.body = body
        self._hash = hash(("l", body._hash))
        self._size = 1 + _size(body)

    def __eq__(self, other):
        if self is other:
            return True
        return type(other) is Lam and other._hash == self._hash and other.body == self.body

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Lam({self.body!r})"

    def __reduce__(self):
        return (Lam, (self.body,))


class App:
    __slots__ = ("fun", "arg", "_hash", "_size")
    __match_args__ = ("fun", "arg")

    def __init__(self, fun: Expr, arg: Expr):
        self.fun = fun
        self.arg = arg
        self._hash = hash(("a", fun._hash, arg._hash))
        self._size = 1 + _size(fun) + _size(arg)

    def __eq__(self, other):
        if self is other:
            return True
        return (
            type(other) is App
            and other._hash == self._hash
            and other.fun == self.fun
            and other.arg == self.arg
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"App({self.fun!r}, {self.arg!r})"

    def __reduce__(self):
        return (App, (self.fun, self.arg))


Expr = Union[BoundVar, Prim, Lam, App, MetaVar]


def _size(e: Expr) -> int:
    t = type(e)
    if t is Lam or t is App:
        return e._size
    return 1


def size(e: Expr) -> int:
    """Terminals, abstractions and applications each count one."""
    return _size(e)


def free_vars(e: Expr, depth: int = 0) -> set[int]:
    """Indices of variables free in ``e``, relative to ``e``'s own scope."""
    out: set[int] = set()

    def go(t: Expr, d: int) -> None:
        match t:
            case BoundVar(i):
                if i >= d:
                    out.add(i - d)
            case Lam(b):
                go(b, d + 1)
            case App(f, x):
                go(f, d)
                go(x, d)

    go(e, depth)
    return out


def is_closed(e: Expr) -> bool:
    return not free_vars(e)


def has_metavar(e: Expr) -> bool:
    match e:
        case MetaVar():
            return True
        case Lam(b):
            return has_metavar(b)
        case App(f, x):
            return has_metavar(f) or has_metavar(x)
    return False


def shift(e: Expr, by: int, cutoff: int = 0) -> Expr:
    """Add ``by`` to every free variable index >= ``cutoff``."""
    if by == 0:
        return e
    match e:
        case BoundVar(i):
            if i < cutoff:
                return e
            if i + by < 0:
                raise ValueError(f"shift would make ${i} negative")
            return BoundVar(i + by)
        case Lam(b):
            nb = shift(b, by, cutoff + 1)
            return e if nb is b else Lam(nb)
        case App(f, x):
            nf, nx = shift(f, by, cutoff), shift(x, by, cutoff)
            return e if (nf is f and nx is x) else App(nf, nx)
    return e


def substitute(e: Expr, value: Expr, index: int = 0) -> Expr:
    """Replace ``$index`` by ``value`` and lower the remaining free indices."""
    match e:
        case BoundVar(i):
            if i == index:
                return shift(value, index)
            if i > index:
                return BoundVar(i - 1)
            return e
        case Lam(b):
            return Lam(substitute(b, value, index + 1))
        case App(f, x):
            return App(substitute(f, value, index), substitute(x, value, index))
    return e


def beta(lam: Lam, arg: Expr) -> Expr:
    return substitute(lam.body, arg, 0)


def spine(e: Expr) -> tuple[Expr, list[Expr]]:
    """Split ``(f a b c)`` into ``f`` and ``[a, b, c]``."""
    args: list[Expr] = []
    while type(e) is App:
        args.append(e.arg)
        e = e.fun
    args.reverse()
    return e, args


def apply_all(head: Expr, args) -> Expr:
    for a in args:
        head = App(head, a)
    return head


def subterms(e: Expr, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Expr]]:
    """Pre-order walk yielding ``(path, subterm)``; child 0 is fun/body, 1 is arg."""
    yield path, e
    match e:
        case Lam(b):
            yield from subterms(b, path + (0,))
        case App(f, x):
            yield from subterms(f, path + (0,))
            yield from subterms(x, path + (1,))


def prim_names(e: Expr) -> set[str]:
    return {t.name for _, t in subterms(e) if type(t) is Prim}


def rename_prims(e: Expr, mapping: dict[str, str]) -> Expr:
    match e:
        case Prim(n):
            return Prim(mapping[n]) if n in mapping else e
        case Lam(b):
            nb = rename_prims(b, mapping)
            return e if nb is b else Lam(nb)
        case App(f, x):
            nf, nx = rename_prims(f, mapping), rename_prims(x, mapping)
            return e if (nf is f and nx is x) else App(nf, nx)
    return e


# -- printing ---------------------------------------------------------------


def to_sexpr(e: Expr, allow_meta: bool = False) -> str:
    parts: list[str] = []

    def go(t: Expr) -> None:
        match t:
            case BoundVar(i):
                parts.append(f"${i}")
            case Prim(n):
                parts.append(n)
            case MetaVar(s):
                if not allow_meta:
                    raise PatternNotPrintable("metavariable in executable term")
                parts.append(f"#{s}")
            case Lam(b):
                parts.append("(lambda ")
                go(b)
                parts.append(")")
            case App():
                head, args = spine(t)
                parts.append("(")
                go(head)
                for a in args:
                    parts.append(" ")
                    go(a)
                parts.append(")")

    go(e)
    return "".join(parts)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|('[^']*')|([^\s()']+))")
_LAMBDA = {"lambda", "λ", "lam"}
_INDEX = re.compile(r"^\$(\d+)$")
_META = re.compile(r"^#(\d+)$")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        tokens.append(next(g for g in m.groups() if g is not None))
        pos = m.end()
    return tokens


def _read(tokens: list[str], i: int):
    if i >= len(tokens):
        raise ParseError("unexpected end of input")
    tok = tokens[i]
    if tok == ")":
        raise ParseError("unbalanced ')'")
    if tok != "(":
        return tok, i + 1
    items = []
    i += 1
    while True:
        if i >= len(tokens):
            raise ParseError("unbalanced '(': missing ')'")
        if tokens[i] == ")":
            if not items:
                raise ParseError("empty list '()'")
            return items, i + 1
        item, i = _read(tokens, i)
        items.append(item)


Resolver = Callable[[str], "str | None"]


def parse(
    text: str,
    names: Container[str] | Resolver | None = None,
    *,
    allow_meta: bool = False,
    allow_free: bool = False,
) -> Expr:
    """Parse one S-expression into a term.

    ``names`` validates identifiers: a container of known names, a resolver
    returning the canonical name (or None when unknown), or None to accept any
    identifier. Named binders ``(lambda x body)`` / ``(lambda (x y) body)`` are
    converted to de Bruijn indices.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input")
    tree, end = _read(tokens, 0)
    if end != len(tokens):
        raise ParseError(f"trailing input after expression: {' '.join(tokens[end:])!r}")

    if names is None:
        resolve: Resolver = lambda n: n  # noqa: E731
    elif callable(names):
        resolve = names
    else:
        resolve = lambda n: n if n in names else None  # noqa: E731

    def conv(node, scope: list[str | None]) -> Expr:
        if isinstance(node, str):
            if m := _INDEX.match(node):
                idx = int(m.group(1))
                if idx >= len(scope) and not allow_free:
                    raise UnboundVariable(f"${idx} under {len(scope)} binder(s)")
                return BoundVar(idx)
            if m := _META.match(node):
                if not allow_meta:
                    raise ParseError(f"metavariable {node} not allowed here")
                return MetaVar(int(m.group(1)))
            if node in _LAMBDA:
                raise ParseError("'lambda' outside binder position")
            if node in scope:
                return BoundVar(scope.index(node))
            canonical = resolve(node)
            if canonical is None:
                raise UnknownIdentifier(node)
            return Prim(canonical)
        head = node[0]
        if isinstance(head, str) and head in _LAMBDA:
            if len(node) == 2:
                return Lam(conv(node[1], [None] + scope))
            if len(node) == 3:
                binders = node[1] if isinstance(node[1], list) else [node[1]]
                if not all(isinstance(b, str) for b in binders) or not binders:
                    raise ParseError("malformed lambda binder list")
                inner = list(reversed(binders)) + scope
                body = conv(node[2], inner)
                for _ in binders:
                    body = Lam(body)
                return body
            raise ParseError("lambda takes a body (optionally preceded by binder names)")
        if len(node) < 2:
            raise ParseError("application needs a function and at least one argument")
        out = conv(head, scope)
        for a in node[1:]:
            out = App(out, conv(a, scope))
        return out

    return conv(tree, [])
