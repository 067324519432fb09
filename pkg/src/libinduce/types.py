"""Simple polymorphic types and first-order unification."""

from __future__ import annotations

import re
from typing import Union

from .errors import InferenceError, ParseError

__all__ = [
    "Ty", "TyVar", "TyCon", "Arrow", "Context", "UnificationFailure",
    "arrow", "parse_type", "type_str", "free_type_vars", "canonical",
    "arguments", "returns", "instantiate",
]


class TyVar:
    __slots__ = ("id",)
    __match_args__ = ("id",)
    ground = False

    def __init__(self, id: int):
        self.id = id

    def __eq__(self, other):
        return type(other) is TyVar and other.id == self.id

    def __hash__(self):
        return hash(("tv", self.id))

    def __repr__(self):
        return f"t{self.id}"


class TyCon:
    __slots__ = ("name", "args", "ground", "_hash")
    __match_args__ = ("name", "args")

    def __init__(self, name: str, args: tuple[Ty, ...] = ()):
        self.name = name
        self.args = tuple(args)
        self.ground = all(a.ground for a in self.args)
        self._hash = hash(("tc", name, self.args))

    def __eq__(self, other):
        return type(other) is TyCon and other.name == self.name and other.args == self.args

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return type_str(self)

    def __reduce__(self):
        return (TyCon, (self.name, self.args))


class Arrow:
    __slots__ = ("frm", "to", "ground", "_hash")
    __match_args__ = ("frm", "to")

    def __init__(self, frm: Ty, to: Ty):
        self.frm = frm
        self.to = to
        self.ground = frm.ground and to.ground
        self._hash = hash(("->", frm, to))

    def __eq__(self, other):
        return type(other) is Arrow and other.frm == self.frm and other.to == self.to

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return type_str(self)

    def __reduce__(self):
        return (Arrow, (self.frm, self.to))


Ty = Union[TyVar, TyCon, Arrow]


def arrow(*tys: Ty) -> Ty:
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = Arrow(t, out)
    return out


def arguments(t: Ty) -> list[Ty]:
    out = []
    while type(t) is Arrow:
        out.append(t.frm)
        t = t.to
    return out


def returns(t: Ty) -> Ty:
    while type(t) is Arrow:
        t = t.to
    return t


def free_type_vars(t: Ty) -> list[int]:
    """Type variable ids in order of first appearance."""
    seen: list[int] = []

    def go(u: Ty) -> None:
        match u:
            case TyVar(i):
                if i not in seen:
                    seen.append(i)
            case TyCon(_, args):
                for a in args:
                    go(a)
            case Arrow(a, b):
                go(a)
                go(b)

    go(t)
    return seen


def _rename(t: Ty, mapping: dict[int, Ty]) -> Ty:
    match t:
        case TyVar(i):
            return mapping.get(i, t)
        case TyCon(n, args):
            return TyCon(n, tuple(_rename(a, mapping) for a in args)) if args else t
        case Arrow(a, b):
            return Arrow(_rename(a, mapping), _rename(b, mapping))
    raise TypeError(t)


def canonical(t: Ty) -> Ty:
    """Rename type variables to t0, t1, ... in order of appearance."""
    return _rename(t, {v: TyVar(k) for k, v in enumerate(free_type_vars(t))})


def type_str(t: Ty) -> str:
    match t:
        case TyVar(i):
            return f"t{i}"
        case TyCon(n, ()):
            return n
        case TyCon(n, args):
            return f"{n}({', '.join(type_str(a) for a in args)})"
        case Arrow(a, b):
            left = type_str(a)
            if type(a) is Arrow:
                left = f"({left})"
            return f"{left} -> {type_str(b)}"
    raise TypeError(t)


_TY_TOKEN = re.compile(r"\s*(->|\(|\)|,|[A-Za-z_][A-Za-z0-9_]*)")


def parse_type(text: str) -> Ty:
    """Parse ``"(t0 -> t1) -> list(t0) -> list(t1)"``; ``t<N>`` are variables."""
    tokens: list[str] = []
    pos, text = 0, text.strip()
    while pos < len(text):
        m = _TY_TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"bad type syntax near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def expect(tok):
        nonlocal i
        if peek() != tok:
            raise ParseError(f"expected {tok!r} in type {text!r}")
        i += 1

    def atom() -> Ty:
        nonlocal i
        tok = peek()
        if tok == "(":
            i += 1
            t = arrow_ty()
            expect(")")
            return t
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            raise ParseError(f"unexpected token {tok!r} in type {text!r}")
        i += 1
        if re.fullmatch(r"t\d+", tok):
            return TyVar(int(tok[1:]))
        if peek() == "(":
            i += 1
            args = [arrow_ty()]
            while peek() == ",":
                i += 1
                args.append(arrow_ty())
            expect(")")
            return TyCon(tok, tuple(args))
        return TyCon(tok)

    def arrow_ty() -> Ty:
        nonlocal i
        left = atom()
        if peek() == "->":
            i += 1
            return Arrow(left, arrow_ty())
        return left

    t = arrow_ty()
    if i != len(tokens):
        raise ParseError(f"trailing tokens in type {text!r}")
    return t


class UnificationFailure(InferenceError):
    """Raised by ``unify``; the message is rendered lazily since search discards most failures."""

    def __init__(self, template: str, *types: Ty, ctx: Context | None = None):
        super().__init__(template)
        self.template = template
        self.types = types
        self.ctx = ctx

    def __str__(self) -> str:
        shown = (self.ctx.resolve(t) if self.ctx else t for t in self.types)
        return self.template.format(*(type_str(t) for t in shown))


class Context:
    """A substitution over type variables plus a fresh-variable counter.

    ``unify`` mutates in place; call ``copy`` first when the attempt may need
    to be discarded.
    """

    __slots__ = ("bindings", "next_id")

    def __init__(self, bindings: dict[int, Ty] | None = None, next_id: int = 0):
        self.bindings = bindings if bindings is not None else {}
        self.next_id = next_id

    def copy(self) -> Context:
        return Context(dict(self.bindings), self.next_id)

    def fresh(self) -> TyVar:
        v = TyVar(self.next_id)
        self.next_id += 1
        return v

    def resolve(self, t: Ty) -> Ty:
        """Fully apply the substitution."""
        if t.ground:
            return t
        match t:
            case TyVar(i):
                b = self.bindings.get(i)
                if b is None:
                    return t
                r = self.resolve(b)
                if r is not b:
                    self.bindings[i] = r
                return r
            case TyCon(n, args):
                if not args:
                    return t
                return TyCon(n, tuple(self.resolve(a) for a in args))
            case Arrow(a, b):
                return Arrow(self.resolve(a), self.resolve(b))
        raise TypeError(t)

    def _walk(self, t: Ty) -> Ty:
        while type(t) is TyVar and t.id in self.bindings:
            t = self.bindings[t.id]
        return t

    def _occurs(self, i: int, t: Ty) -> bool:
        t = self._walk(t)
        match t:
            case TyVar(j):
                return i == j
            case TyCon(_, args):
                return any(self._occurs(i, a) for a in args)
            case Arrow(a, b):
                return self._occurs(i, a) or self._occurs(i, b)
        return False

    def unify(self, a: Ty, b: Ty) -> None:
        a, b = self._walk(a), self._walk(b)
        if type(a) is TyVar:
            if type(b) is TyVar and b.id == a.id:
                return
            if self._occurs(a.id, b):
                raise UnificationFailure(f"occurs check: t{a.id} in {{}}", b, ctx=self)
            self.bindings[a.id] = b
            return
        if type(b) is TyVar:
            self.unify(b, a)
            return
        if type(a) is Arrow and type(b) is Arrow:
            self.unify(a.frm, b.frm)
            self.unify(a.to, b.to)
            return
        if type(a) is TyCon and type(b) is TyCon and a.name == b.name and len(a.args) == len(b.args):
            for x, y in zip(a.args, b.args):
                self.unify(x, y)
            return
        raise UnificationFailure("cannot unify {} with {}", a, b, ctx=self)


def instantiate(t: Ty, ctx: Context) -> Ty:
    """Replace every type variable of a type scheme with a fresh one."""
    ids = free_type_vars(t)
    if not ids:
        return t
    return _rename(t, {i: ctx.fresh() for i in ids})
