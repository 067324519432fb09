"""The evolving library: base primitives, learned abstractions and PCFG weights.

Programs are generated top-down by a typed PCFG. At a hole of arrow type a
lambda is forced; at any other hole the generator chooses a head among the
productions and in-scope variables whose return type unifies with the request,
with probability proportional to its weight among those compatible choices.
The head is then applied to one fresh hole per argument.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

from .errors import CycleError, InferenceError, NameCollision, UnknownIdentifier
from .expr import (
    App, BoundVar, Expr, Lam, Prim, beta, is_closed, parse, prim_names, rename_prims,
    shift, size, spine, subterms, to_sexpr,
)
from .typecheck import infer_type
from .types import (
    Arrow, Context, Ty, UnificationFailure, arguments, arrow, free_type_vars, instantiate,
    parse_type, returns, type_str,
)

__all__ = [
    "Primitive", "Abstraction", "Library", "Candidate", "hole_candidates",
    "score_program", "score_library", "fit_weights", "register_abstractions",
    "rename_everywhere", "inline", "VALID_NAME",
]

VALID_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
RESERVED = {"lambda", "lam"}


@dataclass(frozen=True)
class Primitive:
    name: str
    ty: Ty
    impl: Any
    doc: str | None = None

    @property
    def arity(self) -> int:
        return len(arguments(self.ty))

    @classmethod
    def of(cls, name: str, ty: str, impl: Any, doc: str | None = None) -> Primitive:
        return cls(name, parse_type(ty), impl, doc)


@dataclass(frozen=True)
class Abstraction:
    anon_name: str
    body: Expr
    ty: Ty
    readable_name: str | None = None
    doc: str | None = None
    slots: int | None = None  # arguments taken; None means every leading binder

    @property
    def name(self) -> str:
        return self.readable_name or self.anon_name

    @property
    def n_slots(self) -> int:
        return self.arity if self.slots is None else self.slots

    @property
    def arity(self) -> int:
        n, b = 0, self.body
        while type(b) is Lam:
            n, b = n + 1, b.body
        return n

    def record(self) -> dict:
        return {
            "anon_name": self.anon_name,
            "readable_name": self.readable_name,
            "doc": self.doc,
            "type": type_str(self.ty),
            "body": to_sexpr(self.body),
            "slots": self.n_slots,
        }


@dataclass(frozen=True)
class Library:
    """Immutable library snapshot. Updates return new instances."""

    domain: str
    base: tuple[Primitive, ...]
    learned: tuple[Abstraction, ...] = ()
    weights: dict[str, float] = field(default_factory=dict)
    var_weight: float | None = None
    next_index: int = 1
    prior_strength: float = 1.0

    def __post_init__(self):
        names = [p.name for p in self.base] + [a.name for a in self.learned]
        if len(set(names)) != len(names):
            dupes = sorted(n for n, c in Counter(names).items() if c > 1)
            raise NameCollision(f"duplicate production names: {dupes}")

    # -- lookup ------------------------------------------------------------

    @cached_property
    def _by_name(self) -> dict[str, Primitive | Abstraction]:
        table: dict[str, Primitive | Abstraction] = {p.name: p for p in self.base}
        for a in self.learned:
            table[a.name] = a
        return table

    @cached_property
    def _aliases(self) -> dict[str, str]:
        return {a.anon_name: a.name for a in self.learned if a.readable_name}

    @property
    def productions(self) -> list[Primitive | Abstraction]:
        return list(self.base) + list(self.learned)

    @cached_property
    def names(self) -> frozenset[str]:
        return frozenset(self._by_name)

    @cached_property
    def base_names(self) -> frozenset[str]:
        return frozenset(p.name for p in self.base)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> Primitive | Abstraction | None:
        found = self._by_name.get(name)
        if found is None and name in self._aliases:
            found = self._by_name[self._aliases[name]]
        return found

    def resolve(self, name: str) -> str | None:
        """Canonical (display) name for ``name`` or a hidden anonymous alias."""
        if name in self._by_name:
            return name
        return self._aliases.get(name)

    def type_of(self, name: str) -> Ty | None:
        p = self.get(name)
        return None if p is None else p.ty

    def abstraction(self, name: str) -> Abstraction | None:
        p = self.get(name)
        return p if isinstance(p, Abstraction) else None

    def parse(self, text: str) -> Expr:
        return parse(text, self.resolve)

    # -- weights -----------------------------------------------------------

    def weight(self, name: str) -> float:
        w = self.weights.get(name)
        return w if w is not None else 1.0 / max(1, len(self._by_name))

    @property
    def variable_weight(self) -> float:
        return self.var_weight if self.var_weight is not None else 1.0 / max(1, len(self._by_name))

    def with_uniform_weights(self) -> Library:
        return replace(self, weights={}, var_weight=None)

    def with_base_only(self) -> Library:
        """L0 with the name counter preserved (deep refactoring restarts here)."""
        return replace(self, learned=(), weights={}, var_weight=None)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "next_index": self.next_index,
            "prior_strength": self.prior_strength,
            "var_weight": self.var_weight,
            "weights": {k: self.weights[k] for k in sorted(self.weights)},
            "abstractions": [a.record() for a in self.learned],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, data: dict, base: Sequence[Primitive]) -> Library:
        lib = cls(
            domain=data["domain"],
            base=tuple(base),
            next_index=data.get("next_index", 1),
            prior_strength=data.get("prior_strength", 1.0),
        )
        learned: list[Abstraction] = []
        for rec in data.get("abstractions", []):
            current = replace(lib, learned=tuple(learned))
            body = parse(rec["body"], current.resolve)
            learned.append(
                Abstraction(
                    anon_name=rec["anon_name"],
                    body=body,
                    ty=parse_type(rec["type"]),
                    readable_name=rec.get("readable_name"),
                    doc=rec.get("doc"),
                    slots=rec.get("slots"),
                )
            )
        return replace(
            lib,
            learned=tuple(learned),
            weights=dict(data.get("weights", {})),
            var_weight=data.get("var_weight"),
        )


# -- grammar ------------------------------------------------------------------


@dataclass
class Candidate:
    """One compatible choice at a hole: a production or a bound variable."""

    head: Expr
    arg_types: list[Ty]
    ctx: Context
    weight: float
    log_prob: float = 0.0


def hole_candidates(lib: Library, request: Ty, env: Sequence[Ty], ctx: Context) -> list[Candidate]:
    """Compatible heads at a non-arrow hole, with per-hole normalized log-probs.

    Order is fixed (base primitives, learned abstractions, then variables
    innermost first) so enumeration and scoring agree exactly.
    """
    out: list[Candidate] = []
    for p in lib.productions:
        c = ctx.copy()
        t = instantiate(p.ty, c)
        try:
            c.unify(returns(t), request)
        except UnificationFailure:
            continue
        out.append(Candidate(Prim(p.name), arguments(t), c, lib.weight(p.name)))
    vw = lib.variable_weight
    for i, vt in enumerate(env):
        c = ctx.copy()
        t = c.resolve(vt)
        try:
            c.unify(returns(t), request)
        except UnificationFailure:
            continue
        out.append(Candidate(BoundVar(i), arguments(t), c, vw))
    total = sum(c.weight for c in out)
    for c in out:
        c.log_prob = math.log(c.weight / total) if c.weight > 0 else -math.inf
    return out


def _head_key(e: Expr):
    return ("v", e.index) if type(e) is BoundVar else ("p", e.name)


def score_program(e: Expr, lib: Library, request: Ty | None = None) -> float:
    """Log-probability of ``e`` under the library's typed PCFG.

    Terms outside the eta-long / beta-normal grammar are scored after eta
    expansion and beta reduction, which keeps the result a log-probability.
    """
    if request is None:
        request = infer_type(e, lib)
    ctx = Context(next_id=_max_var(request) + 1)
    return _score(e, request, [], ctx, lib, 0)


def _max_var(t: Ty) -> int:
    ids = free_type_vars(t)
    return max(ids) if ids else -1


def _score(e: Expr, request: Ty, env: list[Ty], ctx: Context, lib: Library, depth: int) -> float:
    if depth > 500:
        raise InferenceError("term too deep to score")
    request = ctx.resolve(request)
    if type(request) is Arrow:
        body = e.body if type(e) is Lam else App(shift(e, 1), BoundVar(0))
        return _score(body, request.to, [request.frm] + env, ctx, lib, depth + 1)
    if type(e) is Lam:
        # a lambda at a non-arrow hole: refine the request, then score as forced
        a, b = ctx.fresh(), ctx.fresh()
        try:
            ctx.unify(request, Arrow(a, b))
        except UnificationFailure as err:
            raise InferenceError(str(err)) from None
        return _score(e, Arrow(a, b), env, ctx, lib, depth + 1)
    head, args = spine(e)
    if type(head) is Lam:
        reduced = beta(head, args[0])
        for a in args[1:]:
            reduced = App(reduced, a)
        return _score(reduced, request, env, ctx, lib, depth + 1)
    if type(head) is Prim:
        head = Prim(_resolve(lib, head.name))
    cands = hole_candidates(lib, request, env, ctx)
    key = _head_key(head)
    chosen = next(
        (c for c in cands if _head_key(c.head) == key and len(c.arg_types) == len(args)), None
    )
    if chosen is not None:
        logp = chosen.log_prob
        new_ctx = chosen.ctx
        arg_types = chosen.arg_types
    else:
        # head used at a non-syntactic arity: charge it against the hole anyway
        new_ctx = ctx.copy()
        if type(head) is BoundVar:
            if head.index >= len(env):
                raise InferenceError(f"unbound ${head.index}")
            t, w = new_ctx.resolve(env[head.index]), lib.variable_weight
        else:
            t, w = instantiate(lib.type_of(head.name), new_ctx), lib.weight(head.name)
        arg_types = [new_ctx.fresh() for _ in args]
        try:
            new_ctx.unify(t, arrow(*arg_types, request))
        except UnificationFailure as err:
            raise InferenceError(f"{err} at {to_sexpr(e)}") from None
        total = sum(c.weight for c in cands if _head_key(c.head) != key) + w
        logp = math.log(w / total)
    ctx.bindings, ctx.next_id = new_ctx.bindings, new_ctx.next_id
    for a, t in zip(args, arg_types):
        logp += _score(a, t, env, ctx, lib, depth + 1)
    return logp


def _resolve(lib: Library, name: str) -> str:
    r = lib.resolve(name)
    if r is None:
        raise UnknownIdentifier(name)
    return r


def score_library(lib: Library) -> float:
    """Description-length prior on the learned part of the library."""
    return -lib.prior_strength * sum(size(a.body) for a in lib.learned)


def fit_weights(lib: Library, programs: Iterable[Expr], alpha: float = 1.0) -> Library:
    """Laplace-smoothed unigram weights from production usage counts.

    Every primitive/abstraction occurrence is one generation choice; bound
    variable occurrences are pooled into a single variable weight expressed
    on the same scale as the production weights.
    """
    counts: Counter[str] = Counter()
    var_uses = 0
    for prog in programs:
        for _, t in subterms(prog):
            if type(t) is Prim:
                name = lib.resolve(t.name)
                if name is not None:
                    counts[name] += 1
            elif type(t) is BoundVar:
                var_uses += 1
    names = [p.name for p in lib.productions]
    z = sum(counts[n] + alpha for n in names)
    weights = {n: (counts[n] + alpha) / z for n in names}
    return replace(lib, weights=weights, var_weight=(var_uses + alpha) / z)


def register_abstractions(
    lib: Library, bodies: Sequence[Expr], slots: Sequence[int] | None = None
) -> Library:
    """Append abstractions named ``fn_<k>`` from the library's running counter.

    ``slots[i]`` is how many leading binders of ``bodies[i]`` are arguments;
    by default all of them are.
    """
    if slots is not None and len(slots) != len(bodies):
        raise ValueError("slots and bodies differ in length")
    if not bodies:
        return lib
    pending = {f"fn_{lib.next_index + i}" for i in range(len(bodies))}
    current = lib
    for i, body in enumerate(bodies):
        if not is_closed(body):
            raise InferenceError(f"abstraction body is not closed: {to_sexpr(body)}")
        for n in prim_names(body):
            if current.resolve(n) is None:
                if n in pending:
                    raise CycleError(f"body references {n}, which is registered later")
                raise UnknownIdentifier(n)
        ty = infer_type(body, current)
        name = f"fn_{current.next_index}"
        if name in current:
            raise NameCollision(name)
        pending.discard(name)
        current = replace(
            current,
            learned=current.learned + (
                Abstraction(name, body, ty, slots=Abstraction(name, body, ty).n_slots if slots is None else slots[i]),
            ),
            next_index=current.next_index + 1,
        )
    return current.with_uniform_weights()


def _rename_text(text: str | None, old: str, new: str) -> str | None:
    if text is None:
        return None
    return re.sub(rf"(?<![A-Za-z0-9_]){re.escape(old)}(?![A-Za-z0-9_])", new, text)


def rename_everywhere(lib: Library, old_name: str, new_name: str) -> Library:
    """Rename a learned abstraction in the library, its bodies, docs and weights.

    Renaming back to the anonymous name clears ``readable_name``.
    """
    target = lib.abstraction(old_name)
    if target is None:
        raise UnknownIdentifier(old_name)
    old_name = target.name
    if new_name == old_name:
        return lib
    if not VALID_NAME.match(new_name) or new_name in RESERVED:
        raise NameCollision(f"invalid identifier {new_name!r}")
    clash = new_name in lib.names or any(
        a.anon_name == new_name for a in lib.learned if a is not target
    )
    if clash:
        raise NameCollision(f"{new_name!r} already names a production")
    mapping = {old_name: new_name}
    learned = []
    for a in lib.learned:
        if a is target:
            readable = None if new_name == a.anon_name else new_name
            a = replace(a, readable_name=readable)
        learned.append(
            replace(a, body=rename_prims(a.body, mapping), doc=_rename_text(a.doc, old_name, new_name))
        )
    weights = {mapping.get(k, k): v for k, v in lib.weights.items()}
    return replace(lib, learned=tuple(learned), weights=weights)


def inline(e: Expr, lib: Library) -> Expr:
    """Rewrite ``e`` into base primitives, beta-reducing inlined calls."""
    cache: dict[str, Expr] = {}

    def body_of(a: Abstraction) -> Expr:
        if a.anon_name not in cache:
            cache[a.anon_name] = go(a.body)
        return cache[a.anon_name]

    def go(t: Expr) -> Expr:
        match t:
            case Lam(b):
                return Lam(go(b))
            case App():
                head, args = spine(t)
                args = [go(a) for a in args]
                h = go(head) if type(head) is not Prim else head
                a = lib.abstraction(h.name) if type(h) is Prim else None
                if a is not None:
                    h = body_of(a)
                    while args and type(h) is Lam:
                        h = beta(h, args.pop(0))
                out = h
                for x in args:
                    out = App(out, x)
                return out
            case Prim(n):
                a = lib.abstraction(n)
                return body_of(a) if a is not None else t
        return t

    return go(e)
