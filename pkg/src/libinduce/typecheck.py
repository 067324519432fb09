"""Unification-based type inference over de Bruijn terms."""

from __future__ import annotations

from typing import Protocol

from .errors import InferenceError, UnboundVariable, UnknownIdentifier
from .expr import App, BoundVar, Expr, Lam, MetaVar, Prim, to_sexpr
from .types import Arrow, Context, Ty, UnificationFailure, canonical, free_type_vars, instantiate

__all__ = ["infer_type", "infer_in_context", "TypeEnv"]


class TypeEnv(Protocol):
    def type_of(self, name: str) -> Ty | None: ...


def infer_in_context(e: Expr, lib: TypeEnv, ctx: Context, env: list[Ty] | None = None) -> Ty:
    """Infer ``e``'s type, threading bindings through ``ctx`` (mutated)."""
    env = env or []

    def go(t: Expr, env: list[Ty]) -> Ty:
        match t:
            case BoundVar(i):
                if i >= len(env):
                    raise UnboundVariable(f"${i} under {len(env)} binder(s)")
                return env[i]
            case Prim(name):
                scheme = lib.type_of(name)
                if scheme is None:
                    raise UnknownIdentifier(name)
                return instantiate(scheme, ctx)
            case MetaVar():
                return ctx.fresh()
            case Lam(body):
                a = ctx.fresh()
                return Arrow(a, go(body, [a] + env))
            case App(f, x):
                tf = go(f, env)
                tx = go(x, env)
                r = ctx.fresh()
                try:
                    ctx.unify(tf, Arrow(tx, r))
                except UnificationFailure as err:
                    raise InferenceError(f"{err} in {_show(t)}") from None
                return r
        raise TypeError(f"not a term: {t!r}")

    return go(e, env)


def _show(e: Expr) -> str:
    text = to_sexpr(e, allow_meta=True)
    return text if len(text) <= 120 else text[:117] + "..."


def infer_type(e: Expr, lib: TypeEnv, request: Ty | None = None) -> Ty:
    """Most general type of ``e``, optionally constrained to ``request``."""
    ctx = Context()
    if request is not None:
        ctx.next_id = max([0] + [v + 1 for v in free_type_vars(request)])
    t = infer_in_context(e, lib, ctx)
    if request is not None:
        try:
            ctx.unify(t, request)
        except UnificationFailure as err:
            raise InferenceError(f"program does not have requested type: {err}") from None
    return canonical(ctx.resolve(t))

