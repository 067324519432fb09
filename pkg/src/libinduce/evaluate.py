"""Call-by-value evaluation with a step budget.

Values are plain Python data (str, int, bool, tuples for lists) plus
``Closure`` and ``Partial`` for functions. Learned abstractions are evaluated
by inlining their bodies. Primitive failures surface as ``EvaluationError``
and budget exhaustion as ``BudgetExceeded``; nothing else escapes.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

from .errors import BudgetExceeded, EvaluationError, UnknownIdentifier
from .expr import App, BoundVar, Expr, Lam, MetaVar, Prim
from .library import Abstraction, Library

__all__ = ["evaluate", "Machine", "Closure", "Partial", "DEFAULT_STEP_BUDGET", "values_equal"]

DEFAULT_STEP_BUDGET = 10_000


class Closure:
    __slots__ = ("body", "env", "machine")

    def __init__(self, body: Expr, env, machine: Machine):
        self.body = body
        self.env = env
        self.machine = machine

    def __call__(self, x):
        return self.machine.apply(self, x)

    def __repr__(self):
        return "<closure>"


class Partial:
    __slots__ = ("prim", "args", "machine")

    def __init__(self, prim, args: tuple, machine: Machine):
        self.prim = prim
        self.args = args
        self.machine = machine

    def __call__(self, x):
        return self.machine.apply(self, x)

    def __repr__(self):
        return f"<{self.prim.name}/{len(self.args)}>"


class Machine:
    """Interpreter state for one evaluation: library, step counter, budget."""

    def __init__(self, lib: Library, budget: int = DEFAULT_STEP_BUDGET):
        self.lib = lib
        self.budget = budget
        self.steps = 0
        self._abstractions: dict[str, Any] = {}

    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise BudgetExceeded(f"step budget {self.budget} exhausted")

    def eval(self, e: Expr, env) -> Any:
        self.tick()
        t = type(e)
        if t is App:
            f = self.eval(e.fun, env)
            x = self.eval(e.arg, env)
            return self.apply(f, x)
        if t is BoundVar:
            i, cell = e.index, env
            while i:
                if cell is None:
                    raise EvaluationError(f"unbound variable ${e.index}")
                cell, i = cell[1], i - 1
            if cell is None:
                raise EvaluationError(f"unbound variable ${e.index}")
            return cell[0]
        if t is Lam:
            return Closure(e.body, env, self)
        if t is Prim:
            return self.constant(e.name)
        if t is MetaVar:
            raise EvaluationError("cannot evaluate a pattern metavariable")
        raise EvaluationError(f"not a term: {e!r}")

    def constant(self, name: str) -> Any:
        p = self.lib.get(name)
        if p is None:
            raise UnknownIdentifier(name)
        if isinstance(p, Abstraction):
            key = p.anon_name
            if key not in self._abstractions:
                self._abstractions[key] = self.eval(p.body, None)
            return self._abstractions[key]
        if p.arity == 0:
            return p.impl
        return Partial(p, (), self)

    def apply(self, f: Any, x: Any) -> Any:
        self.tick()
        if type(f) is Closure:
            return self.eval(f.body, (x, f.env))
        if type(f) is Partial:
            args = f.args + (x,)
            if len(args) < f.prim.arity:
                return Partial(f.prim, args, self)
            try:
                return f.prim.impl(*args)
            except EvaluationError:
                raise
            except RecursionError:
                raise BudgetExceeded("recursion depth exhausted") from None
            except Exception as err:
                raise EvaluationError(f"{f.prim.name}: {type(err).__name__}: {err}") from None
        raise EvaluationError(f"cannot apply non-function value {f!r}")


def evaluate(
    e: Expr, args: Sequence[Any], lib: Library, budget: int = DEFAULT_STEP_BUDGET
) -> Any:
    """Evaluate ``e`` applied to ``args``."""
    m = Machine(lib, budget)
    try:
        v = m.eval(e, None)
        for a in args:
            v = m.apply(v, a)
    except RecursionError:
        raise BudgetExceeded("recursion depth exhausted") from None
    return v


def values_equal(a: Any, b: Any) -> bool:
    """Exact comparison; function values never compare equal."""
    if isinstance(a, (Closure, Partial)) or isinstance(b, (Closure, Partial)):
        return False
    return type(a) is type(b) and a == b
