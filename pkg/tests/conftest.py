from __future__ import annotations

import pytest
from hypothesis import strategies as st

from libinduce.domains import load_domain
from libinduce.domains.toylist import arith_primitives
from libinduce.expr import App, BoundVar, Expr, Lam, Prim
from libinduce.library import Library


@pytest.fixture(scope="session")
def toylist():
    return load_domain("toylist")


@pytest.fixture(scope="session")
def stringrw():
    return load_domain("stringrw")


@pytest.fixture(scope="session")
def arith() -> Library:
    """The {0, 1, +} fragment of the toy domain, uniform weights."""
    return Library("arith", tuple(arith_primitives()))


def closed_terms(names=("a", "b", "f", "+"), max_leaves: int = 12):
    """Closed de Bruijn terms (not necessarily well typed)."""

    @st.composite
    def term(draw, depth: int, budget: int) -> Expr:
        choices = ["prim"] + (["var"] if depth else [])
        if budget >= 2:
            choices.append("lam")
        if budget >= 3:
            choices.append("app")
        kind = draw(st.sampled_from(choices))
        match kind:
            case "prim":
                return Prim(draw(st.sampled_from(names)))
            case "var":
                return BoundVar(draw(st.integers(0, depth - 1)))
            case "lam":
                return Lam(draw(term(depth + 1, budget - 1)))
            case _:
                left = draw(st.integers(1, budget - 2))
                return App(draw(term(depth, left)), draw(term(depth, budget - 1 - left)))

    return st.integers(1, max_leaves).flatmap(lambda n: term(0, n))
