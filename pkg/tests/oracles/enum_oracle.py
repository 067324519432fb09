"""Brute-force enumeration of eta-long programs over {0, 1, +}.

Independent of the library and search code: programs are built as strings
from the grammar directly, with sizes computed from the construction.
"""

from __future__ import annotations

from functools import lru_cache


@lru_cache(maxsize=None)
def int_terms(n_vars: int, size: int) -> tuple[tuple[str, float], ...]:
    """(text, probability) of every int-typed term of exactly ``size`` nodes.

    Uniform weights: every int hole has 3 + n_vars equally likely choices.
    """
    p = 1.0 / (3 + n_vars)
    out: list[tuple[str, float]] = []
    if size == 1:
        out += [("0", p), ("1", p)]
        out += [(f"${i}", p) for i in range(n_vars)]
    # (+ a b) has 2 App nodes and the head: size 3 + |a| + |b|
    for sa in range(1, size - 3):
        sb = size - 3 - sa
        if sb < 1:
            continue
        for ta, pa in int_terms(n_vars, sa):
            for tb, pb in int_terms(n_vars, sb):
                out.append((f"(+ {ta} {tb})", p * pa * pb))
    return tuple(out)


def programs(n_args: int, max_size: int) -> dict[str, float]:
    """Every program of type int^n_args -> int with size <= max_size."""
    out: dict[str, float] = {}
    for body_size in range(1, max_size - n_args + 1):
        for text, prob in int_terms(n_args, body_size):
            for _ in range(n_args):
                text = f"(lambda {text})"
            out[text] = prob
    return out

