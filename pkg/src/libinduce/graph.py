"""DOT export of a library's invocation structure.

An edge ``a -> b`` means ``a`` calls ``b``. Solved tasks appear as extra
nodes pointing at the abstractions their best program uses, at most
``tasks_per_abstraction`` of them per abstraction.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence

from .expr import Expr, prim_names, size, to_sexpr
from .library import Library

__all__ = ["export_graph", "invocation_edges"]


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def invocation_edges(lib: Library) -> list[tuple[str, str]]:
    """(caller, callee) pairs among the library's productions, by display name."""
    edges = set()
    for a in lib.learned:
        for name in prim_names(a.body):
            callee = lib.get(name)
            if callee is not None and callee.name != a.name:
                edges.add((a.name, callee.name))
    return sorted(edges)


def export_graph(
    lib: Library,
    solutions: Mapping[str, Sequence[Expr]] | None = None,
    tasks_per_abstraction: int = 3,
    descriptions: Mapping[str, str] | None = None,
) -> str:
    """Render ``lib`` (and sampled task solutions) as a DOT digraph.

    ``solutions`` maps task ids to verified programs; the smallest program
    per task decides which abstractions it uses. Tasks are sampled per
    abstraction by program size, then id, so the output is deterministic.
    """
    lines = ["digraph library {", "  rankdir=LR;", "  node [fontname=Helvetica];"]
    for p in lib.base:
        lines.append(f"  {_quote(p.name)} [shape=box, style=rounded];")
    for a in lib.learned:
        label = a.name if a.readable_name is None else f"{a.name}\\n({a.anon_name})"
        lines.append(f"  {_quote(a.name)} [shape=ellipse, style=filled, fillcolor=lightblue, label={_quote(label)}];")
    for caller, callee in invocation_edges(lib):
        lines.append(f"  {_quote(caller)} -> {_quote(callee)};")

    users: dict[str, list[tuple[int, str]]] = {a.name: [] for a in lib.learned}
    for tid, programs in sorted((solutions or {}).items()):
        if not programs:
            continue
        best = min(programs, key=lambda p: (size(p), to_sexpr(p)))
        for name in prim_names(best):
            target = lib.abstraction(name)
            if target is not None:
                users[target.name].append((size(best), tid))
    shown: dict[str, list[str]] = {}
    for abstraction, found in users.items():
        for _, tid in sorted(set(found))[:tasks_per_abstraction]:
            shown.setdefault(tid, []).append(abstraction)
    for tid in sorted(shown):
        label = tid if descriptions is None or tid not in descriptions else f"{tid}\\n{descriptions[tid]}"
        lines.append(f"  {_quote('task:' + tid)} [shape=note, label={_quote(label)}];")
        for abstraction in sorted(shown[tid]):
            lines.append(f"  {_quote('task:' + tid)} -> {_quote(abstraction)} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def solutions_from_checkpoint(row: Mapping, lib: Library) -> dict[str, list[Expr]]:
    """Task programs from one checkpoint record (see ``orchestrator.read_checkpoints``)."""
    return {tid: [lib.parse(p) for p, _ in entries] for tid, entries in row["frontiers"].items()}


def load_solutions(path: str, lib: Library) -> dict[str, list[Expr]]:
    """Programs from a JSON file mapping task id to a list of program texts."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {tid: [lib.parse(p if isinstance(p, str) else p[0]) for p in progs] for tid, progs in data.items()}
