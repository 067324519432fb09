"""Tasks, frontiers and the JSON-lines task corpus format."""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import LibInduceError
from .evaluate import DEFAULT_STEP_BUDGET, evaluate, values_equal
from .expr import Expr, to_sexpr
from .library import Library
from .types import Ty, parse_type, type_str

__all__ = [
    "Task", "FrontierEntry", "Frontier", "decode_value", "encode_value",
    "read_tasks", "write_tasks", "FRONTIER_CAP",
]

FRONTIER_CAP = 5


def decode_value(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(decode_value(x) for x in v)
    return v


def encode_value(v: Any) -> Any:
    if isinstance(v, tuple):
        return [encode_value(x) for x in v]
    return v


@dataclass(frozen=True)
class Task:
    id: str
    description: str
    request: Ty
    examples: tuple[tuple[tuple[Any, ...], Any], ...]
    program: str | None = None  # ground truth, when the corpus ships one

    def __post_init__(self):
        if not self.examples:
            raise ValueError(f"task {self.id} has no examples")

    def check(self, program: Expr, lib: Library, budget: int = DEFAULT_STEP_BUDGET) -> bool:
        """True iff ``program`` reproduces every example exactly."""
        for inputs, output in self.examples:
            try:
                got = evaluate(program, inputs, lib, budget)
            except LibInduceError:
                return False
            if not values_equal(got, output):
                return False
        return True

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "description": self.description,
            "request_type": type_str(self.request),
            "examples": [
                {"inputs": [encode_value(x) for x in ins], "output": encode_value(out)}
                for ins, out in self.examples
            ],
        }
        if self.program is not None:
            out["program"] = self.program
        return out

    @classmethod
    def from_json(cls, d: dict) -> Task:
        return cls(
            id=d["id"],
            description=d["description"],
            request=parse_type(d["request_type"]),
            examples=tuple(
                (tuple(decode_value(x) for x in ex["inputs"]), decode_value(ex["output"]))
                for ex in d["examples"]
            ),
            program=d.get("program"),
        )


def read_tasks(path: str | Path) -> list[Task]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tasks.append(Task.from_json(json.loads(line)))
    return tasks


def write_tasks(path: str | Path, tasks: Iterable[Task]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class FrontierEntry:
    program: Expr
    log_prior: float

    @property
    def text(self) -> str:
        return to_sexpr(self.program)


@dataclass(frozen=True)
class Frontier:
    """Verified solutions for one task, best prior first, unique by print."""

    task_id: str
    entries: tuple[FrontierEntry, ...] = field(default=())

    @classmethod
    def build(cls, task_id: str, entries: Iterable[FrontierEntry], cap: int | None = FRONTIER_CAP) -> Frontier:
        best: dict[str, FrontierEntry] = {}
        for e in entries:
            key = e.text
            if key not in best or e.log_prior > best[key].log_prior:
                best[key] = e
        ordered = sorted(best.values(), key=lambda e: (-e.log_prior, e.text))
        if cap is not None:
            ordered = ordered[:cap]
        return cls(task_id, tuple(ordered))

    def merged(self, more: Sequence[FrontierEntry], cap: int | None = FRONTIER_CAP) -> Frontier:
        return Frontier.build(self.task_id, list(self.entries) + list(more), cap)

    @property
    def empty(self) -> bool:
        return not self.entries

    @property
    def best(self) -> FrontierEntry | None:
        return self.entries[0] if self.entries else None
