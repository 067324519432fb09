"""Template-driven task corpus generation."""

from __future__ import annotations

import random
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

from ..errors import LibInduceError
from ..evaluate import evaluate, values_equal
from ..library import Library
from ..tasks import Task
from ..types import parse_type

__all__ = ["Slot", "Template", "CorpusRecipe", "generate_corpus"]


@dataclass(frozen=True)
class Slot:
    """A template hole; ``sample`` returns (description text, program text)."""

    name: str
    sample: Callable[[random.Random], tuple[str, str]]


@dataclass(frozen=True)
class Template:
    family: str
    description: str
    program: str
    slots: tuple[Slot, ...] = ()
    request: str | None = None  # falls back to the recipe's request type
    inputs: Callable[[random.Random], tuple] | None = None

    def instantiate(self, rng: random.Random) -> tuple[str, str]:
        desc, prog = self.description, self.program
        for slot in self.slots:
            text, code = slot.sample(rng)
            desc = desc.replace("{" + slot.name + "}", text)
            prog = prog.replace("{" + slot.name + "}", code)
        return desc, prog


@dataclass(frozen=True)
class CorpusRecipe:
    domain: str
    templates: tuple[Template, ...]
    request: str
    inputs: Callable[[random.Random], tuple]
    seeded: tuple[Template, ...] = ()
    min_seeded: int = 0  # seeded-template tasks guaranteed in the train split
    composed: tuple[Template, ...] = ()
    composed_rate: float = 0.0  # chance a draw comes from ``composed``
    n_examples: int = 6
    min_changed: int = 2  # examples whose output differs from the first input
    changed: Callable[[tuple, Any], bool] = field(
        default=lambda ins, out: not values_equal(ins[0], out)
    )


def _examples(recipe: CorpusRecipe, tpl: Template, program, lib: Library, rng: random.Random):
    sample = tpl.inputs or recipe.inputs
    out: list[tuple[tuple, Any]] = []
    seen: set = set()
    n_changed = 0
    for _ in range(40 * recipe.n_examples):
        if len(out) >= recipe.n_examples and n_changed >= recipe.min_changed:
            break
        ins = sample(rng)
        if ins in seen:
            continue
        try:
            y = evaluate(program, ins, lib)
        except LibInduceError:
            continue
        is_changed = recipe.changed(ins, y)
        if len(out) >= recipe.n_examples:
            if not is_changed:
                continue
            # swap out an unchanged example to make room
            idx = next(i for i, (a, b) in enumerate(out) if not recipe.changed(a, b))
            seen.discard(out[idx][0])
            out.pop(idx)
        seen.add(ins)
        out.append((ins, y))
        n_changed += is_changed
    if len(out) < recipe.n_examples or n_changed < recipe.min_changed:
        return None
    return tuple(out)


def _draw(recipe, templates: Sequence[Template], lib, rng, used: set[str]):
    for _ in range(500):
        pool = templates
        if recipe.composed and templates is recipe.templates and rng.random() < recipe.composed_rate:
            pool = recipe.composed
        tpl = pool[rng.randrange(len(pool))]
        desc, text = tpl.instantiate(rng)
        program = lib.parse(text)
        key = text
        if key in used:
            continue
        examples = _examples(recipe, tpl, program, lib, rng)
        if examples is None:
            continue
        used.add(key)
        request = parse_type(tpl.request or recipe.request)
        return desc, request, examples, text
    raise LibInduceError("template pool exhausted; could not draw a fresh task")


def generate_corpus(
    recipe: CorpusRecipe, lib: Library, seed: int, n_train: int, n_test: int
) -> tuple[list[Task], list[Task]]:
    """Deterministically draw ``n_train`` + ``n_test`` distinct tasks.

    Ground-truth programs are executed on sampled inputs to produce outputs.
    Programs are unique across both splits.
    """
    rng = random.Random(seed)
    used: set[str] = set()
    n_seeded = min(recipe.min_seeded, n_train) if recipe.seeded else 0
    drawn_train = [_draw(recipe, recipe.seeded, lib, rng, used) for _ in range(n_seeded)]
    drawn_train += [_draw(recipe, recipe.templates, lib, rng, used) for _ in range(n_train - n_seeded)]
    rng.shuffle(drawn_train)
    drawn_test = [_draw(recipe, recipe.templates, lib, rng, used) for _ in range(n_test)]

    def tasks(drawn, split):
        return [
            Task(f"{recipe.domain}_{split}_{i:03d}", desc, req, ex, prog)
            for i, (desc, req, ex, prog) in enumerate(drawn)
        ]

    return tasks(drawn_train, "train"), tasks(drawn_test, "test")
