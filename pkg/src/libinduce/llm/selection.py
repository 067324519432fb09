"""Choosing which solved tasks appear as few-shot exemplars."""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "Exemplar", "RandomSelection", "CosineSelection", "SelectionStrategy",
    "cosine", "bag_of_words", "select_examples",
]


@dataclass(frozen=True)
class Exemplar:
    task_id: str
    description: str
    program: str


def cosine(x: Sequence[float], y: Sequence[float]) -> float:
    dot = sum(a * b for a, b in zip(x, y))
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    if nx == 0 or ny == 0:
        return 0.0
    return max(-1.0, min(1.0, dot / (nx * ny)))


def bag_of_words(descriptions: Sequence[str]) -> dict[str, list[float]]:
    """Word-count vectors over the shared vocabulary; an offline embedding stand-in."""
    tokenized = {d: Counter(re.findall(r"[a-z]+", d.lower())) for d in descriptions}
    vocab = sorted({w for c in tokenized.values() for w in c})
    return {d: [float(c[w]) for w in vocab] for d, c in tokenized.items()}


@dataclass(frozen=True)
class RandomSelection:
    seed: int = 0

    def order(self, pool: Sequence[Exemplar], target_description: str, salt: str = "") -> list[Exemplar]:
        rng = random.Random(f"{self.seed}:{salt}")
        out = list(pool)
        rng.shuffle(out)
        return out


@dataclass(frozen=True)
class CosineSelection:
    """Most similar descriptions first; ties keep task-id order.

    ``vectors`` maps description text to an embedding. Descriptions without a
    vector score 0.
    """

    vectors: Mapping[str, Sequence[float]] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> CosineSelection:
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def bag_of_words(cls, descriptions: Sequence[str]) -> CosineSelection:
        return cls(bag_of_words(descriptions))

    def score(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        va, vb = self.vectors.get(a), self.vectors.get(b)
        if va is None or vb is None:
            return 0.0
        return cosine(va, vb)

    def order(self, pool: Sequence[Exemplar], target_description: str, salt: str = "") -> list[Exemplar]:
        scored = [(-self.score(e.description, target_description), e.task_id, e) for e in pool]
        scored.sort(key=lambda s: (s[0], s[1]))
        return [e for _, _, e in scored]


SelectionStrategy = RandomSelection | CosineSelection


def select_examples(
    solved: Sequence[Exemplar],
    target_description: str,
    strategy: SelectionStrategy,
    budget: int,
    cost=lambda e: 0,
    salt: str = "",
) -> list[Exemplar]:
    """Strategy order, cut at the first exemplar that would overflow ``budget``."""
    out: list[Exemplar] = []
    used = 0
    for e in strategy.order(solved, target_description, salt):
        c = cost(e)
        if used + c > budget:
            break
        out.append(e)
        used += c
    return out
