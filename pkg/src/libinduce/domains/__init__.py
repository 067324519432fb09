"""Bundled domains and their task corpora.

A domain provides base primitives, a prompt header, a corpus recipe and two
bundled JSON-lines corpora (train/test). A third domain needs the same four
pieces plus an entry in ``_REGISTRY``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..errors import CorpusValidationError, LibInduceError
from ..library import Library, Primitive
from ..tasks import Task, read_tasks, write_tasks
from ..typecheck import infer_type
from ..types import Context, type_str
from . import stringrw, toylist
from .corpus import CorpusRecipe, Slot, Template, generate_corpus

__all__ = [
    "DomainSpec", "load_domain", "domain_names", "recipe_for", "write_corpus",
    "validate_tasks", "words", "CorpusRecipe", "Slot", "Template", "generate_corpus",
    "DATA_DIR", "CORPUS_SEED",
]

DATA_DIR = Path(str(resources.files(__package__) / "data"))
CORPUS_SEED = 2024
N_TRAIN, N_TEST = 50, 30


@lru_cache(maxsize=1)
def words() -> tuple[str, ...]:
    text = (DATA_DIR / "words.txt").read_text(encoding="utf-8")
    return tuple(w for w in text.split() if w)


def _word_input(rng: random.Random) -> tuple:
    pool = words()
    return (pool[rng.randrange(len(pool))],)


@dataclass(frozen=True)
class DomainSpec:
    name: str
    primitives: tuple[Primitive, ...]
    header: str
    train_path: Path
    test_path: Path
    search_timeout: float
    semantics: str
    doc_names: dict[str, str] = field(default_factory=dict)
    train: tuple[Task, ...] = ()
    test: tuple[Task, ...] = ()

    def library(self) -> Library:
        return Library(self.name, self.primitives)

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "header": self.header,
            "semantics": self.semantics,
            "search_timeout": self.search_timeout,
            "corpus": {"train": self.train_path.name, "test": self.test_path.name, "seed": CORPUS_SEED},
            "primitives": [
                {"name": p.name, "type": type_str(p.ty), "doc": p.doc} for p in self.primitives
            ],
        }


_REGISTRY = {
    "stringrw": dict(
        module=stringrw,
        timeout=30.0,
        semantics=(
            "Reconstructed semantics. tsubstr values are regex sources. regex_split p s "
            "scans s left to right, emitting each non-empty match of p and each maximal "
            "run of unmatched characters. regex_match p s is a full match. regex_or and "
            "regex_not build alternation and single-character complement. regex_append "
            "adds at the end; regex_tail is the last element; regex_reverse_cdr drops it."
        ),
    ),
    "toylist": dict(
        module=toylist,
        timeout=10.0,
        semantics="Integers are unbounded; car/cdr of an empty list is a runtime error.",
    ),
}


def domain_names() -> list[str]:
    return sorted(_REGISTRY)


def recipe_for(name: str) -> CorpusRecipe:
    entry = _entry(name)
    mod = entry["module"]
    match name:
        case "stringrw":
            return CorpusRecipe(
                name, tuple(mod.TEMPLATES), mod.REQUEST, _word_input,
                seeded=tuple(mod.SEED_TEMPLATES), min_seeded=mod.MIN_SEED_TASKS,
                composed=tuple(mod.COMPOSED_TEMPLATES), composed_rate=mod.COMPOSED_RATE,
            )
        case _:
            return CorpusRecipe(name, tuple(mod.TEMPLATES), mod.REQUEST, mod.INPUTS, min_changed=3)


def _entry(name: str) -> dict:
    if name not in _REGISTRY:
        raise LibInduceError(f"unknown domain {name!r}; choose from {domain_names()}")
    return _REGISTRY[name]


def _spec(name: str, data_dir: Path) -> DomainSpec:
    entry = _entry(name)
    mod = entry["module"]
    return DomainSpec(
        name=name,
        primitives=tuple(mod.primitives()),
        header=mod.HEADER,
        train_path=data_dir / f"{name}.train.jsonl",
        test_path=data_dir / f"{name}.test.jsonl",
        search_timeout=entry["timeout"],
        semantics=entry["semantics"],
        doc_names=dict(getattr(mod, "DOC_NAMES", {})),
    )


def validate_tasks(tasks: list[Task], lib: Library) -> None:
    """Every ground truth must parse, have the request type and solve its task."""
    failing: list[str] = []
    ids: set[str] = set()
    for t in tasks:
        if t.id in ids:
            failing.append(t.id)
            continue
        ids.add(t.id)
        if t.program is None:
            continue
        try:
            prog = lib.parse(t.program)
            infer_type(prog, lib, t.request)
        except LibInduceError:
            failing.append(t.id)
            continue
        if not t.check(prog, lib):
            failing.append(t.id)
    if failing:
        raise CorpusValidationError(failing)


def load_domain(name: str, data_dir: str | Path | None = None, validate: bool = True) -> DomainSpec:
    spec = _spec(name, Path(data_dir) if data_dir else DATA_DIR)
    train = read_tasks(spec.train_path) if spec.train_path.exists() else []
    test = read_tasks(spec.test_path) if spec.test_path.exists() else []
    if validate:
        validate_tasks(train + test, spec.library())
    return DomainSpec(**{**spec.__dict__, "train": tuple(train), "test": tuple(test)})


def write_corpus(
    name: str, out_dir: str | Path, seed: int = CORPUS_SEED, n_train: int = N_TRAIN, n_test: int = N_TEST
) -> tuple[Path, Path]:
    """Generate a domain's corpora and manifest into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = _spec(name, out)
    train, test = generate_corpus(recipe_for(name), spec.library(), seed, n_train, n_test)
    write_tasks(spec.train_path, train)
    write_tasks(spec.test_path, test)
    manifest = spec.manifest()
    manifest["corpus"]["seed"] = seed
    (out / f"{name}.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return spec.train_path, spec.test_path
