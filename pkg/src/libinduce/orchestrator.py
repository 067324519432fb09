"""The online learning loop, offline evaluation and run persistence.

Each online iteration runs the enabled stages in a fixed order: language-guided
solving, enumerative search, compression of the whole solution set from the
base DSL, rewriting of every frontier, then documentation. Everything written
to the checkpoint log is a function of the config and seed alone; wall-clock timings
go to a separate file.
"""

from __future__ import annotations

import json
import logging
import random
import time
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .autodoc import AutoDocConfig, base_body, document_library
from .compression import CompressionConfig, compress, rewrite, well_typed_in
from .domains import DomainSpec, load_domain
from .errors import LibInduceError
from .expr import Expr, rename_prims, size, to_sexpr
from .library import Library, fit_weights, inline, register_abstractions, score_program
from .llm.backends import BackendConfig, RetryingBackend, make_backend
from .llm.ledger import UsageLedger
from .llm.selection import CosineSelection, RandomSelection
from .llm.solver import solve_with_llm
from .search import OfflineReport, SearchBudget, offline_eval, search_tasks
from .tasks import Frontier, FrontierEntry, Task

__all__ = [
    "Conditions", "CONDITIONS", "PROFILES", "RunConfig", "RunState", "run_online", "resume_run",
    "run_offline", "OfflineConfig", "load_checkpoint", "read_checkpoints", "STAGES",
]

log = logging.getLogger(__name__)

STAGES = ("llm_solve", "search", "compress", "rewrite", "document")


@dataclass(frozen=True)
class Conditions:
    llm_solver: bool = True
    enum_search: bool = True
    compression: bool = True
    autodoc: bool = True

    def __post_init__(self):
        if not (self.llm_solver or self.enum_search):
            raise ValueError("at least one solver (llm_solver or enum_search) must be enabled")


# the model list of the main results table
CONDITIONS: dict[str, Conditions] = {
    "dreamcoder": Conditions(llm_solver=False, enum_search=True, compression=True, autodoc=False),
    "llm_solver": Conditions(llm_solver=True, enum_search=False, compression=False, autodoc=False),
    "llm_solver_search": Conditions(llm_solver=True, enum_search=True, compression=False, autodoc=False),
    "lilo_no_search_no_autodoc": Conditions(llm_solver=True, enum_search=False, compression=True, autodoc=False),
    "lilo_no_search": Conditions(llm_solver=True, enum_search=False, compression=True, autodoc=True),
    "lilo": Conditions(llm_solver=True, enum_search=True, compression=True, autodoc=True),
}

PROFILES: dict[str, dict[str, Any]] = {
    "desk": {"batch_size": 24, "search_timeout": 30.0, "max_candidates": 20_000},
    "full": {"batch_size": 96, "search_timeout": 1000.0, "max_candidates": None},
}

_DEFAULT_ITERATIONS = {"stringrw": 16}

# ledger stage names for backend request purposes
_STAGE_OF = {"solve": "llm_solve", "autodoc": "autodoc"}


@dataclass(frozen=True)
class RunConfig:
    domain: str = "toylist"
    condition: str = "lilo"
    conditions: Conditions | None = None  # overrides the preset named by ``condition``
    profile: str = "desk"
    n_iterations: int | None = None  # None: 16 for stringrw, 10 otherwise
    batch_size: int | None = None  # None: from the profile
    seed: int = 0
    compression: CompressionConfig = field(default_factory=CompressionConfig)
    search: SearchBudget | None = None  # None: from the profile
    backend: BackendConfig = field(default_factory=BackendConfig)
    autodoc: AutoDocConfig = field(default_factory=AutoDocConfig)
    eval_every: int = 3
    eval_test: bool = True
    selection: str = "random"  # or "cosine"
    workers: int = 1
    data_dir: str | None = None

    def __post_init__(self):
        if self.conditions is None and self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}; choose from {sorted(CONDITIONS)}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.selection not in ("random", "cosine"):
            raise ValueError("selection must be 'random' or 'cosine'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def flags(self) -> Conditions:
        return self.conditions or CONDITIONS[self.condition]

    @property
    def iterations(self) -> int:
        return self.n_iterations if self.n_iterations is not None else _DEFAULT_ITERATIONS.get(self.domain, 10)

    @property
    def batch(self) -> int:
        return self.batch_size if self.batch_size is not None else PROFILES[self.profile]["batch_size"]

    def search_budget(self, domain: DomainSpec) -> SearchBudget:
        if self.search is not None:
            return self.search
        prof = PROFILES[self.profile]
        timeout = domain.search_timeout if self.profile == "desk" else prof["search_timeout"]
        return SearchBudget(timeout=timeout, max_candidates=prof["max_candidates"])

    # -- (de)serialization ----------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["conditions"] = None if self.conditions is None else asdict(self.conditions)
        out["compression"] = asdict(self.compression)
        out["search"] = None if self.search is None else asdict(self.search)
        out["backend"] = self.backend.to_dict()
        out["autodoc"] = asdict(self.autodoc)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunConfig:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        if isinstance(data.get("conditions"), Mapping):
            data["conditions"] = Conditions(**data["conditions"])
        if isinstance(data.get("compression"), Mapping):
            data["compression"] = CompressionConfig(**data["compression"])
        if isinstance(data.get("search"), Mapping):
            data["search"] = SearchBudget(**data["search"])
        if isinstance(data.get("backend"), Mapping):
            data["backend"] = BackendConfig.from_dict(data["backend"])
        if isinstance(data.get("autodoc"), Mapping):
            data["autodoc"] = AutoDocConfig(**data["autodoc"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            return cls.from_dict(yaml.safe_load(text) or {})
        return cls.from_dict(json.loads(text))


# -- state ----------------------------------------------------------------------


@dataclass
class RunState:
    iteration: int
    lib: Library
    frontiers: dict[str, Frontier]
    cursor: int = 0
    ledger: UsageLedger = field(default_factory=UsageLedger)
    prior_docs: dict[str, tuple[str, str | None]] = field(default_factory=dict)
    metrics: list[dict] = field(default_factory=list)

    def solved(self) -> set[str]:
        return {k for k, f in self.frontiers.items() if not f.empty}

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "library": self.lib.to_json(),
            "frontiers": {
                k: [[e.text, e.log_prior] for e in f.entries]
                for k, f in sorted(self.frontiers.items()) if not f.empty
            },
            "rng": {"cursor": self.cursor},
            "prior_docs": {k: list(v) for k, v in sorted(self.prior_docs.items())},
            "metrics": self.metrics,
            "ledger": self.ledger.to_json(timings=False),
        }

    @classmethod
    def from_json(cls, data: dict, domain: DomainSpec) -> RunState:
        lib = Library.from_json(data["library"], domain.primitives)
        frontiers = {
            k: Frontier(k, tuple(FrontierEntry(lib.parse(p), lp) for p, lp in entries))
            for k, entries in data["frontiers"].items()
        }
        return cls(
            iteration=data["iteration"],
            lib=lib,
            frontiers=frontiers,
            cursor=data["rng"]["cursor"],
            ledger=UsageLedger.from_json(data["ledger"]),
            prior_docs={k: (v[0], v[1]) for k, v in data.get("prior_docs", {}).items()},
            metrics=list(data.get("metrics", [])),
        )


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n"


class _RunFiles:
    CHECKPOINTS = "checkpoints.jsonl"

    def __init__(self, run_dir: Path):
        self.dir = run_dir
        (run_dir / "libraries").mkdir(parents=True, exist_ok=True)

    def append(self, name: str, row: dict) -> None:
        with (self.dir / name).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    def truncate(self, iteration: int) -> None:
        """Drop rows of an iteration that did not reach its checkpoint."""
        for name in ("log.jsonl", "metrics.jsonl", "timings.jsonl"):
            path = self.dir / name
            if path.exists():
                keep = [line for line in path.read_text(encoding="utf-8").splitlines()
                        if line.strip() and json.loads(line)["iteration"] <= iteration]
                path.write_text("".join(line + "\n" for line in keep), encoding="utf-8")

    def checkpoint(self, state: RunState) -> None:
        self.append(self.CHECKPOINTS, state.to_json())
        (self.dir / "libraries" / f"iter_{state.iteration:03d}.library.json").write_text(
            state.lib.dumps(), encoding="utf-8"
        )
        (self.dir / "library.json").write_text(state.lib.dumps(), encoding="utf-8")


def read_checkpoints(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / _RunFiles.CHECKPOINTS
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def load_checkpoint(run_dir: str | Path, domain: DomainSpec, iteration: int | None = None) -> RunState:
    """State after ``iteration`` (default: the latest) of the run in ``run_dir``."""
    rows = read_checkpoints(run_dir)
    if iteration is not None:
        rows = [r for r in rows if r["iteration"] == iteration]
    if not rows:
        raise FileNotFoundError(f"no checkpoint in {run_dir}")
    return RunState.from_json(rows[-1], domain)


# -- the loop -------------------------------------------------------------------


def _batch(order: Sequence[Task], solved: set[str], cursor: int, n: int) -> list[Task]:
    """Unsolved tasks first, rotating through them; solved tasks fill any remainder."""
    unsolved = [t for t in order if t.id not in solved]
    done = [t for t in order if t.id in solved]
    if unsolved:
        k = cursor % len(unsolved)
        unsolved = unsolved[k:] + unsolved[:k]
    return (unsolved + done)[:n]


class _Loop:
    def __init__(self, cfg: RunConfig, domain: DomainSpec, files: _RunFiles, backend=None):
        self.cfg = cfg
        self.domain = domain
        self.files = files
        self.flags = cfg.flags
        self.train = list(domain.train)
        self.test = list(domain.test)
        self.by_id = {t.id: t for t in self.train + self.test}
        self.descriptions = {t.id: t.description for t in self.train + self.test}
        self.order = list(self.train)
        random.Random(cfg.seed).shuffle(self.order)
        self.budget = cfg.search_budget(domain)
        self.base = domain.library()
        if backend is None and (self.flags.llm_solver or self.flags.autodoc):
            truth = {t.description: t.program for t in self.train + self.test if t.program}
            backend = make_backend(cfg.backend, truth, domain.doc_names)
        self.backend = backend
        self.strategy_cosine = (
            CosineSelection.bag_of_words(sorted(set(self.descriptions.values())))
            if cfg.selection == "cosine" else None
        )

    # helpers ----------------------------------------------------------------

    def event(self, it: int, stage: str, status: str, **info) -> None:
        self.files.append("log.jsonl", {"iteration": it, "stage": stage, "status": status, **info})

    def strategy(self, it: int):
        return self.strategy_cosine or RandomSelection(self.cfg.seed * 100_003 + it)

    def rescore(self, state: RunState, frontiers: Mapping[str, Frontier]) -> dict[str, Frontier]:
        out = {}
        for tid, f in frontiers.items():
            task = self.by_id[tid]
            entries = [FrontierEntry(e.program, score_program(e.program, state.lib, task.request)) for e in f.entries]
            out[tid] = Frontier.build(tid, entries)
        return out

    def merge(self, state: RunState, additions: Mapping[str, Sequence[FrontierEntry]]) -> int:
        new = 0
        for tid, entries in additions.items():
            if not entries:
                continue
            old = state.frontiers.get(tid, Frontier(tid))
            new += old.empty
            state.frontiers[tid] = old.merged(list(entries))
        return new

    def best_programs(self, state: RunState) -> list[tuple[str, Expr]]:
        return [(tid, f.best.program) for tid, f in sorted(state.frontiers.items()) if f.best is not None]

    # stages ----------------------------------------------------------------

    def llm_stage(self, state: RunState, it: int, tasks: Sequence[Task], timings: dict) -> dict:
        start = time.perf_counter()
        result = solve_with_llm(
            tasks, state.frontiers, self.descriptions, state.lib, self.domain.header, self.cfg.backend,
            self.backend, self.strategy(it), state.ledger, it,
        )
        timings["llm_solve"] = time.perf_counter() - start
        return result.additions

    def search_stage(self, state: RunState, it: int, tasks: Sequence[Task], timings: dict):
        start = time.perf_counter()
        programs = [p for _, p in self.best_programs(state)]
        lib = fit_weights(state.lib, programs) if programs else state.lib
        result = search_tasks(lib, tasks, self.budget, self.cfg.workers)
        timings["search"] = time.perf_counter() - start
        return {f.task_id: list(f.entries) for f in result.frontiers if not f.empty}, result.candidates

    def solve(self, state: RunState, it: int, tasks: list[Task], timings: dict, record: bool) -> dict[str, list]:
        """Run the enabled solvers on ``tasks``; returns verified additions."""
        found: dict[str, list[FrontierEntry]] = {}
        if self.flags.llm_solver and tasks:
            try:
                found.update(self.llm_stage(state, it, tasks, timings))
                if record:
                    self.event(it, "llm_solve", "run", tasks=len(tasks), solved=len(found))
            except LibInduceError as err:
                state.ledger.record_failure(it, "llm_solve", "*", "stage_error", str(err))
                if record:
                    self.event(it, "llm_solve", "failed", error=str(err)[:200])
        elif record:
            self.event(it, "llm_solve", "skipped")
        remaining = [t for t in tasks if t.id not in found]
        if self.flags.enum_search and remaining:
            more, n = self.search_stage(state, it, remaining, timings)
            found.update(more)
            if record:
                self.event(it, "search", "run", tasks=len(remaining), solved=len(more), candidates=n)
        elif record:
            self.event(it, "search", "skipped" if not self.flags.enum_search else "nothing_to_do")
        return found

    def refactor(self, state: RunState, it: int, timings: dict) -> dict:
        """Compress the best solutions from the base DSL and rewrite every frontier."""
        solved = self.best_programs(state)
        corpus = [inline(p, state.lib) for _, p in solved]
        before = sum(size(p) for p in corpus)
        info = {"corpus_size_before": before, "corpus_size_after": before, "compression_ratio": 1.0}
        if not self.flags.compression:
            self.event(it, "compress", "skipped")
            self.event(it, "rewrite", "skipped")
            return info
        start = time.perf_counter()
        base = state.lib.with_base_only()
        result = compress(corpus, self.cfg.compression, first_index=base.next_index, accept=well_typed_in(base))
        new_lib = register_abstractions(base, result.bodies, result.slots)
        timings["compress"] = time.perf_counter() - start
        after = sum(size(p) for p in result.rewritten)
        info.update(corpus_size_after=after, compression_ratio=before / after if after else 1.0)
        self.event(it, "compress", "run", programs=len(corpus), abstractions=len(result.bodies),
                   steps=[s.to_json() for s in result.steps])

        start = time.perf_counter()
        rewritten: dict[str, Frontier] = {}
        fallbacks = 0
        for tid, f in sorted(state.frontiers.items()):
            task = self.by_id[tid]
            originals = [inline(e.program, state.lib) for e in f.entries]
            new = rewrite(new_lib, originals)
            entries = []
            for orig, prog, old in zip(originals, new, f.entries):
                if not task.check(prog, new_lib):
                    fallbacks += 1
                    state.ledger.record_failure(it, "rewrite", tid, "not_equivalent", to_sexpr(prog))
                    prog = orig
                entries.append(FrontierEntry(prog, old.log_prior))
            rewritten[tid] = Frontier(tid, tuple(entries))
        timings["rewrite"] = time.perf_counter() - start
        state.lib = new_lib
        state.frontiers = rewritten
        self.event(it, "rewrite", "run", frontiers=len(rewritten), fallbacks=fallbacks)
        return info

    def document(self, state: RunState, it: int, timings: dict) -> None:
        anonymous = [a for a in state.lib.learned if a.readable_name is None]
        if not (self.flags.autodoc and self.flags.compression) or not anonymous:
            self.event(it, "document", "skipped" if not self.flags.autodoc else "nothing_to_do")
            return
        start = time.perf_counter()
        corpus = [(self.descriptions[tid], p) for tid, p in self.best_programs(state)]
        lib, renames, outcomes = document_library(
            state.lib, corpus, self.backend, self.cfg.autodoc, state.ledger, it, state.prior_docs
        )
        timings["document"] = time.perf_counter() - start
        state.lib = lib
        if renames:
            state.frontiers = {
                tid: Frontier(tid, tuple(FrontierEntry(rename_prims(e.program, renames), e.log_prior) for e in f.entries))
                for tid, f in state.frontiers.items()
            }
        for a in lib.learned:
            if a.readable_name is not None:
                state.prior_docs[base_body(a, lib)] = (a.readable_name, a.doc)
        self.event(it, "document", "run", outcomes=[asdict(o) for o in outcomes])

    def evaluate_test(self, state: RunState, it: int, timings: dict) -> float:
        start = time.perf_counter()
        found = self.solve(state, it, list(self.test), {}, record=False)
        timings["test_eval"] = time.perf_counter() - start
        return 100.0 * len(found) / len(self.test) if self.test else 0.0

    # iteration ---------------------------------------------------------------

    def step(self, state: RunState) -> RunState:
        it = state.iteration + 1
        timings: dict[str, float] = {}
        if isinstance(self.backend, RetryingBackend):
            self.backend.on_retry = lambda req, err: state.ledger.record_failure(
                it, _STAGE_OF.get(req.purpose, req.purpose), req.subject, "transient", str(err))
        solved_before = state.solved()
        batch = _batch(self.order, solved_before, state.cursor, self.cfg.batch)
        state.cursor += self.cfg.batch
        self.event(it, "batch", "run", tasks=[t.id for t in batch])
        todo = [t for t in batch if t.id not in solved_before]
        self.merge(state, self.solve(state, it, todo, timings, record=True))

        info = self.refactor(state, it, timings)
        self.document(state, it, timings)
        programs = [p for _, p in self.best_programs(state)]
        state.lib = fit_weights(state.lib, programs) if programs else state.lib.with_uniform_weights()
        state.frontiers = self.rescore(state, state.frontiers)
        unsound = [tid for tid, f in state.frontiers.items()
                   for e in f.entries if not self.by_id[tid].check(e.program, state.lib)]
        for tid in unsound:
            state.ledger.record_failure(it, "verify", tid, "frontier_unsound")

        test_pct = None
        if self.cfg.eval_test and self.test and (it % self.cfg.eval_every == 0 or it == self.cfg.iterations):
            test_pct = self.evaluate_test(state, it, timings)
        tokens = state.ledger.totals(it)
        row = {
            "iteration": it,
            "train_solved": len(state.solved()),
            "train_solve_pct": 100.0 * len(state.solved()) / len(self.train) if self.train else 0.0,
            "test_solve_pct": test_pct,
            **info,
            "library_size": len(state.lib.learned),
            "library_description_length": sum(size(a.body) for a in state.lib.learned),
            "prompt_tokens": tokens["prompt_tokens"],
            "completion_tokens": tokens["completion_tokens"],
            "queries": tokens["queries"],
            "failures": state.ledger.failure_counts(it),
            "unsound_frontiers": len(unsound),
        }
        state.metrics.append(row)
        state.iteration = it
        self.files.append("metrics.jsonl", row)
        self.files.append("timings.jsonl", {"iteration": it, **{k: round(v, 4) for k, v in timings.items()}})
        self.files.checkpoint(state)
        log.info("iteration %d: train %.1f%% test %s library %d", it, row["train_solve_pct"],
                 "-" if test_pct is None else f"{test_pct:.1f}%", row["library_size"])
        return state


def _run_dir(out_root: Path, cfg: RunConfig, name: str | None) -> Path:
    if name is None:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        name = f"{cfg.domain}-{cfg.condition}-s{cfg.seed}-{stamp}"
    path = out_root / name
    if (path / _RunFiles.CHECKPOINTS).exists():
        raise FileExistsError(f"run directory {path} already has checkpoints; use resume")
    return path


def run_online(
    cfg: RunConfig, out_root: str | Path = "runs", run_name: str | None = None, backend=None,
    stop_after: int | None = None,
) -> Path:
    """Run the loop for ``cfg.iterations`` iterations; returns the run directory.

    ``stop_after`` ends early after that many iterations (for resumption tests).
    """
    domain = load_domain(cfg.domain, cfg.data_dir)
    run_dir = _run_dir(Path(out_root), cfg, run_name)
    files = _RunFiles(run_dir)
    (run_dir / "config.json").write_text(_dump(cfg.to_dict()), encoding="utf-8")
    loop = _Loop(cfg, domain, files, backend)
    state = RunState(0, domain.library(), {})
    _advance(loop, state, stop_after)
    return run_dir


def resume_run(run_dir: str | Path, backend=None, stop_after: int | None = None) -> Path:
    """Continue a run from its latest checkpoint."""
    run_dir = Path(run_dir)
    cfg = RunConfig.from_dict(json.loads((run_dir / "config.json").read_text(encoding="utf-8")))
    domain = load_domain(cfg.domain, cfg.data_dir)
    state = load_checkpoint(run_dir, domain) if read_checkpoints(run_dir) else RunState(0, domain.library(), {})
    files = _RunFiles(run_dir)
    files.truncate(state.iteration)
    loop = _Loop(cfg, domain, files, backend)
    _advance(loop, state, stop_after)
    return run_dir


def _advance(loop: _Loop, state: RunState, stop_after: int | None) -> None:
    target = loop.cfg.iterations if stop_after is None else min(loop.cfg.iterations, stop_after)
    while state.iteration < target:
        state = loop.step(state)


# -- offline --------------------------------------------------------------------


@dataclass(frozen=True)
class OfflineConfig:
    domain: str
    budget: SearchBudget = field(default_factory=lambda: SearchBudget(timeout=None, max_candidates=10_000))
    unit: str = "candidates"
    checkpoints: tuple[float, ...] | None = None
    split: str = "test"
    workers: int = 1
    data_dir: str | None = None


def run_offline(
    lib_file: str | Path, cfg: OfflineConfig, out_dir: str | Path | None = None,
    baseline: bool = True, training_run: str | Path | None = None,
) -> dict[str, OfflineReport]:
    """Solve-rate curves of a frozen library (and optionally the base DSL).

    With ``training_run`` (a run directory) both libraries get weights fitted on that
    run's solutions (inlined to base primitives for the base DSL); otherwise
    the learned library keeps its stored weights and the base DSL is uniform.
    """
    domain = load_domain(cfg.domain, cfg.data_dir)
    data = json.loads(Path(lib_file).read_text(encoding="utf-8"))
    learned = Library.from_json(data, domain.primitives)
    tasks = list(domain.test if cfg.split == "test" else domain.train)
    learned_programs = base_programs = None
    if training_run is not None:
        state = load_checkpoint(training_run, domain)
        learned_programs = [f.best.program for _, f in sorted(state.frontiers.items()) if f.best]
        base_programs = [inline(p, state.lib) for p in learned_programs]
        learned_programs = [inline(p, state.lib) for p in learned_programs]
        learned_programs = rewrite(learned, learned_programs)
    reports = {"learned": offline_eval(learned, tasks, cfg.budget, checkpoints=cfg.checkpoints,
                                       unit=cfg.unit, training_programs=learned_programs, workers=cfg.workers)}
    if baseline:
        base = learned.with_base_only()
        reports["base"] = offline_eval(base, tasks, cfg.budget, checkpoints=cfg.checkpoints, unit=cfg.unit,
                                       training_programs=base_programs, workers=cfg.workers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "offline.json").write_text(_dump({k: r.to_json() for k, r in reports.items()}), encoding="utf-8")
        rows = ["library,budget,percent_solved"]
        for name, r in reports.items():
            rows += [f"{name},{b:g},{p:.4f}" for b, p in r.curve]
        (out / "offline.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return reports
