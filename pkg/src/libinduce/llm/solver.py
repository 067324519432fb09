"""Language-guided solving: prompt, sample, verify."""

from __future__ import annotations

import math
import time
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..errors import BackendError, LibInduceError, PromptBudgetExceeded
from ..expr import Expr, to_sexpr
from ..library import Library, score_program
from ..tasks import Frontier, FrontierEntry, Task
from ..typecheck import infer_type
from .backends import Backend, BackendConfig, CompletionRequest
from .ledger import QueryRecord, UsageLedger
from .prompts import STOP, PromptSpec, Tokenizer, build_prompt, estimate_tokens, exemplar_text
from .selection import Exemplar, RandomSelection, SelectionStrategy, select_examples

__all__ = ["SolveOutcome", "LlmSolveResult", "solve_with_llm", "extract_program", "task_prompts"]


def extract_program(completion: str) -> str:
    """The completion up to the first blank line, stripped."""
    return completion.split(STOP, 1)[0].strip()


@dataclass
class SolveOutcome:
    task_id: str
    entries: list[FrontierEntry] = field(default_factory=list)
    prompts: int = 0
    counts: Counter = field(default_factory=Counter)


@dataclass
class LlmSolveResult:
    outcomes: dict[str, SolveOutcome]

    @property
    def additions(self) -> dict[str, list[FrontierEntry]]:
        return {k: o.entries for k, o in self.outcomes.items() if o.entries}

    def counts(self) -> Counter:
        total: Counter = Counter()
        for o in self.outcomes.values():
            total.update(o.counts)
        return total


def _max_tokens(cfg: BackendConfig, spec: PromptSpec, tokenizer: Tokenizer) -> int:
    if not spec.exemplars:
        return cfg.default_max_tokens
    return max(1, math.ceil(cfg.max_tokens_multiplier * tokenizer(spec.exemplars[-1][1])))


def task_prompts(
    task: Task,
    pool: Sequence[Exemplar],
    lib: Library,
    header: str,
    cfg: BackendConfig,
    strategy: SelectionStrategy,
    tokenizer: Tokenizer = estimate_tokens,
) -> list[PromptSpec]:
    """One packed prompt per attempt; exemplars are re-selected for each."""
    base = PromptSpec.pack(header, lib, (), task.description, cfg.token_budget, tokenizer)
    room = cfg.token_budget - tokenizer(build_prompt(base, tokenizer))
    specs = []
    candidates = [e for e in pool if e.task_id != task.id]
    for k in range(cfg.prompts_per_task):
        chosen = select_examples(
            candidates, task.description, strategy, room,
            cost=lambda e: tokenizer(exemplar_text(e.description, e.program) + "\n\n"),
            salt=f"{task.id}:{k}",
        )
        specs.append(PromptSpec(base.header, base.library_block,
                                tuple((e.description, e.program) for e in chosen),
                                task.description, cfg.token_budget))
    return specs


def _verify(text: str, task: Task, lib: Library) -> tuple[str, Expr | None]:
    program_text = extract_program(text)
    if not program_text:
        return "empty", None
    try:
        program = lib.parse(program_text)
    except LibInduceError:
        return "parse_failure", None
    try:
        infer_type(program, lib, task.request)
    except LibInduceError:
        return "type_failure", None
    if not task.check(program, lib):
        return "wrong_output", None
    return "solution", program


def _solve_one(
    task: Task, specs: list[PromptSpec], lib: Library, cfg: BackendConfig, backend: Backend,
    ledger: UsageLedger, iteration: int, tokenizer: Tokenizer,
) -> SolveOutcome:
    out = SolveOutcome(task.id)
    seen: set[str] = set()
    for spec in specs:
        prompt = build_prompt(spec, tokenizer)
        request = CompletionRequest(
            "solve", task.id, (("user", prompt),), n=cfg.completions_per_prompt,
            temperature=cfg.temperature, top_p=cfg.top_p,
            max_tokens=_max_tokens(cfg, spec, tokenizer), stop=(STOP,),
        )
        out.prompts += 1
        start = time.perf_counter()
        try:
            resp = backend.complete(request)
        except BackendError as err:
            out.counts["backend_error"] += 1
            ledger.record_failure(iteration, "llm_solve", task.id, "backend_error", str(err))
            break
        ledger.record_query(QueryRecord(
            iteration, "solve", task.id, resp.prompt_tokens, resp.completion_tokens,
            len(resp.texts), time.perf_counter() - start,
        ))
        for text in resp.texts:
            verdict, program = _verify(text, task, lib)
            out.counts[verdict] += 1
            if program is None:
                if verdict != "wrong_output":
                    ledger.record_failure(iteration, "llm_solve", task.id, verdict, text[:120])
                continue
            key = to_sexpr(program)
            if key not in seen:
                seen.add(key)
                out.entries.append(FrontierEntry(program, score_program(program, lib, task.request)))
        if out.entries:
            break
    return out


def solve_with_llm(
    tasks: Sequence[Task],
    solved: Mapping[str, Frontier],
    descriptions: Mapping[str, str],
    lib: Library,
    header: str,
    cfg: BackendConfig,
    backend: Backend,
    strategy: SelectionStrategy | None = None,
    ledger: UsageLedger | None = None,
    iteration: int = 0,
    tokenizer: Tokenizer = estimate_tokens,
) -> LlmSolveResult:
    """Prompt for every task in ``tasks``; return verified programs per task.

    ``solved`` supplies exemplars (best program of each non-empty frontier,
    described by ``descriptions``). Results are folded in task order, so the
    outcome does not depend on request concurrency.
    """
    strategy = strategy or RandomSelection(cfg.seed)
    ledger = ledger if ledger is not None else UsageLedger()
    pool = [
        Exemplar(tid, descriptions[tid], f.best.text)
        for tid, f in sorted(solved.items()) if f.best is not None and tid in descriptions
    ]
    jobs = []
    outcomes: dict[str, SolveOutcome] = {}
    for task in tasks:
        try:
            specs = task_prompts(task, pool, lib, header, cfg, strategy, tokenizer)
        except PromptBudgetExceeded as err:
            ledger.record_failure(iteration, "llm_solve", task.id, "prompt_budget", str(err))
            outcomes[task.id] = SolveOutcome(task.id, counts=Counter(prompt_budget=1))
            continue
        jobs.append((task, specs))

    def run(job):
        task, specs = job
        return _solve_one(task, specs, lib, cfg, backend, ledger, iteration, tokenizer)

    if cfg.max_in_flight > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.max_in_flight) as pool_exec:
            results = list(pool_exec.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for r in results:
        outcomes[r.task_id] = r
    return LlmSolveResult({t.id: outcomes[t.id] for t in tasks})
