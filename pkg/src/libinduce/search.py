"""Best-first enumerative search under the library's typed PCFG.

Partial programs live in a priority queue keyed on their accumulated
log-probability. Every generation choice has log-probability at most zero, so
a partial program's score bounds all of its completions and complete programs
come off the queue in non-increasing prior order.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from collections import defaultdict
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .evaluate import DEFAULT_STEP_BUDGET
from .expr import App, BoundVar, Expr, Lam, Prim, to_sexpr
from .library import Library, fit_weights, hole_candidates
from .tasks import FRONTIER_CAP, Frontier, FrontierEntry, Task
from .types import Arrow, Context, Ty, TyCon, TyVar, free_type_vars, type_str

__all__ = [
    "SearchBudget", "enumerate_programs", "solve_tasks", "search_tasks", "SearchResult",
    "SolveRecord", "offline_eval", "OfflineReport", "TIE_TOLERANCE",
]

# complete programs whose priors differ by less than this are a tie
TIE_TOLERANCE = 1e-9
MAX_PENDING_HOLES = 64


@dataclass(frozen=True)
class SearchBudget:
    timeout: float | None = 30.0
    max_candidates: int | None = None
    step_budget: int = DEFAULT_STEP_BUDGET
    solutions_per_task: int = FRONTIER_CAP

    def __post_init__(self):
        for name in ("timeout", "max_candidates"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.step_budget <= 0 or self.solutions_per_task <= 0:
            raise ValueError("step_budget and solutions_per_task must be positive")


# -- enumeration ---------------------------------------------------------------


class _CandidateCache:
    """Memoizes hole expansions up to renaming of type variables.

    The hole's request and scope are canonicalized (variables renumbered in
    order of appearance) and expanded once in a private context. Each cached
    choice records what it did to the canonical variables and the argument
    types it needs; replaying it in a caller's context is a renaming plus a
    few trivial unifications.

    For holes whose request and scope are ground, ``bound`` is the best
    log-probability of any single choice there. Every completion of the hole
    makes one of those choices, so the value bounds the completion from above
    and serves as an admissible A* heuristic. Non-ground holes get 0 because
    later unification can shrink their choice set and raise probabilities.
    """

    def __init__(self, lib: Library):
        self.lib = lib
        self.raw: dict[tuple, tuple[list[tuple], float]] = {}
        self.table: dict[tuple, list[tuple]] = {}

    def _key(self, request: Ty, env: tuple[Ty, ...], to_canon: dict[int, Ty]) -> tuple:
        if request.ground and all(t.ground for t in env):
            return (request, env)
        return (_canon(request, to_canon), tuple(_canon(t, to_canon) for t in env))

    def _raw(self, key: tuple, k: int) -> tuple[list[tuple], float]:
        hit = self.raw.get(key)
        if hit is None:
            out = []
            for c in hole_candidates(self.lib, key[0], key[1], Context(next_id=k)):
                if c.log_prob == -math.inf:
                    continue
                sigma = tuple(c.ctx.resolve(TyVar(i)) for i in range(k))
                args = tuple(c.ctx.resolve(a) for a in c.arg_types)
                changed = tuple((i, t) for i, t in enumerate(sigma) if t != TyVar(i))
                plain = not changed and all(_within(a, k) for a in args)
                out.append((c.head, args, c.log_prob, changed, plain))
            best = max((c[2] for c in out), default=-math.inf)
            hit = self.raw[key] = (out, best)
        return hit

    def bound(self, request: Ty, env: tuple[Ty, ...]) -> float:
        while type(request) is Arrow:
            env = (request.frm,) + env
            request = request.to
        if not (request.ground and all(t.ground for t in env)):
            return 0.0
        return self._raw((request, env), 0)[1]

    def lookup(self, request: Ty, env: tuple[Ty, ...]) -> tuple[list[tuple], dict[int, Ty]]:
        """Choices for a hole, most promising first, plus the map back to caller variables.

        Each choice is (head, arg types, log-prob, substitution, plain, heuristic
        gain) where the gain adds the argument holes' bounds to the log-prob.
        """
        to_canon: dict[int, Ty] = {}
        key = self._key(request, env, to_canon)
        hit = self.table.get(key)
        if hit is None:
            raw, _ = self._raw(key, len(to_canon))
            hit = []
            for head, args, lp, changed, plain in raw:
                gain = lp + sum(self.bound(a, key[1]) for a in args)
                hit.append((head, args, lp, changed, plain, gain))
            hit.sort(key=lambda c: -c[5])
            self.table[key] = hit
        return hit, ({c.id: TyVar(orig) for orig, c in to_canon.items()} if to_canon else _NO_VARS)


_NO_VARS: dict[int, Ty] = {}


def _materialize(choice: tuple, back: dict[int, Ty], ctx: Context) -> tuple[tuple[Ty, ...], Context]:
    args, changed, plain = choice[1], choice[3], choice[4]
    if plain:
        return (tuple(_rename(a, back, None) for a in args) if back else args), ctx
    c = ctx.copy()
    subst = dict(back)
    args = tuple(_rename(a, subst, c) for a in args)
    for i, t in changed:
        c.unify(back[i], _rename(t, subst, c))
    return args, c


def _within(t: Ty, k: int) -> bool:
    return t.ground or all(i < k for i in free_type_vars(t))


def _canon(t: Ty, mapping: dict[int, Ty]) -> Ty:
    if t.ground:
        return t
    match t:
        case TyVar(i):
            if i not in mapping:
                mapping[i] = TyVar(len(mapping))
            return mapping[i]
        case TyCon(n, args):
            return TyCon(n, tuple(_canon(a, mapping) for a in args)) if args else t
        case Arrow(a, b):
            return Arrow(_canon(a, mapping), _canon(b, mapping))
    return t


def _rename(t: Ty, subst: dict[int, Ty], ctx: Context | None) -> Ty:
    if t.ground:
        return t
    match t:
        case TyVar(i):
            if i not in subst:
                subst[i] = ctx.fresh()
            return subst[i]
        case TyCon(n, args):
            return TyCon(n, tuple(_rename(a, subst, ctx) for a in args)) if args else t
        case Arrow(a, b):
            return Arrow(_rename(a, subst, ctx), _rename(b, subst, ctx))
    return t


_LAM = object()


def _build(decisions) -> Expr:
    seq = []
    while decisions is not None:
        seq.append(decisions[0])
        decisions = decisions[1]
    seq.reverse()
    it = iter(seq)

    def go() -> Expr:
        d = next(it)
        if d is _LAM:
            return Lam(go())
        head, n = d
        out = head
        for _ in range(n):
            out = App(out, go())
        return out

    return go()


def enumerate_programs(
    lib: Library,
    request: Ty,
    budget: SearchBudget | None = None,
    *,
    max_size: int | None = None,
) -> Iterator[tuple[Expr, float]]:
    """Yield (program, log_prior) in non-increasing prior order.

    Ties (within ``TIE_TOLERANCE``) are released sorted by canonical print and
    reported with a common prior. Stops after ``budget.max_candidates`` yields
    or ``budget.timeout`` seconds; with no budget it runs until the program
    space (bounded by ``max_size`` if given) is exhausted.
    """
    budget = budget or SearchBudget(timeout=None)
    deadline = None if budget.timeout is None else time.monotonic() + budget.timeout
    limit = budget.max_candidates
    cache = _CandidateCache(lib)
    counter = itertools.count()
    ctx0 = Context(next_id=max([-1] + free_type_vars(request)) + 1)
    # A* over partial programs. Pending holes form a cons list whose cells are
    # (type, env, tail, count, summed bound). A heap entry is one choice at the
    # open hole of a parent; popping it materializes that child and queues
    # the next sibling, so each pop does at most two pushes. Priorities are
    # accumulated log-prob plus the bounds of the pending holes.
    heap: list = []
    seen: set[str] = set()
    ties: list[tuple[str, Expr]] = []
    tie_logp = 0.0
    emitted = 0
    pops = 0

    def flush():
        nonlocal emitted
        ties.sort(key=lambda p: p[0])
        for text, prog in ties:
            if text in seen:
                continue
            seen.add(text)
            emitted += 1
            yield prog, tie_logp
            if limit is not None and emitted >= limit:
                return
        ties.clear()

    def open_state(logp, sz, decisions, holes, ctx):
        """Return a complete program, or queue the first child of the open hole."""
        if holes is None:
            return _build(decisions)
        req, env, rest = holes[0], holes[1], holes[2]
        req = ctx.resolve(req)
        # arrow requests force lambdas at no cost
        while type(req) is Arrow:
            decisions = (_LAM, decisions)
            sz += 1
            env = (req.frm,) + env
            req = ctx.resolve(req.to)
        if not all(t.ground for t in env):
            env = tuple(ctx.resolve(t) for t in env)
        choices, back = cache.lookup(req, env)
        if choices:
            h_rest = rest[4] if rest else 0.0
            parent = (logp, h_rest, sz, decisions, rest, env, ctx, choices, back)
            heapq.heappush(heap, (-(logp + choices[0][5] + h_rest), next(counter), parent, 0))
        return None

    first = open_state(0.0, 0, None, (request, (), None, 1, 0.0), ctx0)
    if first is not None:
        yield first, 0.0
        return
    while heap:
        neg, _, parent, idx = heapq.heappop(heap)
        priority = -neg
        pops += 1
        if deadline is not None and (pops & 255) == 0 and time.monotonic() > deadline:
            return
        if ties and priority < tie_logp - TIE_TOLERANCE:
            yield from flush()
            if limit is not None and emitted >= limit:
                return
        p_logp, h_rest, sz, decisions, rest, env, ctx, choices, back = parent
        if idx + 1 < len(choices):
            nxt = -(p_logp + choices[idx + 1][5] + h_rest)
            heapq.heappush(heap, (nxt, next(counter), parent, idx + 1))
        choice = choices[idx]
        n_args = len(choice[1])
        n_rest = rest[3] if rest else 0
        new_size = sz + 1 + n_args
        if max_size is not None and new_size + n_args + n_rest > max_size:
            continue
        if n_args + n_rest > MAX_PENDING_HOLES:
            continue
        args, new_ctx = _materialize(choice, back, ctx)
        holes = rest
        for a in reversed(args):
            n = holes[3] + 1 if holes else 1
            h = cache.bound(a, env) + (holes[4] if holes else 0.0)
            holes = (a, env, holes, n, h)
        logp = p_logp + choice[2]
        prog = open_state(logp, new_size, ((choice[0], n_args), decisions), holes, new_ctx)
        if prog is not None:
            if not ties:
                tie_logp = logp
            ties.append((to_sexpr(prog), prog))
    if ties:
        yield from flush()


# -- solving tasks -----------------------------------------------------------


@dataclass(frozen=True)
class SolveRecord:
    """When a task was first solved: candidates enumerated and seconds elapsed."""

    task_id: str
    candidates: int
    seconds: float


@dataclass
class SearchResult:
    frontiers: list[Frontier]
    first_solves: dict[str, SolveRecord] = field(default_factory=dict)
    candidates: int = 0


def _search_group(lib: Library, request: Ty, tasks: Sequence[Task], budget: SearchBudget):
    found: dict[str, list[FrontierEntry]] = {t.id: [] for t in tasks}
    first: dict[str, SolveRecord] = {}
    open_tasks = list(tasks)
    start = time.monotonic()
    n = 0
    for prog, logp in enumerate_programs(lib, request, budget):
        n += 1
        still_open = []
        for t in open_tasks:
            if t.check(prog, lib, budget.step_budget):
                found[t.id].append(FrontierEntry(prog, logp))
                if t.id not in first:
                    first[t.id] = SolveRecord(t.id, n, time.monotonic() - start)
            if len(found[t.id]) < budget.solutions_per_task:
                still_open.append(t)
        open_tasks = still_open
        if not open_tasks:
            break
    return found, first, n


def _run_group(args):
    return _search_group(*args)


def search_tasks(
    lib: Library, tasks: Sequence[Task], budget: SearchBudget, workers: int = 1
) -> SearchResult:
    """Enumerate once per request type and check candidates against every task of that type.

    With several workers, each request-type group is split into chunks that
    enumerate independently; results are merged by task id.
    """
    groups: dict[str, list[Task]] = defaultdict(list)
    for t in tasks:
        groups[type_str(t.request)].append(t)
    jobs = []
    for key in sorted(groups):
        members = groups[key]
        n_chunks = max(1, min(workers, len(members)))
        for i in range(n_chunks):
            chunk = members[i::n_chunks]
            jobs.append((lib, chunk[0].request, chunk, budget))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_group, jobs))
    else:
        results = [_run_group(j) for j in jobs]
    found: dict[str, list[FrontierEntry]] = {}
    first: dict[str, SolveRecord] = {}
    total = 0
    for f, s, n in results:
        found.update(f)
        first.update(s)
        total += n
    frontiers = [Frontier.build(t.id, found.get(t.id, ()), budget.solutions_per_task) for t in tasks]
    return SearchResult(frontiers, dict(sorted(first.items())), total)


def solve_tasks(
    lib: Library, tasks: Sequence[Task], budget: SearchBudget, workers: int = 1
) -> list[Frontier]:
    return search_tasks(lib, tasks, budget, workers).frontiers


# -- offline evaluation ------------------------------------------------------


@dataclass(frozen=True)
class OfflineReport:
    n_tasks: int
    solved: tuple[str, ...]
    first_solves: dict[str, SolveRecord]
    unit: str  # "candidates" or "seconds"
    curve: tuple[tuple[float, float], ...]  # (budget, percent solved)

    @property
    def percent_solved(self) -> float:
        return 100.0 * len(self.solved) / self.n_tasks if self.n_tasks else 0.0

    def to_json(self) -> dict:
        return {
            "n_tasks": self.n_tasks,
            "percent_solved": self.percent_solved,
            "solved": list(self.solved),
            "unit": self.unit,
            "curve": [{"budget": b, "percent_solved": p} for b, p in self.curve],
            "first_solves": {
                k: {"candidates": r.candidates, "seconds": r.seconds} for k, r in self.first_solves.items()
            },
        }

    def to_csv(self) -> str:
        lines = [f"budget_{self.unit},percent_solved"]
        lines += [f"{b:g},{p:.4f}" for b, p in self.curve]
        return "\n".join(lines) + "\n"


def offline_eval(
    lib: Library,
    tasks: Sequence[Task],
    budget: SearchBudget,
    *,
    checkpoints: Sequence[float] | None = None,
    unit: str = "seconds",
    training_programs: Sequence[Expr] | None = None,
    workers: int = 1,
) -> OfflineReport:
    """Solve rate of a frozen library with no language guidance.

    Weights are refit on ``training_programs`` when given; otherwise the
    library's own weights are used.
    The curve reports, for each checkpoint budget, the percentage of tasks
    whose first solution arrived within that many seconds or candidates.
    """
    if unit not in ("seconds", "candidates"):
        raise ValueError("unit must be 'seconds' or 'candidates'")
    if training_programs:
        lib = fit_weights(lib, training_programs)
    result = search_tasks(lib, tasks, replace_solutions(budget, 1), workers)
    if checkpoints is None:
        top = budget.timeout if unit == "seconds" else budget.max_candidates
        checkpoints = _decades(top or 1)
    solved = tuple(sorted(result.first_solves))
    curve = []
    for b in checkpoints:
        hits = sum(
            1 for r in result.first_solves.values()
            if (r.seconds if unit == "seconds" else r.candidates) <= b
        )
        curve.append((float(b), 100.0 * hits / len(tasks) if tasks else 0.0))
    return OfflineReport(len(tasks), solved, result.first_solves, unit, tuple(curve))


def replace_solutions(budget: SearchBudget, n: int) -> SearchBudget:
    return SearchBudget(budget.timeout, budget.max_candidates, budget.step_budget, n)


def _decades(top: float) -> list[float]:
    out, b = [], 1.0
    while b < top:
        out.append(b)
        b *= 10
    out.append(float(top))
    return out
