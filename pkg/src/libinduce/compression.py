"""Corpus compression by branch-and-bound abstraction search.

A pattern is a closed term with metavariables ``#0..#k-1`` (numbered by
first occurrence in pre-order). It matches a subterm when substituting one
value per metavariable reproduces the subterm; values may not mention
variables bound inside the pattern and, unless ``allow_open_args`` is set,
must be closed. Rewriting a corpus with a pattern is top-down: a matched
subterm becomes ``(fn a0 .. ak-1)`` and rewriting continues inside the
arguments only.

The objective is description length: utility = size before rewriting minus
size after, minus the size of the pattern. The search grows patterns from the root, always filling the
leftmost open hole, and prunes with an upper bound that never underestimates
the utility of any completion.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .expr import App, BoundVar, Expr, Lam, MetaVar, Prim, shift, size, spine, subterms, to_sexpr
from .errors import LibInduceError
from .library import Abstraction, Library, register_abstractions

__all__ = [
    "CompressionConfig", "Pattern", "MatchSite", "CompressionCandidate", "CompressionStep",
    "CompressionResult", "match_pattern", "match_sites", "best_abstraction", "compress",
    "rewrite", "rewrite_with_pattern", "compression_ratio", "pattern_to_body", "body_to_pattern",
    "Accept", "well_typed_in",
]

# Veto on a candidate: (pattern, bodies accepted so far, their slot counts) -> keep it?
Accept = Callable[["Pattern", Sequence[Expr], Sequence[int]], bool]


@dataclass(frozen=True)
class CompressionConfig:
    iterations: int = 10
    max_arity: int = 3
    allow_open_args: bool = False
    min_sites: int = 2

    def __post_init__(self):
        if self.iterations < 0 or self.max_arity < 0 or self.min_sites < 1:
            raise ValueError("iterations and max_arity must be >= 0, min_sites >= 1")


@dataclass(frozen=True)
class Pattern:
    body: Expr
    arity: int

    @property
    def text(self) -> str:
        return to_sexpr(self.body, allow_meta=True)

    @property
    def cost(self) -> int:
        """Description length charged for the abstraction (binders are free)."""
        return size(self.body)


@dataclass(frozen=True)
class MatchSite:
    program_index: int
    path: tuple[int, ...]
    bindings: tuple[Expr, ...]


@dataclass(frozen=True)
class CompressionCandidate:
    pattern: Pattern
    sites: tuple[MatchSite, ...]
    utility: int


# -- matching on terms ---------------------------------------------------------


def match_pattern(p: Expr, e: Expr, allow_open_args: bool = False) -> dict[int, Expr] | None:
    """Bindings making ``p`` equal to ``e``, or None."""
    bindings: dict[int, Expr] = {}

    def go(p: Expr, e: Expr, depth: int) -> bool:
        match p:
            case MetaVar(s):
                free = _free(e)
                if free and (not allow_open_args or min(free) < depth):
                    return False
                value = shift(e, -depth) if free else e
                if s in bindings:
                    return bindings[s] == value
                bindings[s] = value
                return True
            case BoundVar(i):
                return type(e) is BoundVar and e.index == i
            case Prim(n):
                return type(e) is Prim and e.name == n
            case Lam(b):
                return type(e) is Lam and go(b, e.body, depth + 1)
            case App(f, x):
                return type(e) is App and go(f, e.fun, depth) and go(x, e.arg, depth)
        return False

    return bindings if go(p, e, 0) else None


_FREE_CACHE: dict[Expr, frozenset[int]] = {}


def _free(e: Expr) -> frozenset[int]:
    hit = _FREE_CACHE.get(e)
    if hit is None:
        match e:
            case BoundVar(i):
                hit = frozenset((i,))
            case Lam(b):
                hit = frozenset(i - 1 for i in _free(b) if i > 0)
            case App(f, x):
                hit = _free(f) | _free(x)
            case _:
                hit = frozenset()
        if len(_FREE_CACHE) > 200_000:
            _FREE_CACHE.clear()
        _FREE_CACHE[e] = hit
    return hit


def _arity_of(p: Expr) -> int:
    slots = {t.slot for _, t in subterms(p) if type(t) is MetaVar}
    return max(slots) + 1 if slots else 0


def match_sites(p: Pattern | Expr, corpus: Sequence[Expr], allow_open_args: bool = False) -> list[MatchSite]:
    """Outermost occurrences of ``p`` in each program (nested ones are skipped)."""
    body = p.body if isinstance(p, Pattern) else p
    arity = _arity_of(body)
    out: list[MatchSite] = []

    def walk(e: Expr, path: tuple[int, ...], idx: int):
        b = match_pattern(body, e, allow_open_args)
        if b is not None:
            out.append(MatchSite(idx, path, tuple(b[i] for i in range(arity))))
            return
        match e:
            case Lam(x):
                walk(x, path + (0,), idx)
            case App(f, x):
                walk(f, path + (0,), idx)
                walk(x, path + (1,), idx)

    for i, prog in enumerate(corpus):
        walk(prog, (), i)
    return out


def rewrite_with_pattern(
    p: Pattern, name: str, e: Expr, allow_open_args: bool = False,
    sites: list | None = None, program_index: int = 0,
) -> Expr:
    """Top-down rewrite of one term with one pattern; records used sites."""
    fn = Prim(name)
    where = _meta_paths(p.body)

    def go(t: Expr, path: tuple[int, ...]) -> Expr:
        b = match_pattern(p.body, t, allow_open_args)
        if b is not None and p.arity == len(b):
            args = [b[i] for i in range(p.arity)]
            if sites is not None:
                sites.append(MatchSite(program_index, path, tuple(args)))
            out: Expr = fn
            for i, a in enumerate(args):
                out = App(out, go(a, path + where[i]))
            return out
        match t:
            case Lam(x):
                return Lam(go(x, path + (0,)))
            case App(f, x):
                return App(go(f, path + (0,)), go(x, path + (1,)))
        return t

    return go(e, ())


def _meta_paths(p: Expr) -> dict[int, tuple[int, ...]]:
    """Address of each metavariable's first occurrence (0 = function/body, 1 = argument)."""
    out: dict[int, tuple[int, ...]] = {}

    def go(t: Expr, path: tuple[int, ...]):
        match t:
            case MetaVar(s):
                out.setdefault(s, path)
            case Lam(b):
                go(b, path + (0,))
            case App(f, x):
                go(f, path + (0,))
                go(x, path + (1,))

    go(p, ())
    return out


# -- pattern <-> abstraction body ---------------------------------------------------


def pattern_to_body(p: Pattern) -> Expr:
    """Wrap the pattern in one binder per metavariable, outermost slot first."""
    k = p.arity

    def go(t: Expr, depth: int) -> Expr:
        match t:
            case MetaVar(s):
                return BoundVar(depth + k - 1 - s)
            case BoundVar(i):
                return BoundVar(i + k) if i >= depth else t
            case Lam(b):
                return Lam(go(b, depth + 1))
            case App(f, x):
                return App(go(f, depth), go(x, depth))
        return t

    body = go(p.body, 0)
    for _ in range(k):
        body = Lam(body)
    return body


def body_to_pattern(body: Expr, slots: int) -> Pattern:
    """Inverse of ``pattern_to_body`` for an abstraction taking ``slots`` arguments."""
    inner = body
    for _ in range(slots):
        if type(inner) is not Lam:
            raise ValueError("abstraction body has fewer binders than arguments")
        inner = inner.body

    def go(t: Expr, depth: int) -> Expr:
        match t:
            case BoundVar(i):
                if i < depth:
                    return t
                return MetaVar(slots - 1 - (i - depth))
            case Lam(b):
                return Lam(go(b, depth + 1))
            case App(f, x):
                return App(go(f, depth), go(x, depth))
        return t

    pat = go(inner, 0)
    return Pattern(pat, slots)


# -- branch and bound ---------------------------------------------------------------


_APP, _LAM = ("app",), ("lam",)


class _Corpus:
    """Pre-order node table over a corpus.

    Node ids are assigned in pre-order across programs, so the subtree of node
    ``n`` is exactly the id range ``[n, n + size[n])``.
    """

    def __init__(self, programs: Sequence[Expr], allow_open_args: bool):
        self.allow_open = allow_open_args
        self.label: list[tuple] = []
        self.kids: list[tuple[int, ...]] = []
        self.size: list[int] = []
        self.parent: list[int] = []
        self.free: list[frozenset[int]] = []
        self.expr: list[Expr] = []
        self.roots: list[int] = []
        self._classes: dict[Expr, int] = {}
        self._shifted: dict[tuple[int, int], int] = {}
        for prog in programs:
            self.roots.append(self._add(prog, -1))

    def _add(self, e: Expr, parent: int) -> int:
        n = len(self.label)
        self.label.append(None)
        self.kids.append(())
        self.size.append(size(e))
        self.parent.append(parent)
        self.free.append(_free(e))
        self.expr.append(e)
        match e:
            case BoundVar(i):
                self.label[n] = ("var", i)
            case Prim(name):
                self.label[n] = ("prim", name)
            case Lam(b):
                self.label[n] = _LAM
                self.kids[n] = (self._add(b, n),)
            case App(f, x):
                self.label[n] = _APP
                fid = self._add(f, n)
                xid = self._add(x, n)
                self.kids[n] = (fid, xid)
            case _:
                raise ValueError(f"corpus programs may not contain {e!r}")
        return n

    def valid_arg(self, n: int, depth: int) -> bool:
        free = self.free[n]
        if not free:
            return True
        return self.allow_open and min(free) >= depth

    def arg_class(self, n: int, depth: int) -> int:
        """Identity of the value bound when node ``n`` fills a metavariable."""
        key = (n, depth if self.free[n] else 0)
        hit = self._shifted.get(key)
        if hit is None:
            value = shift(self.expr[n], -key[1]) if key[1] else self.expr[n]
            hit = self._classes.setdefault(value, len(self._classes))
            self._shifted[key] = hit
        return hit


@dataclass
class _Best:
    utility: int = 0
    text: str = ""
    pattern: Pattern | None = None


class _Search:
    def __init__(self, corpus: _Corpus, cfg: CompressionConfig, accept: Callable[[Pattern], bool] | None = None):
        self.c = corpus
        self.cfg = cfg
        self.accept = accept
        self.best = _Best()
        self.expansions = 0

    # rows: (loc, pending hole nodes, slot nodes); hole depths shared across rows
    def run(self) -> _Best:
        rows = [(n, (n,), ()) for n in range(len(self.c.label))]
        self._expand(rows, (0,), (), 0, None, root=True)
        return self.best

    def _bound(self, rows, k: int) -> int:
        total, end = 0, -1
        sz = self.c.size
        for loc, _, _ in rows:
            if loc > end:
                total += max(0, sz[loc] - 1 - 2 * k)
                end = loc + sz[loc] - 1
        return total

    def _expand(self, rows, depths, slot_depths, placed, decisions, root=False):
        self.expansions += 1
        c = self.c
        if not depths:
            self._finish(rows, slot_depths, decisions)
            return
        d = depths[0]
        rest_depths = depths[1:]
        k = len(slot_depths)
        children = []

        # concrete constructors, grouped by node label
        groups: dict[tuple, list] = {}
        for loc, holes, slots in rows:
            n = holes[0]
            lab = c.label[n]
            if lab[0] == "var" and lab[1] >= d:
                continue  # refers outside the pattern
            groups.setdefault(lab, []).append((loc, c.kids[n] + holes[1:], slots))
        for lab, g in groups.items():
            if lab is _LAM:
                nd = (d + 1,) + rest_depths
            elif lab is _APP:
                nd = (d, d) + rest_depths
            else:
                nd = rest_depths
            children.append((g, nd, slot_depths, placed + 1, (lab, decisions)))

        if not root:
            # reuse an existing metavariable
            for j in range(k):
                g = []
                for loc, holes, slots in rows:
                    n = holes[0]
                    if c.valid_arg(n, d) and c.arg_class(n, d) == c.arg_class(slots[j], slot_depths[j]):
                        g.append((loc, holes[1:], slots))
                if g:
                    children.append((g, rest_depths, slot_depths, placed + 1, (("meta", j), decisions)))
            # a fresh metavariable
            if k < self.cfg.max_arity:
                g = [(loc, holes[1:], slots + (holes[0],)) for loc, holes, slots in rows
                     if c.valid_arg(holes[0], d)]
                if g:
                    children.append((g, rest_depths, slot_depths + (d,), placed + 1, (("meta", k), decisions)))

        scored = []
        for g, nd, sd, conc, dec in children:
            if len(g) < self.cfg.min_sites:
                continue
            # every pending hole becomes at least one more pattern node
            ub = self._bound(g, len(sd)) - (conc + len(nd))
            if ub <= 0 or ub < self.best.utility:
                continue
            scored.append((ub, g, nd, sd, conc, dec))
        scored.sort(key=lambda s: -s[0])
        for ub, g, nd, sd, conc, dec in scored:
            if ub < self.best.utility:
                continue
            self._expand(g, nd, sd, conc, dec)

    def _finish(self, rows, slot_depths, decisions):
        c = self.c
        k = len(slot_depths)
        pattern = _build_pattern(decisions)
        cost = size(pattern)
        match_slots = {loc: slots for loc, _, slots in rows}
        affected: set[int] = set()
        for loc in match_slots:
            n = loc
            while n >= 0 and n not in affected:
                affected.add(n)
                n = c.parent[n]
        memo: dict[int, int] = {}
        used = 0

        def rw(n: int) -> int:
            nonlocal used
            hit = memo.get(n)
            if hit is not None:
                return hit
            if n in match_slots:
                used += 1
                out = 1 + k + sum(rw(b) for b in match_slots[n])
            elif n not in affected:
                out = c.size[n]
            else:
                out = 1 + sum(rw(ch) for ch in c.kids[n])
            memo[n] = out
            return out

        saved = sum(c.size[r] - rw(r) for r in c.roots)
        if used < self.cfg.min_sites:
            return
        utility = saved - cost
        if utility <= 0:
            return
        text = to_sexpr(pattern, allow_meta=True)
        b = self.best
        if utility > b.utility or (utility == b.utility and (b.pattern is None or text < b.text)):
            # vetoed patterns never become the incumbent, so pruning still finds the best accepted one
            cand = Pattern(pattern, k)
            if self.accept is None or self.accept(cand):
                self.best = _Best(utility, text, cand)


def _build_pattern(decisions) -> Expr:
    seq = []
    while decisions is not None:
        seq.append(decisions[0])
        decisions = decisions[1]
    seq.reverse()
    it = iter(seq)

    def go() -> Expr:
        lab = next(it)
        match lab[0]:
            case "app":
                f = go()
                return App(f, go())
            case "lam":
                return Lam(go())
            case "var":
                return BoundVar(lab[1])
            case "prim":
                return Prim(lab[1])
            case "meta":
                return MetaVar(lab[1])
        raise AssertionError(lab)

    return go()


def best_abstraction(
    corpus: Sequence[Expr], cfg: CompressionConfig | None = None, accept: Callable[[Pattern], bool] | None = None,
) -> CompressionCandidate | None:
    """The utility-maximal pattern, or None when nothing has positive utility.

    Ties go to the lexicographically smallest pattern print. With ``accept``,
    the result is the best pattern among those it approves.
    """
    cfg = cfg or CompressionConfig()
    if not corpus:
        return None
    search = _Search(_Corpus(corpus, cfg.allow_open_args), cfg, accept)
    best = search.run()
    if best.pattern is None:
        return None
    sites: list[MatchSite] = []
    for i, prog in enumerate(corpus):
        rewrite_with_pattern(best.pattern, "_", prog, cfg.allow_open_args, sites, i)
    return CompressionCandidate(best.pattern, tuple(sites), best.utility)


# -- compress ---------------------------------------------------------------------


@dataclass(frozen=True)
class CompressionStep:
    name: str
    pattern: str
    arity: int
    utility: int
    size_before: int
    size_after: int
    abstraction_size: int
    n_sites: int

    @property
    def measured_utility(self) -> int:
        return self.size_before - self.size_after - self.abstraction_size

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CompressionResult:
    bodies: list[Expr]
    rewritten: list[Expr]
    steps: list[CompressionStep] = field(default_factory=list)
    slots: list[int] = field(default_factory=list)

    def __iter__(self):
        yield self.bodies
        yield self.rewritten


def compress(
    corpus: Sequence[Expr], cfg: CompressionConfig | None = None, first_index: int = 1,
    prefix: str = "fn_", accept: Accept | None = None,
) -> CompressionResult:
    """Extract up to ``cfg.iterations`` abstractions, rewriting after each.

    Abstraction ``i`` is named ``{prefix}{first_index + i}`` in the rewritten
    corpus, so later bodies can refer to earlier ones by that name.
    """
    cfg = cfg or CompressionConfig()
    current = list(corpus)
    result = CompressionResult([], current)
    for i in range(cfg.iterations):
        if not current:
            break
        veto = None if accept is None else (lambda p: accept(p, result.bodies, result.slots))
        cand = best_abstraction(current, cfg, veto)
        if cand is None:
            break
        name = f"{prefix}{first_index + i}"
        before = sum(size(p) for p in current)
        current = [rewrite_with_pattern(cand.pattern, name, p, cfg.allow_open_args) for p in current]
        after = sum(size(p) for p in current)
        result.bodies.append(pattern_to_body(cand.pattern))
        result.slots.append(cand.pattern.arity)
        result.steps.append(
            CompressionStep(name, cand.pattern.text, cand.pattern.arity, cand.utility,
                            before, after, cand.pattern.cost, len(cand.sites))
        )
    result.rewritten = current
    return result


def well_typed_in(lib: Library) -> Accept:
    """Accept only patterns whose body types in ``lib`` plus the bodies accepted before it.

    Lambda-bound slots are monomorphic, so a metavariable standing for a
    polymorphic primitive used at two types yields an untypeable body.
    """
    cache: dict[int, Library] = {}

    def accept(pattern: Pattern, bodies: Sequence[Expr], slots: Sequence[int]) -> bool:
        n = len(bodies)
        if n not in cache:
            cache.clear()
            cache[n] = register_abstractions(lib, list(bodies), list(slots))
        try:
            register_abstractions(cache[n], [pattern_to_body(pattern)], [pattern.arity])
        except LibInduceError:
            return False
        return True

    return accept


def compression_ratio(before: Sequence[Expr], after: Sequence[Expr]) -> float:
    if len(before) != len(after):
        raise ValueError("corpora differ in length")
    if not before:
        return 1.0
    return sum(size(e) for e in before) / sum(size(e) for e in after)


# -- library rewriting ---------------------------------------------------------


def rewrite(lib: Library, corpus: Sequence[Expr], allow_open_args: bool = False) -> list[Expr]:
    """Rewrite programs with the library's learned abstractions.

    Top-down: at each node the matching abstraction with the largest local
    saving wins (earliest registered on ties), and rewriting continues inside
    its arguments. Passes repeat until nothing changes, so abstractions that
    mention other abstractions can match once their parts are rewritten.
    """
    patterns = [(a, body_to_pattern(a.body, a.n_slots)) for a in lib.learned]
    if not patterns:
        return list(corpus)

    def go(t: Expr) -> Expr:
        best = None
        for order, (a, p) in enumerate(patterns):
            b = match_pattern(p.body, t, allow_open_args)
            if b is None or len(b) != p.arity:
                continue
            args = [b[i] for i in range(p.arity)]
            saving = size(t) - (1 + p.arity + sum(size(x) for x in args))
            if best is None or saving > best[0]:
                best = (saving, order, a, args)
        if best is not None:
            out: Expr = Prim(best[2].name)
            for x in best[3]:
                out = App(out, go(x))
            return out
        match t:
            case Lam(x):
                return Lam(go(x))
            case App(f, x):
                return App(go(f), go(x))
        return t

    out = []
    for prog in corpus:
        for _ in range(len(patterns) + 1):
            nxt = go(prog)
            if nxt == prog:
                break
            prog = nxt
        out.append(prog)
    return out
