"""Naming and documenting learned abstractions with an instruction-following model.

Abstractions are handled one at a time in registration order. Each request
shows the library as documented so far, so an accepted name is visible when
the next abstraction is described.
"""

from __future__ import annotations

import json
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

from .errors import BackendError, LibInduceError, MalformedResponse, NameCollision
from .expr import Expr, prim_names, rename_prims, size, to_sexpr
from .library import RESERVED, VALID_NAME, Abstraction, Library, inline, rename_everywhere
from .llm.backends import Backend, CompletionRequest
from .llm.ledger import QueryRecord, UsageLedger
from .llm.prompts import abstraction_listing, exemplar_text, render_library
from .types import type_str

__all__ = [
    "AutoDocConfig", "AutoDocRequest", "AutoDocResponse", "DocOutcome", "parse_autodoc_json",
    "validate_name", "document_library", "autodoc_request", "base_body",
]


@dataclass(frozen=True)
class AutoDocConfig:
    max_usages: int = 10
    top_p: float = 0.10
    temperature: float = 0.0
    max_tokens: int = 256
    retries: int = 1


@dataclass(frozen=True)
class AutoDocRequest:
    header: str
    usages: tuple[tuple[str, str], ...]
    target: str
    instruction: str

    def messages(self) -> tuple[tuple[str, str], ...]:
        return (("system", self.header), ("user", self.instruction))


@dataclass(frozen=True)
class AutoDocResponse:
    anonymous_name: str
    readable_name: str | None
    description: str


@dataclass(frozen=True)
class DocOutcome:
    anon_name: str
    status: str  # accepted | reused | null | rejected | malformed | backend_error
    readable_name: str | None = None
    detail: str = ""


def parse_autodoc_json(text: str) -> AutoDocResponse:
    """First JSON object in ``text`` that has the expected fields."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            anon, name, desc = obj.get("anonymous_name"), obj.get("readable_name"), obj.get("description")
            if isinstance(anon, str) and (name is None or isinstance(name, str)) and isinstance(desc, str):
                return AutoDocResponse(anon, name, desc)
        start = text.find("{", start + 1)
    raise MalformedResponse(f"no documentation object in response: {text[:120]!r}")


def validate_name(name: str, lib: Library, target: Abstraction) -> str | None:
    """Why ``name`` cannot be used for ``target``, or None if it can."""
    if " " in name or not VALID_NAME.match(name) or name in RESERVED:
        return f"{name!r} is not an underscore-separated identifier"
    if name in lib.base_names:
        return f"{name!r} is a primitive name"
    if name == target.name:
        return None
    taken = {a.name for a in lib.learned} | {a.anon_name for a in lib.learned if a is not target}
    if name in taken:
        return f"{name!r} already exists in the library"
    return None


def base_body(a: Abstraction, lib: Library) -> str:
    """Body print with every learned abstraction inlined; independent of names."""
    return to_sexpr(inline(a.body, lib))


def _header(lib: Library) -> str:
    lines = [
        "Task: choose readable names for the functions of a small programming library.",
        "",
        "Base primitives:",
        render_library(lib.with_base_only()),
        "",
        "Learned functions so far:",
    ]
    lines += [abstraction_listing(a, to_sexpr(a.body)) + "\n" for a in lib.learned]
    return "\n".join(lines).rstrip() + "\n"


def autodoc_request(lib: Library, target: Abstraction, usages: Sequence[tuple[str, Expr]], cfg: AutoDocConfig) -> AutoDocRequest:
    shown = tuple((d, to_sexpr(p)) for d, p in usages[: cfg.max_usages])
    body = [
        f"Function to document:\n\n{target.name} :: {type_str(target.ty)}\n{to_sexpr(target.body)}",
    ]
    if shown:
        body.append("Programs that call it, each after its task description:\n\n"
                    + "\n\n".join(exemplar_text(d, p) for d, p in shown))
    template = json.dumps(
        {"anonymous_name": target.name, "readable_name": "...", "description": "..."}, indent=4
    )
    body.append(
        f"Reply with a single JSON object shaped like the one below. readable_name must be a "
        f"snake_case identifier (letters, digits, underscores; no spaces) that no other function "
        f"in the library uses; use null when no good name comes to mind.\n\n{template}"
    )
    return AutoDocRequest(_header(lib), shown, target.name, "\n\n".join(body))


def _usages(target: Abstraction, corpus: Sequence[tuple[str, Expr]]) -> list[tuple[str, Expr]]:
    names = {target.name, target.anon_name}
    hits = [(d, p) for d, p in corpus if names & prim_names(p)]
    hits.sort(key=lambda dp: (size(dp[1]), dp[0], to_sexpr(dp[1])))
    return hits


@dataclass
class _State:
    lib: Library
    corpus: list[tuple[str, Expr]]
    renames: dict[str, str] = field(default_factory=dict)

    def apply(self, old: str, new: str, doc: str | None) -> None:
        lib = rename_everywhere(self.lib, old, new)
        learned = tuple(replace(a, doc=doc) if a.name == new else a for a in lib.learned)
        self.lib = replace(lib, learned=learned)
        self.corpus = [(d, rename_prims(p, {old: new})) for d, p in self.corpus]
        self.renames[old] = new


def document_library(
    lib: Library,
    corpus: Sequence[tuple[str, Expr]],
    backend: Backend,
    cfg: AutoDocConfig | None = None,
    ledger: UsageLedger | None = None,
    iteration: int = 0,
    prior_docs: Mapping[str, tuple[str, str]] | None = None,
) -> tuple[Library, dict[str, str], list[DocOutcome]]:
    """Name every anonymous abstraction; returns (library, renames, outcomes).

    ``corpus`` holds (description, program) pairs used as usage examples.
    ``prior_docs`` maps ``base_body`` prints to (name, doc) from earlier
    iterations; an identical body reuses that documentation without a query.
    Failures leave the abstraction anonymous and are recorded in ``ledger``.
    """
    cfg = cfg or AutoDocConfig()
    ledger = ledger if ledger is not None else UsageLedger()
    state = _State(lib, list(corpus))
    outcomes: list[DocOutcome] = []
    for anon in [a.anon_name for a in lib.learned]:
        target = state.lib.abstraction(anon)
        if target is None or target.readable_name is not None:
            continue
        key = base_body(target, state.lib)
        prior = (prior_docs or {}).get(key)
        if prior is not None and validate_name(prior[0], state.lib, target) is None:
            state.apply(target.name, prior[0], prior[1])
            outcomes.append(DocOutcome(anon, "reused", prior[0]))
            continue
        outcomes.append(_document_one(state, target, key, backend, cfg, ledger, iteration))
    return state.lib, state.renames, outcomes


def _document_one(state: _State, target: Abstraction, key: str, backend: Backend,
                  cfg: AutoDocConfig, ledger: UsageLedger, iteration: int) -> DocOutcome:
    anon = target.anon_name
    req = autodoc_request(state.lib, target, _usages(target, state.corpus), cfg)
    request = CompletionRequest(
        "autodoc", anon, req.messages(), n=1, temperature=cfg.temperature, top_p=cfg.top_p,
        max_tokens=cfg.max_tokens, meta={"body": to_sexpr(target.body), "base_body": key},
    )
    for attempt in range(cfg.retries + 1):
        start = time.perf_counter()
        try:
            resp = backend.complete(request)
        except BackendError as err:
            ledger.record_failure(iteration, "autodoc", anon, "backend_error", str(err))
            return DocOutcome(anon, "backend_error", detail=str(err))
        ledger.record_query(QueryRecord(iteration, "autodoc", anon, resp.prompt_tokens,
                                        resp.completion_tokens, len(resp.texts), time.perf_counter() - start))
        try:
            parsed = parse_autodoc_json(resp.texts[0] if resp.texts else "")
        except MalformedResponse as err:
            ledger.record_failure(iteration, "autodoc", anon, "malformed", str(err))
            if attempt < cfg.retries:
                continue
            return DocOutcome(anon, "malformed", detail=str(err))
        break
    if parsed.readable_name is None:
        ledger.record_failure(iteration, "autodoc", anon, "null_name")
        return DocOutcome(anon, "null")
    problem = validate_name(parsed.readable_name, state.lib, target)
    if problem is None:
        try:
            state.apply(target.name, parsed.readable_name, parsed.description.strip() or None)
        except (NameCollision, LibInduceError) as err:
            problem = str(err)
    if problem is not None:
        ledger.record_failure(iteration, "autodoc", anon, "rejected_name", problem)
        return DocOutcome(anon, "rejected", detail=problem)
    return DocOutcome(anon, "accepted", parsed.readable_name)
