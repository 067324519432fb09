"""Completion backends: a chat/completions HTTP client and a scripted stand-in.

Every backend turns a ``CompletionRequest`` into a ``CompletionResponse``.
Transient failures (rate limits, 5xx, timeouts) raise
``TransientBackendError`` and are retried by ``RetryingBackend``.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from ..errors import BackendError, TransientBackendError
from .prompts import COMMENT, estimate_tokens

__all__ = [
    "CompletionRequest", "CompletionResponse", "Backend", "RetryPolicy", "RetryingBackend",
    "HttpBackend", "ScriptedBackend", "BackendConfig", "make_backend", "target_description",
]


@dataclass(frozen=True)
class CompletionRequest:
    purpose: str  # "solve" | "autodoc"
    subject: str  # task id or abstraction name
    messages: tuple[tuple[str, str], ...]  # (role, content)
    n: int = 1
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 128
    stop: tuple[str, ...] = ()
    # local context for scripted backends and logs; never sent over HTTP
    meta: Mapping[str, str] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return "\n\n".join(content for _, content in self.messages)


@dataclass(frozen=True)
class CompletionResponse:
    texts: tuple[str, ...]
    prompt_tokens: int
    completion_tokens: int


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def _estimated(request: CompletionRequest, texts: Sequence[str]) -> CompletionResponse:
    return CompletionResponse(
        tuple(texts), estimate_tokens(request.text), sum(estimate_tokens(t) for t in texts)
    )


def target_description(prompt: str) -> str | None:
    """The description on the prompt's final comment line."""
    for line in reversed(prompt.rstrip("\n").splitlines()):
        if line.startswith(COMMENT):
            return line[len(COMMENT):].strip()
        if line.strip():
            return None
    return None


# -- retries ------------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 4
    base_delay: float = 1.0
    max_delay: float = 30.0
    multiplier: float = 2.0

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * self.multiplier ** attempt)


@dataclass
class RetryingBackend:
    inner: Backend
    policy: RetryPolicy = field(default_factory=RetryPolicy)
    sleep: Callable[[float], None] = time.sleep
    on_retry: Callable[[CompletionRequest, TransientBackendError], None] | None = None

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        for attempt in range(self.policy.max_retries + 1):
            try:
                return self.inner.complete(request)
            except TransientBackendError as err:
                if attempt == self.policy.max_retries:
                    raise BackendError(f"gave up after {attempt + 1} attempts: {err}") from err
                if self.on_retry is not None:
                    self.on_retry(request, err)
                self.sleep(self.policy.delay(attempt))
        raise AssertionError("unreachable")


# -- HTTP ---------------------------------------------------------------------


@dataclass
class HttpBackend:
    """Chat-completions (``api="chat"``) or legacy completions (``api="completions"``)."""

    endpoint: str
    model: str
    api: str = "chat"
    api_key_env: str = "LIBINDUCE_API_KEY"
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None

    def __post_init__(self):
        if self.api not in ("chat", "completions"):
            raise ValueError(f"unknown api style {self.api!r}")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=self.timeout, headers=headers, transport=self.transport)

    def payload(self, request: CompletionRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "n": request.n,
            "max_tokens": request.max_tokens,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        if self.api == "chat":
            body["messages"] = [{"role": r, "content": c} for r, c in request.messages]
        else:
            body["prompt"] = request.text
        return body

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        try:
            resp = self._client.post(self.endpoint, json=self.payload(request))
        except (httpx.TimeoutException, httpx.TransportError) as err:
            raise TransientBackendError(f"transport error: {err}") from err
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}", resp.status_code)
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            texts = []
            for choice in data["choices"]:
                if "message" in choice:
                    texts.append(choice["message"].get("content") or "")
                else:
                    texts.append(choice.get("text") or "")
        except (ValueError, KeyError, TypeError, AttributeError) as err:
            raise BackendError(f"unexpected response body: {resp.text[:200]}") from err
        usage = data.get("usage") or {}
        fallback = _estimated(request, texts)
        return CompletionResponse(
            tuple(texts),
            int(usage.get("prompt_tokens", fallback.prompt_tokens)),
            int(usage.get("completion_tokens", fallback.completion_tokens)),
        )

    def close(self) -> None:
        self._client.close()


# -- scripted -----------------------------------------------------------------

Responder = Callable[[CompletionRequest, random.Random], Sequence[str]]


_SYMBOLS = {"+": "plus", "-": "minus", "*": "times", "=": "eq", "<": "lt", ">": "gt"}


def _derived_name(body: str) -> str:
    words: list[str] = []
    for tok in re.findall(r"[A-Za-z_][A-Za-z0-9_?]*|'[^']*'|\d+|[-+*=<>]", body):
        if tok == "lambda":
            continue
        w = _SYMBOLS.get(tok) or tok.strip("'").removeprefix("regex_") or "empty"
        w = re.sub(r"[^A-Za-z0-9_]", "", w) or "dot"
        if w not in words:
            words.append(w)
    if not words:
        return "constant"
    name = "_".join(words[:4]) if len(words) > 1 else f"{words[0]}_helper"
    return name if not name[0].isdigit() else f"const_{name}"


@dataclass
class ScriptedBackend:
    """Deterministic backend for tests and offline runs.

    ``solve`` and ``autodoc`` produce the completion texts for each request
    kind. ``fail_every`` injects a simulated HTTP 429 on every k-th call.
    """

    solve: Responder
    autodoc: Responder
    seed: int = 0
    fail_every: int = 0
    calls: int = 0

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self.calls += 1
        if self.fail_every and self.calls % self.fail_every == 0:
            raise TransientBackendError("simulated rate limit", 429)
        # keyed on content so a resumed run sees the same answers
        digest = hashlib.sha256(request.text.encode()).hexdigest()[:16]
        rng = random.Random(f"{self.seed}:{request.purpose}:{request.subject}:{digest}")
        responder = self.solve if request.purpose == "solve" else self.autodoc
        texts = list(responder(request, rng))[: request.n]
        return _estimated(request, texts)

    # -- solve responders ------------------------------------------------

    @staticmethod
    def oracle_solver(programs: Mapping[str, str]) -> Responder:
        """Answer with the ground truth registered for the target description."""

        def respond(req: CompletionRequest, rng: random.Random) -> list[str]:
            desc = target_description(req.text)
            answer = programs.get(desc or "")
            return [answer] * req.n if answer else ["(lambda $0)"] * req.n

        return respond

    @staticmethod
    def constant_solver(text: str) -> Responder:
        return lambda req, rng: [text] * req.n

    @staticmethod
    def garbage_solver() -> Responder:
        junk = ["((", ")", "", "lambda", "(lambda (no_such_fn $0))", "(lambda $7)", "\x00\x01", "{}"]
        return lambda req, rng: [rng.choice(junk) for _ in range(req.n)]

    @staticmethod
    def ill_typed_solver() -> Responder:
        return lambda req, rng: ["(lambda (regex_car $0))", "(lambda (+ $0 empty))", "(lambda (car 1))"][: req.n]

    @staticmethod
    def pattern_solver(rules: Sequence[tuple[str, Sequence[str]]], default: Sequence[str] = ()) -> Responder:
        """First rule whose regex matches the target description wins."""
        compiled = [(re.compile(p), list(c)) for p, c in rules]

        def respond(req: CompletionRequest, rng: random.Random) -> list[str]:
            desc = target_description(req.text) or ""
            for rx, completions in compiled:
                if rx.search(desc):
                    return completions
            return list(default)

        return respond

    # -- autodoc responders ----------------------------------------------

    @staticmethod
    def namer(table: Mapping[str, Mapping[str, Any]] | None = None, by_body: Mapping[str, str] | None = None) -> Responder:
        """Documentation answers keyed by anonymous name, then by body text.

        Unknown abstractions get a name assembled from the words in their body.
        """
        table = dict(table or {})
        by_body = dict(by_body or {})

        def respond(req: CompletionRequest, rng: random.Random) -> list[str]:
            anon = req.subject
            if anon in table:
                return [json.dumps(table[anon])]
            body = req.meta.get("base_body", "")
            name = by_body.get(body) or _derived_name(req.meta.get("base_body") or req.meta.get("body", ""))
            obj = {"anonymous_name": anon, "readable_name": name,
                   "description": f"Scripted documentation: {name.replace('_', ' ')}."}
            return [f"Sure.\n{json.dumps(obj)}\n"]

        return respond

    @staticmethod
    def malformed_namer() -> Responder:
        answers = ["no json here", "{'single': 'quotes'}", '{"anonymous_name": 3}', "{", '["list"]']
        return lambda req, rng: [rng.choice(answers)]

    # -- construction ----------------------------------------------------

    @classmethod
    def from_file(cls, path: str | Path, seed: int = 0) -> ScriptedBackend:
        """Load ``{"solve": [[pattern, [completions...]], ...], "autodoc": {anon: response}}``."""
        spec = _load_mapping(Path(path))
        rules = [(r[0], r[1]) for r in spec.get("solve", [])]
        return cls(
            cls.pattern_solver(rules, spec.get("default", [])),
            cls.namer(spec.get("autodoc", {}), spec.get("autodoc_by_body", {})),
            seed=seed,
            fail_every=int(spec.get("fail_every", 0)),
        )


def _load_mapping(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        import yaml

        return yaml.safe_load(text) or {}
    return json.loads(text)


# -- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class BackendConfig:
    """How to reach the model and how to sample from it.

    ``kind`` is ``http`` or one of the scripted modes: ``oracle``, ``identity``,
    ``garbage``, ``ill_typed``, ``file``. ``malformed_docs`` and ``fail_every``
    add adversarial behaviour to scripted modes.
    """

    kind: str = "oracle"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    api: str = "chat"
    api_key_env: str = "LIBINDUCE_API_KEY"
    temperature: float = 0.90
    top_p: float = 1.0
    prompts_per_task: int = 4
    completions_per_prompt: int = 4
    max_tokens_multiplier: float = 4.0
    default_max_tokens: int = 128
    token_budget: int = 4000
    request_timeout: float = 60.0
    max_in_flight: int = 1
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    script_path: str | None = None
    malformed_docs: bool = False
    fail_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if min(self.prompts_per_task, self.completions_per_prompt, self.max_in_flight) < 1:
            raise ValueError("prompt/completion counts and max_in_flight must be >= 1")
        if self.max_tokens_multiplier <= 0 or self.token_budget <= 0:
            raise ValueError("max_tokens_multiplier and token_budget must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> BackendConfig:
        data = dict(data)
        if "retry" in data and isinstance(data["retry"], Mapping):
            data["retry"] = RetryPolicy(**data["retry"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> BackendConfig:
        return cls.from_dict(_load_mapping(Path(path)))

    def to_dict(self) -> dict[str, Any]:
        out = dict(self.__dict__)
        out["retry"] = dict(self.retry.__dict__)
        return out


def make_backend(
    cfg: BackendConfig,
    ground_truth: Mapping[str, str] | None = None,
    doc_names: Mapping[str, str] | None = None,
    sleep: Callable[[float], None] = time.sleep,
    transport: httpx.BaseTransport | None = None,
) -> RetryingBackend:
    """Build the configured backend wrapped in the retry policy.

    ``ground_truth`` maps task descriptions to programs for the oracle mode;
    ``doc_names`` maps inlined abstraction bodies to names for scripted AutoDoc.
    """
    namer = ScriptedBackend.malformed_namer() if cfg.malformed_docs else ScriptedBackend.namer(by_body=doc_names)
    match cfg.kind:
        case "http":
            inner: Backend = HttpBackend(cfg.endpoint, cfg.model, cfg.api, cfg.api_key_env,
                                         cfg.request_timeout, transport)
        case "oracle":
            inner = ScriptedBackend(ScriptedBackend.oracle_solver(ground_truth or {}), namer, cfg.seed, cfg.fail_every)
        case "identity":
            inner = ScriptedBackend(ScriptedBackend.constant_solver("(lambda $0)"), namer, cfg.seed, cfg.fail_every)
        case "garbage":
            inner = ScriptedBackend(ScriptedBackend.garbage_solver(), namer, cfg.seed, cfg.fail_every)
        case "ill_typed":
            inner = ScriptedBackend(ScriptedBackend.ill_typed_solver(), namer, cfg.seed, cfg.fail_every)
        case "file":
            if not cfg.script_path:
                raise ValueError("kind 'file' needs script_path")
            inner = ScriptedBackend.from_file(cfg.script_path, cfg.seed)
            if cfg.malformed_docs:
                inner.autodoc = namer
            if cfg.fail_every:
                inner.fail_every = cfg.fail_every
        case _:
            raise ValueError(f"unknown backend kind {cfg.kind!r}")
    return RetryingBackend(inner, cfg.retry, sleep)
