"""Append-only record of backend queries and failures."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import asdict, dataclass, field

__all__ = ["QueryRecord", "FailureRecord", "UsageLedger"]


@dataclass(frozen=True)
class QueryRecord:
    iteration: int
    purpose: str  # "solve" or "autodoc"
    subject: str  # task id or abstraction name
    prompt_tokens: int
    completion_tokens: int
    completions: int
    seconds: float = 0.0


@dataclass(frozen=True)
class FailureRecord:
    iteration: int
    stage: str
    subject: str
    kind: str
    detail: str = ""


@dataclass
class UsageLedger:
    queries: list[QueryRecord] = field(default_factory=list)
    failures: list[FailureRecord] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_query(self, rec: QueryRecord) -> None:
        with self._lock:
            self.queries.append(rec)

    def record_failure(self, iteration: int, stage: str, subject: str, kind: str, detail: str = "") -> None:
        with self._lock:
            self.failures.append(FailureRecord(iteration, stage, subject, kind, detail[:500]))

    def totals(self, iteration: int | None = None) -> dict[str, int]:
        qs = [q for q in self.queries if iteration is None or q.iteration == iteration]
        return {
            "queries": len(qs),
            "prompt_tokens": sum(q.prompt_tokens for q in qs),
            "completion_tokens": sum(q.completion_tokens for q in qs),
            "completions": sum(q.completions for q in qs),
        }

    def failure_counts(self, iteration: int | None = None) -> dict[str, int]:
        return dict(sorted(Counter(
            f"{f.stage}:{f.kind}" for f in self.failures if iteration is None or f.iteration == iteration
        ).items()))

    def to_json(self, timings: bool = False) -> dict:
        def q(rec: QueryRecord) -> dict:
            d = asdict(rec)
            if not timings:
                d.pop("seconds")
            return d

        return {
            "queries": [q(r) for r in self.queries],
            "failures": [asdict(f) for f in self.failures],
        }

    @classmethod
    def from_json(cls, data: dict) -> UsageLedger:
        return cls(
            [QueryRecord(**r) for r in data.get("queries", [])],
            [FailureRecord(**f) for f in data.get("failures", [])],
        )
