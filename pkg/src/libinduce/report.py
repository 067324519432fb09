"""Aggregate final test solve rates across runs, grouped by domain and condition.

The spread is the population standard deviation (divide by n), so a single
run reports std 0.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

__all__ = ["RunSummary", "ConditionSummary", "summarize_run", "find_runs", "report_metrics", "render_table", "to_csv"]


@dataclass(frozen=True)
class RunSummary:
    run_dir: str
    domain: str
    condition: str
    seed: int
    iterations: int
    final_test: float | None
    final_train: float


@dataclass(frozen=True)
class ConditionSummary:
    domain: str
    condition: str
    n_runs: int
    best: float
    mean: float
    std: float
    values: tuple[float, ...]


def summarize_run(run_dir: str | Path) -> RunSummary:
    run_dir = Path(run_dir)
    cfg = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
    rows = [json.loads(x) for x in (run_dir / "metrics.jsonl").read_text(encoding="utf-8").splitlines() if x.strip()]
    tests = [r["test_solve_pct"] for r in rows if r.get("test_solve_pct") is not None]
    return RunSummary(
        str(run_dir), cfg["domain"], cfg["condition"], cfg["seed"], len(rows),
        tests[-1] if tests else None, rows[-1]["train_solve_pct"] if rows else 0.0,
    )


def find_runs(root: str | Path) -> list[Path]:
    """Run directories at or below ``root`` (those holding config + metrics)."""
    root = Path(root)
    found = {p.parent for p in root.rglob("metrics.jsonl") if (p.parent / "config.json").exists()}
    return sorted(found)


def _stats(values: list[float]) -> tuple[float, float, float]:
    mean = sum(values) / len(values)
    return max(values), mean, math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def report_metrics(runs: Iterable[str | Path]) -> list[ConditionSummary]:
    groups: dict[tuple[str, str], list[float]] = defaultdict(list)
    for run in runs:
        s = summarize_run(run)
        if s.final_test is not None:
            groups[(s.domain, s.condition)].append(s.final_test)
    out = []
    for (domain, condition), values in sorted(groups.items()):
        best, mean, std = _stats(values)
        out.append(ConditionSummary(domain, condition, len(values), best, mean, std, tuple(values)))
    return out


def to_csv(rows: Iterable[ConditionSummary]) -> str:
    lines = ["domain,condition,n_runs,max,mean,std"]
    lines += [f"{r.domain},{r.condition},{r.n_runs},{r.best:.4f},{r.mean:.4f},{r.std:.4f}" for r in rows]
    return "\n".join(lines) + "\n"


def render_table(rows: Iterable[ConditionSummary]) -> str:
    rows = list(rows)
    header = ("domain", "condition", "runs", "max", "mean", "std")
    body = [(r.domain, r.condition, str(r.n_runs), f"{r.best:.2f}", f"{r.mean:.2f}", f"{r.std:.2f}") for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join([fmt.format(*header), fmt.format(*("-" * w for w in widths))] + [fmt.format(*b) for b in body]) + "\n"
