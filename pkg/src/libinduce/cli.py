"""Command-line entry point: ``libinduce <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .compression import CompressionConfig, compress, compression_ratio
from .errors import LibInduceError
from .expr import parse, to_sexpr

log = logging.getLogger("libinduce")


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _run_config(args: argparse.Namespace):
    from .llm.backends import BackendConfig
    from .orchestrator import RunConfig
    from .search import SearchBudget

    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in {
        "domain": args.domain, "condition": args.condition, "profile": args.profile,
        "n_iterations": args.iterations, "batch_size": args.batch_size, "seed": args.seed,
        "workers": args.workers, "selection": args.selection, "data_dir": args.data_dir,
    }.items() if v is not None}
    if args.max_candidates is not None or args.timeout is not None:
        base = cfg.search or SearchBudget()
        overrides["search"] = replace(
            base,
            max_candidates=args.max_candidates if args.max_candidates is not None else base.max_candidates,
            timeout=args.timeout if args.timeout is not None else base.timeout,
        )
    backend = {k: v for k, v in {"kind": args.backend, "endpoint": args.endpoint, "model": args.model}.items()
               if v is not None}
    if backend:
        overrides["backend"] = BackendConfig.from_dict({**cfg.backend.to_dict(), **backend})
    return RunConfig.from_dict({**cfg.to_dict(), **{k: v for k, v in overrides.items()}}) if overrides else cfg


def cmd_run(args: argparse.Namespace) -> int:
    from .orchestrator import resume_run, run_online

    if args.resume:
        run_dir = resume_run(args.resume)
    else:
        run_dir = run_online(_run_config(args), args.out, args.name)
    print(run_dir)
    return 0


def cmd_offline(args: argparse.Namespace) -> int:
    from .orchestrator import OfflineConfig, run_offline
    from .search import SearchBudget

    budget = SearchBudget(timeout=args.timeout, max_candidates=args.max_candidates)
    checkpoints = tuple(args.checkpoints) if args.checkpoints else None
    cfg = OfflineConfig(args.domain, budget, args.unit, checkpoints, args.split, args.workers, args.data_dir)
    reports = run_offline(args.library, cfg, args.out, baseline=not args.no_baseline, training_run=args.training_run)
    for name, r in reports.items():
        curve = "  ".join(f"{b:g}:{p:.1f}%" for b, p in r.curve)
        print(f"{name:8s} {curve}")
    return 0


def _read_programs(path: str) -> list[str]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        item = json.loads(line)
        out.append(item if isinstance(item, str) else item["program"])
    return out


def cmd_compress(args: argparse.Namespace) -> int:
    corpus = [parse(p) for p in _read_programs(args.corpus)]
    cfg = CompressionConfig(iterations=args.iterations, max_arity=args.max_arity)
    result = compress(corpus, cfg)
    payload = {
        "abstractions": [
            {"name": s.name, "body": to_sexpr(b), "arity": s.arity, "utility": s.utility}
            for s, b in zip(result.steps, result.bodies)
        ],
        "rewritten": [to_sexpr(p) for p in result.rewritten],
        "ratio": compression_ratio(corpus, result.rewritten),
        "utilities": [s.utility for s in result.steps],
        "steps": [s.to_json() for s in result.steps],
    }
    _write(json.dumps(payload, indent=1) + "\n", args.out)
    return 0


def _solutions(run_dir: str, lib):
    from .graph import solutions_from_checkpoint
    from .orchestrator import read_checkpoints

    rows = read_checkpoints(run_dir)
    return solutions_from_checkpoint(rows[-1], lib) if rows else {}


def cmd_autodoc(args: argparse.Namespace) -> int:
    from .autodoc import AutoDocConfig, document_library
    from .domains import load_domain
    from .library import Library
    from .llm.backends import BackendConfig, make_backend
    from .llm.ledger import UsageLedger

    domain = load_domain(args.domain, args.data_dir)
    lib = Library.from_json(json.loads(Path(args.library).read_text(encoding="utf-8")), domain.primitives)
    descriptions = {t.id: t.description for t in domain.train + domain.test}
    corpus = []
    if args.run:
        for tid, programs in sorted(_solutions(args.run, lib).items()):
            corpus.append((descriptions.get(tid, tid), programs[0]))
    bcfg = BackendConfig.from_file(args.backend_config) if args.backend_config else BackendConfig()
    if args.backend:
        bcfg = replace(bcfg, kind=args.backend)
    truth = {t.description: t.program for t in domain.train + domain.test if t.program}
    backend = make_backend(bcfg, truth, domain.doc_names)
    ledger = UsageLedger()
    lib, renames, outcomes = document_library(lib, corpus, backend, AutoDocConfig(), ledger)
    for o in outcomes:
        print(f"{o.anon_name:8s} {o.status:14s} {o.readable_name or ''} {o.detail}".rstrip())
    _write(lib.dumps(), args.out)
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    from .domains import load_domain
    from .graph import export_graph
    from .library import Library

    domain = load_domain(args.domain, args.data_dir, validate=False)
    lib = Library.from_json(json.loads(Path(args.library).read_text(encoding="utf-8")), domain.primitives)
    solutions = _solutions(args.run, lib) if args.run else None
    descriptions = {t.id: t.description for t in domain.train + domain.test}
    _write(export_graph(lib, solutions, args.tasks_per_abstraction, descriptions), args.out)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .report import find_runs, render_table, report_metrics, to_csv

    runs = [r for root in args.runs for r in find_runs(root)]
    if not runs:
        print("no completed runs found", file=sys.stderr)
        return 1
    rows = report_metrics(runs)
    print(render_table(rows), end="")
    if args.csv:
        _write(to_csv(rows), args.csv)
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    from .domains import CORPUS_SEED, write_corpus

    train, test = write_corpus(args.domain, args.out, args.seed if args.seed is not None else CORPUS_SEED)
    print(train)
    print(test)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="libinduce", description="Library learning for program synthesis.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="online learning loop")
    r.add_argument("--config", help="YAML or JSON run config")
    r.add_argument("--domain")
    r.add_argument("--condition", help="preset: dreamcoder, llm_solver, llm_solver_search, "
                                        "lilo_no_search_no_autodoc, lilo_no_search, lilo")
    r.add_argument("--profile", choices=["desk", "full"])
    r.add_argument("--iterations", type=int)
    r.add_argument("--batch-size", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--selection", choices=["random", "cosine"])
    r.add_argument("--max-candidates", type=int)
    r.add_argument("--timeout", type=float)
    r.add_argument("--backend", help="backend kind: http, oracle, identity, garbage, ill_typed, file")
    r.add_argument("--endpoint")
    r.add_argument("--model")
    r.add_argument("--data-dir")
    r.add_argument("--out", default="runs", help="parent directory for run directories")
    r.add_argument("--name", help="run directory name (default: timestamped)")
    r.add_argument("--resume", metavar="RUN_DIR", help="continue an existing run")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("offline", help="solve-rate curves of a frozen library")
    o.add_argument("library")
    o.add_argument("--domain", required=True)
    o.add_argument("--unit", choices=["candidates", "seconds"], default="candidates")
    o.add_argument("--max-candidates", type=int, default=10_000)
    o.add_argument("--timeout", type=float, default=None)
    o.add_argument("--checkpoints", type=float, nargs="*")
    o.add_argument("--split", choices=["train", "test"], default="test")
    o.add_argument("--training-run", help="run directory whose solutions fit the weights")
    o.add_argument("--no-baseline", action="store_true")
    o.add_argument("--workers", type=int, default=1)
    o.add_argument("--data-dir")
    o.add_argument("--out", help="directory for offline.json / offline.csv")
    o.set_defaults(func=cmd_offline)

    c = sub.add_parser("compress", help="compress a JSON-lines corpus of S-expressions")
    c.add_argument("corpus")
    c.add_argument("--iterations", type=int, default=10)
    c.add_argument("--max-arity", type=int, default=3)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compress)

    a = sub.add_parser("autodoc", help="name the anonymous abstractions of a library file")
    a.add_argument("library")
    a.add_argument("--domain", required=True)
    a.add_argument("--run", help="run directory providing usage examples")
    a.add_argument("--backend", help="backend kind (default from config: oracle)")
    a.add_argument("--backend-config", help="YAML or JSON backend config")
    a.add_argument("--data-dir")
    a.add_argument("--out")
    a.set_defaults(func=cmd_autodoc)

    g = sub.add_parser("graph", help="DOT graph of a library")
    g.add_argument("library")
    g.add_argument("--domain", required=True)
    g.add_argument("--run", help="run directory providing solved tasks")
    g.add_argument("--tasks-per-abstraction", type=int, default=3)
    g.add_argument("--data-dir")
    g.add_argument("--out")
    g.set_defaults(func=cmd_graph)

    m = sub.add_parser("report", help="max/mean/std of final test solve rates per condition")
    m.add_argument("runs", nargs="+", help="run directories or parents of run directories")
    m.add_argument("--csv")
    m.set_defaults(func=cmd_report)

    k = sub.add_parser("gen-corpus", help="regenerate a domain's task corpus")
    k.add_argument("--domain", required=True)
    k.add_argument("--out", required=True)
    k.add_argument("--seed", type=int)
    k.set_defaults(func=cmd_gen_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LibInduceError, ValueError, FileNotFoundError, FileExistsError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
