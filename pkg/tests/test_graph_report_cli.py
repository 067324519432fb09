import json
import math
from pathlib import Path

import pytest

from libinduce.cli import main
from libinduce.expr import parse
from libinduce.graph import export_graph, invocation_edges, load_solutions
from libinduce.library import register_abstractions, rename_everywhere
from libinduce.report import find_runs, render_table, report_metrics, summarize_run, to_csv

# -- graph ------------------------------------------------------------------------


def _chain(arith):
    return register_abstractions(arith, [parse("(lambda (+ $0 $0))"), parse("(lambda (fn_1 (fn_1 $0)))")])


def test_caller_points_at_callee(arith):
    lib = _chain(arith)
    assert invocation_edges(lib) == [("fn_1", "+"), ("fn_2", "fn_1")]
    assert '  "fn_2" -> "fn_1";' in export_graph(lib).splitlines()


def test_empty_library_has_only_primitive_nodes(arith):
    dot = export_graph(arith)
    assert "->" not in dot
    assert sum(1 for line in dot.splitlines() if "shape=box" in line) == len(arith.base)


def test_task_neighbours_are_capped(arith):
    lib = _chain(arith)
    solutions = {f"t{i}": [parse("(lambda (fn_2 $0))")] for i in range(7)}
    dot = export_graph(lib, solutions, tasks_per_abstraction=3)
    edges = [line for line in dot.splitlines() if "style=dashed" in line]
    assert len(edges) == 3 and all('-> "fn_2"' in e for e in edges)
    assert export_graph(lib, solutions) == dot  # deterministic


def test_renamed_nodes_keep_anonymous_label(arith):
    lib = rename_everywhere(_chain(arith), "fn_1", "double")
    dot = export_graph(lib)
    assert '"double" [shape=ellipse, style=filled, fillcolor=lightblue, label="double\\n(fn_1)"];' in dot
    assert '"fn_2" -> "double";' in dot


def test_load_solutions(arith, tmp_path):
    lib = _chain(arith)
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"a": ["(lambda (fn_1 $0))"], "b": [["(lambda $0)", -1.0]]}))
    assert load_solutions(str(path), lib) == {"a": [parse("(lambda (fn_1 $0))")], "b": [parse("(lambda $0)")]}


# -- report --------------------------------------------------------------------------


def _fake_run(root: Path, name, condition, seed, tests):
    d = root / name
    d.mkdir(parents=True)
    (d / "config.json").write_text(json.dumps({"domain": "toylist", "condition": condition, "seed": seed}))
    rows = [{"iteration": i + 1, "train_solve_pct": 50.0, "test_solve_pct": t} for i, t in enumerate(tests)]
    (d / "metrics.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    return d


def test_single_run_has_zero_spread(tmp_path):
    run = _fake_run(tmp_path, "a", "lilo", 0, [None, None, 40.0])
    (row,) = report_metrics([run])
    assert row.best == row.mean == 40.0 and row.std == 0.0 and row.n_runs == 1


def test_three_seeds_population_std(tmp_path):
    # final test values 30, 45, 60 (the last non-null row of each run)
    for seed, tests in enumerate([[10.0, None, 30.0], [None, 45.0, None], [20.0, 60.0]]):
        _fake_run(tmp_path, f"r{seed}", "lilo", seed, tests)
    _fake_run(tmp_path, "d0", "dreamcoder", 0, [12.5])
    rows = report_metrics(find_runs(tmp_path))
    by = {r.condition: r for r in rows}
    lilo = by["lilo"]
    assert lilo.values == (30.0, 45.0, 60.0) and lilo.n_runs == 3
    assert lilo.best == 60.0 and lilo.mean == 45.0
    assert lilo.std == pytest.approx(math.sqrt(150.0))  # (225 + 0 + 225) / 3
    assert to_csv(rows).splitlines() == [
        "domain,condition,n_runs,max,mean,std",
        "toylist,dreamcoder,1,12.5000,12.5000,0.0000",
        "toylist,lilo,3,60.0000,45.0000,12.2474",
    ]
    table = render_table(rows).splitlines()
    assert table[0].split() == ["domain", "condition", "runs", "max", "mean", "std"]
    assert table[3].split() == ["toylist", "lilo", "3", "60.00", "45.00", "12.25"]


def test_summarize_run_without_test_rows(tmp_path):
    s = summarize_run(_fake_run(tmp_path, "a", "lilo", 0, [None]))
    assert s.final_test is None and s.iterations == 1
    assert report_metrics([tmp_path / "a"]) == []


# -- CLI ---------------------------------------------------------------------------------


def test_cli_compress(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('"(+ a (+ a a))"\n{"program": "(+ b (+ b b))"}\n')
    assert main(["compress", str(corpus)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ratio"] == 3.0 and out["utilities"] == [3]
    assert out["abstractions"] == [{"name": "fn_1", "body": "(lambda (+ $0 (+ $0 $0)))", "arity": 1, "utility": 3}]
    assert out["rewritten"] == ["(fn_1 a)", "(fn_1 b)"]


def test_cli_end_to_end(tmp_path, capsys):
    runs = tmp_path / "runs"
    assert main(["run", "--domain", "toylist", "--condition", "llm_solver", "--iterations", "1",
                 "--max-candidates", "200", "--out", str(runs), "--name", "a"]) == 0
    run = runs / "a"
    assert json.loads((run / "config.json").read_text())["condition"] == "llm_solver"
    assert main(["run", "--domain", "toylist", "--condition", "lilo", "--iterations", "2",
                 "--max-candidates", "200", "--out", str(runs), "--name", "b"]) == 0
    lib = runs / "b" / "library.json"

    assert main(["graph", str(lib), "--domain", "toylist", "--run", str(runs / "b"),
                 "--out", str(tmp_path / "g.dot")]) == 0
    assert (tmp_path / "g.dot").read_text().startswith("digraph library {")

    assert main(["autodoc", str(lib), "--domain", "toylist", "--run", str(runs / "b"),
                 "--out", str(tmp_path / "doc.json")]) == 0
    assert json.loads((tmp_path / "doc.json").read_text())["abstractions"]

    assert main(["offline", str(lib), "--domain", "toylist", "--max-candidates", "100",
                 "--checkpoints", "0", "100", "--out", str(tmp_path / "off")]) == 0
    assert (tmp_path / "off" / "offline.csv").exists()

    capsys.readouterr()
    assert main(["report", str(runs), "--csv", str(tmp_path / "r.csv")]) == 0
    assert "llm_solver" in capsys.readouterr().out
    assert (tmp_path / "r.csv").read_text().startswith("domain,condition")

    assert main(["gen-corpus", "--domain", "toylist", "--out", str(tmp_path / "data"), "--seed", "3"]) == 0
    assert (tmp_path / "data" / "toylist.train.jsonl").exists()

    assert main(["run", "--resume", str(run)]) == 0


def test_cli_errors_exit_with_status_two(tmp_path, capsys):
    assert main(["run", "--domain", "nope", "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["graph", str(tmp_path / "missing.json"), "--domain", "toylist"]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])
