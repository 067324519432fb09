import json
import math
from pathlib import Path

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from libinduce.autodoc import document_library
from libinduce.domains.stringrw import VOWEL
from libinduce.errors import BackendError, PromptBudgetExceeded
from libinduce.library import register_abstractions
from libinduce.llm.backends import (
    BackendConfig, CompletionRequest, HttpBackend, RetryingBackend, RetryPolicy, ScriptedBackend, make_backend,
    target_description,
)
from libinduce.llm.ledger import UsageLedger
from libinduce.llm.prompts import PromptSpec, build_prompt, estimate_tokens, render_library
from libinduce.llm.selection import CosineSelection, Exemplar, RandomSelection, cosine, select_examples
from libinduce.llm.solver import extract_program, solve_with_llm
from libinduce.tasks import Frontier, FrontierEntry, Task
from libinduce.types import parse_type

FIXTURES = Path(__file__).parent / "fixtures"
NO_WAIT = RetryPolicy(base_delay=0, max_delay=0)


def _documented_vowel_library(dom):
    lib = register_abstractions(dom.library(), [dom.library().parse(VOWEL)])
    namer = ScriptedBackend.namer({"fn_1": {"anonymous_name": "fn_1", "readable_name": "vowel_regex",
                                            "description": "A pattern for any one vowel."}})
    lib, _, _ = document_library(lib, [], ScriptedBackend(ScriptedBackend.constant_solver(""), namer))
    return lib


# -- prompts ------------------------------------------------------------------


def test_prompt_matches_golden_file(stringrw):
    lib = _documented_vowel_library(stringrw)
    ex = [("if there is vowel replace that with f",
           "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match vowel_regex $0) 'f' $0)) "
           "(regex_split '.' $0))))")]
    spec = PromptSpec.pack(stringrw.header, lib, ex, "if the word starts with consonant add b before that", 4000)
    golden = (FIXTURES / "prompt_golden.txt").read_text(encoding="utf-8")
    assert build_prompt(spec) == golden
    assert build_prompt(spec) == build_prompt(spec)


def test_library_block_shows_readable_names_and_docs(stringrw):
    block = render_library(_documented_vowel_library(stringrw))
    assert block.splitlines()[-1] == "vowel_regex :: tsubstr  {- A pattern for any one vowel. -}"
    assert "fn_1" not in block
    assert len(block.splitlines()) == len(stringrw.primitives) + 1


def test_empty_exemplars_give_header_library_target(toylist):
    lib = toylist.library()
    spec = PromptSpec.pack(toylist.header, lib, [], "sum the list", 4000)
    assert build_prompt(spec) == f"{toylist.header.strip()}\n\n{render_library(lib)}\n\n-- sum the list\n"


def test_prompt_that_cannot_fit_raises(toylist):
    with pytest.raises(PromptBudgetExceeded):
        PromptSpec.pack(toylist.header, toylist.library(), [], "x", 10)


def test_packing_stops_at_budget_with_custom_tokenizer(toylist):
    lib = toylist.library()
    exemplars = [(f"task {i}", "(lambda $0)") for i in range(50)]
    words = lambda text: len(text.split())  # noqa: E731
    empty = words(build_prompt(PromptSpec.pack("h", lib, [], "t", 10**6, words), words))
    spec = PromptSpec.pack("h", lib, exemplars, "t", empty + 13, words)
    # "-- task i\n(lambda $0)" is five whitespace-separated words
    assert len(spec.exemplars) == 13 // 5
    assert words(build_prompt(spec, words)) <= empty + 13


# -- selection -------------------------------------------------------------------


def test_identical_description_is_selected_first():
    pool = [Exemplar("a", "reverse the list", "p1"), Exemplar("b", "sum the list", "p2")]
    strat = CosineSelection.bag_of_words(["reverse the list", "sum the list", "sum the list"])
    assert strat.score("sum the list", "sum the list") == 1.0
    assert strat.order(pool, "sum the list")[0].task_id == "b"


def test_orthogonal_embeddings_score_zero():
    strat = CosineSelection({"x": [1.0, 0.0], "y": [0.0, 1.0]})
    assert strat.score("x", "y") == 0.0


def test_tiny_budget_picks_exactly_top_k():
    vectors = {"t": [1.0, 0.0, 0.0], "d1": [0.9, 0.1, 0.0], "d2": [0.5, 0.5, 0.0], "d3": [0.1, 0.9, 0.0],
               "d4": [0.0, 0.0, 1.0]}
    pool = [Exemplar(f"id{i}", f"d{i}", "p") for i in (4, 2, 3, 1)]
    chosen = select_examples(pool, "t", CosineSelection(vectors), budget=2, cost=lambda e: 1)
    assert [e.description for e in chosen] == ["d1", "d2"]


def test_random_selection_is_a_seeded_permutation():
    pool = [Exemplar(str(i), f"d{i}", "p") for i in range(20)]
    a = RandomSelection(7).order(pool, "t", "s")
    assert a == RandomSelection(7).order(pool, "t", "s")
    assert sorted(a, key=lambda e: int(e.task_id)) == pool
    assert a != RandomSelection(8).order(pool, "t", "s")


_vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@given(_vec, _vec)
def test_cosine_symmetric_and_bounded(x, y):
    assert cosine(x, y) == cosine(y, x)
    assert -1.0 <= cosine(x, y) <= 1.0


# -- HTTP backend -----------------------------------------------------------------


def _ok(texts, usage=True):
    body = {"choices": [{"message": {"content": t}} for t in texts]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 7}
    return httpx.Response(200, json=body)


def _request(n=2):
    return CompletionRequest("solve", "t1", (("user", "hello"),), n=n, temperature=0.9, max_tokens=32, stop=("\n\n",))


def test_http_payload_and_auth_header(monkeypatch):
    monkeypatch.setenv("LIBINDUCE_API_KEY", "sekret")
    seen = []

    def handler(req: httpx.Request):
        seen.append(req)
        return _ok(["(lambda $0)", "x"])

    backend = HttpBackend("https://llm.test/v1/chat/completions", "m1", transport=httpx.MockTransport(handler))
    resp = backend.complete(_request())
    assert resp.texts == ("(lambda $0)", "x") and resp.prompt_tokens == 11 and resp.completion_tokens == 7
    assert seen[0].headers["Authorization"] == "Bearer sekret"
    payload = json.loads(seen[0].content)
    assert payload == {"model": "m1", "temperature": 0.9, "top_p": 1.0, "n": 2, "max_tokens": 32,
                       "stop": ["\n\n"], "messages": [{"role": "user", "content": "hello"}]}


def test_http_completions_style_and_missing_usage(monkeypatch):
    monkeypatch.delenv("LIBINDUCE_API_KEY", raising=False)
    seen = []

    def handler(req):
        seen.append(req)
        return httpx.Response(200, json={"choices": [{"text": "abc"}]})

    backend = HttpBackend("https://llm.test/v1/completions", "m", api="completions",
                          transport=httpx.MockTransport(handler))
    resp = backend.complete(_request(1))
    assert json.loads(seen[0].content)["prompt"] == "hello"
    assert "Authorization" not in seen[0].headers
    assert resp.completion_tokens == estimate_tokens("abc")


def test_rate_limit_is_retried_with_backoff():
    calls = []

    def handler(req):
        calls.append(req)
        return httpx.Response(429) if len(calls) < 3 else _ok(["ok"])

    sleeps = []
    backend = RetryingBackend(HttpBackend("https://llm.test", "m", transport=httpx.MockTransport(handler)),
                              RetryPolicy(base_delay=1.0, max_delay=30.0), sleep=sleeps.append)
    assert backend.complete(_request(1)).texts == ("ok",)
    assert len(calls) == 3 and sleeps == [1.0, 2.0]


def test_client_errors_are_not_retried():
    calls = []

    def handler(req):
        calls.append(req)
        return httpx.Response(401, text="bad key")

    backend = RetryingBackend(HttpBackend("https://llm.test", "m", transport=httpx.MockTransport(handler)),
                              NO_WAIT, sleep=lambda s: None)
    with pytest.raises(BackendError, match="401"):
        backend.complete(_request())
    assert len(calls) == 1


def test_retry_exhaustion_raises_backend_error():
    handler = lambda req: httpx.Response(503)  # noqa: E731
    backend = RetryingBackend(HttpBackend("https://llm.test", "m", transport=httpx.MockTransport(handler)),
                              RetryPolicy(max_retries=2, base_delay=0), sleep=lambda s: None)
    with pytest.raises(BackendError, match="3 attempts"):
        backend.complete(_request())


def test_unexpected_body_is_a_backend_error():
    backend = HttpBackend("https://llm.test", "m", transport=httpx.MockTransport(lambda r: httpx.Response(200, json={})))
    with pytest.raises(BackendError):
        backend.complete(_request())


# -- solver ------------------------------------------------------------------------


def _truth(dom):
    return {t.description: t.program for t in dom.train + dom.test}


def _solve(dom, cfg, tasks=None, solved=None, ledger=None, recorder=None):
    tasks = list(dom.train[:8]) if tasks is None else tasks
    backend = make_backend(cfg, _truth(dom), dom.doc_names, sleep=lambda s: None)
    if recorder is not None:
        inner = backend.inner.complete

        def spy(request):
            recorder.append(request)
            return inner(request)

        backend.inner.complete = spy
    descriptions = {t.id: t.description for t in dom.train}
    return solve_with_llm(tasks, solved or {}, descriptions, dom.library(), dom.header, cfg, backend,
                          ledger=ledger)


def test_oracle_solves_every_task_with_one_prompt(stringrw):
    result = _solve(stringrw, BackendConfig("oracle"))
    for tid, outcome in result.outcomes.items():
        assert outcome.prompts == 1 and outcome.entries, tid
        assert len(outcome.entries) == 1  # four identical completions dedup to one


def test_identity_solves_only_identity_tasks(stringrw):
    copy = Task("copy", "leave the word alone", parse_type("tfullstr -> tfullstr"), ((("abc",), "abc"),))
    result = _solve(stringrw, BackendConfig("identity"), tasks=[copy, *stringrw.train[:4]])
    assert [e.text for e in result.outcomes["copy"].entries] == ["(lambda $0)"]
    assert all(not result.outcomes[t.id].entries for t in stringrw.train[:4])
    assert all(result.outcomes[t.id].prompts == 4 for t in stringrw.train[:4])


def test_unparseable_text_counts_every_completion(stringrw, tmp_path):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"solve": [[".*", ["(("] * 4]]}))
    result = _solve(stringrw, BackendConfig("file", script_path=str(script)))
    counts = result.counts()
    assert not result.additions
    assert counts["parse_failure"] == 8 * 4 * 4 == sum(counts.values())


@pytest.mark.parametrize("kind", ["garbage", "ill_typed"])
def test_adversarial_completions_never_enter_frontiers(stringrw, kind):
    ledger = UsageLedger()
    result = _solve(stringrw, BackendConfig(kind), ledger=ledger)
    assert not result.additions
    assert ledger.failures


def test_every_added_program_is_verified(stringrw, tmp_path):
    # a mix of right, wrong and broken answers for the vowel tasks
    right = {t.description: t.program for t in stringrw.train}
    rules = [[f"^{d}$", [p, "(lambda $0)", "((", "(lambda (regex_car $0))"]] for d, p in right.items()]
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"solve": rules}))
    lib = stringrw.library()
    result = _solve(stringrw, BackendConfig("file", script_path=str(script)))
    tasks = {t.id: t for t in stringrw.train}
    for tid, entries in result.additions.items():
        for e in entries:
            assert tasks[tid].check(e.program, lib)


def test_ledger_conservation_and_budget_safety(stringrw):
    cfg = BackendConfig("identity", token_budget=900)
    solved = {t.id: Frontier(t.id).merged([FrontierEntry(stringrw.library().parse(t.program), -10.0)])
              for t in stringrw.train[8:30]}
    ledger, requests = UsageLedger(), []
    _solve(stringrw, cfg, solved=solved, ledger=ledger, recorder=requests)
    assert requests
    assert all(estimate_tokens(r.text) <= cfg.token_budget for r in requests)
    totals = ledger.totals(0)
    assert totals["queries"] == len(ledger.queries) == len(requests)
    assert totals["prompt_tokens"] == sum(q.prompt_tokens for q in ledger.queries)
    assert totals["completion_tokens"] == sum(q.completion_tokens for q in ledger.queries)


def test_exemplars_are_used_and_bound_max_tokens(stringrw):
    cfg = BackendConfig("identity")
    solved = {t.id: Frontier(t.id).merged([FrontierEntry(stringrw.library().parse(t.program), -10.0)])
              for t in stringrw.train[8:20]}
    requests = []
    _solve(stringrw, cfg, tasks=list(stringrw.train[:2]), solved=solved, recorder=requests)
    for r in requests:
        blocks = r.text.split("\n\n")
        last_program = blocks[-2].splitlines()[-1]
        assert blocks[-2].startswith("-- ")
        assert r.max_tokens == math.ceil(4.0 * estimate_tokens(last_program))
        assert r.n == 4 and r.temperature == 0.9 and r.stop == ("\n\n",)


def test_prompts_are_deterministic(stringrw):
    cfg = BackendConfig("identity")
    solved = {t.id: Frontier(t.id).merged([FrontierEntry(stringrw.library().parse(t.program), -10.0)])
              for t in stringrw.train[8:20]}
    a, b = [], []
    _solve(stringrw, cfg, tasks=list(stringrw.train[:3]), solved=solved, recorder=a)
    _solve(stringrw, cfg, tasks=list(stringrw.train[:3]), solved=solved, recorder=b)
    assert [r.text for r in a] == [r.text for r in b]
    # exemplars are resampled for each of the four prompts
    assert len({r.text for r in a[:4]}) > 1


def test_backend_failure_skips_to_next_task(stringrw):
    class Broken:
        calls = 0

        def complete(self, request):
            Broken.calls += 1
            if request.subject == stringrw.train[0].id:
                raise BackendError("down")
            return ScriptedBackend(ScriptedBackend.oracle_solver(_truth(stringrw)), None).complete(request)

    ledger = UsageLedger()
    tasks = list(stringrw.train[:3])
    result = solve_with_llm(tasks, {}, {}, stringrw.library(), stringrw.header, BackendConfig(), Broken(),
                            ledger=ledger)
    assert not result.outcomes[tasks[0].id].entries
    assert all(result.outcomes[t.id].entries for t in tasks[1:])
    assert ledger.failure_counts() == {"llm_solve:backend_error": 1}


def test_helpers():
    assert extract_program("(lambda $0)\n\n-- next") == "(lambda $0)"
    assert target_description("h\n\n-- do the thing\n") == "do the thing"
    assert target_description("h\n(lambda $0)") is None
    with pytest.raises(ValueError):
        BackendConfig(prompts_per_task=0)
    with pytest.raises(ValueError):
        make_backend(BackendConfig("nope"))
    cfg = BackendConfig("oracle", retry=RetryPolicy(max_retries=1))
    assert BackendConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
