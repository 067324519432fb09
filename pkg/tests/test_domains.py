import json

import pytest

from libinduce.domains import (
    DATA_DIR, domain_names, generate_corpus, load_domain, recipe_for, validate_tasks, words, write_corpus,
)
from libinduce.domains.stringrw import VOWEL, regex_split
from libinduce.errors import CorpusValidationError, LibInduceError
from libinduce.evaluate import evaluate
from libinduce.tasks import Task, read_tasks
from libinduce.typecheck import infer_type
from libinduce.types import TyCon, parse_type

STRINGRW_NAMES = [
    "regex_split", "regex_map", "regex_if", "regex_match", "regex_or", "regex_concat", "regex_flatten",
    "regex_cons", "regex_car", "regex_cdr", "regex_append", "regex_tail", "regex_not",
]


def test_stringrw_primitive_names(stringrw):
    names = {p.name for p in stringrw.primitives}
    assert set(STRINGRW_NAMES) <= names
    assert {f"'{c}'" for c in "abcdefghijklmnopqrstuvwxyz"} <= names


def test_unknown_domain():
    with pytest.raises(LibInduceError, match="unknown domain"):
        load_domain("clevr")
    assert domain_names() == ["stringrw", "toylist"]


@pytest.mark.parametrize("name", ["stringrw", "toylist"])
def test_bundled_corpus_is_well_posed(name, request):
    dom = request.getfixturevalue(name)
    lib = dom.library()
    assert (len(dom.train), len(dom.test)) == (50, 30)
    ids = [t.id for t in dom.train + dom.test]
    assert len(ids) == len(set(ids))
    for t in dom.train + dom.test:
        prog = lib.parse(t.program)
        infer_type(prog, lib, t.request)
        assert t.check(prog, lib)
        for inputs, output in t.examples:
            assert len(inputs) == _n_args(t.request)
            assert _shape(output) == _shape_of_type(_result(t.request))


def _n_args(ty):
    n = 0
    while type(ty).__name__ == "Arrow":
        n, ty = n + 1, ty.to
    return n


def _result(ty):
    while type(ty).__name__ == "Arrow":
        ty = ty.to
    return ty


def _shape(v):
    match v:
        case bool():
            return "bool"
        case int():
            return "int"
        case str():
            return "str"
        case tuple():
            return "list"
    return "?"


def _shape_of_type(ty):
    assert isinstance(ty, TyCon)
    return {"int": "int", "bool": "bool", "tfullstr": "str", "tsubstr": "str", "list": "list"}[ty.name]


def test_vowel_substitution_tasks_are_present(stringrw):
    vowel = [t for t in stringrw.train if VOWEL in t.program and t.description.startswith("if there is vowel replace")]
    assert len(vowel) >= 5


def test_composed_tasks_are_present(stringrw):
    assert any(", then " in t.description for t in stringrw.train + stringrw.test)


def test_replace_template_matches_the_reference_usage(stringrw):
    lib = stringrw.library()
    t = next(t for t in stringrw.train if t.description.startswith("if there is vowel replace that with"))
    assert t.program.startswith("(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match " + VOWEL)
    assert "(regex_split '.' $0)" in t.program
    insert = t.description.split(" with ", 1)[1].replace(" ", "")
    assert evaluate(lib.parse(t.program), ["banana"], lib) == "banana".replace("a", insert)


def test_word_list():
    ws = words()
    assert len(ws) == 1000 == len(set(ws))
    assert all(w.isalpha() and w.islower() for w in ws)


def test_regex_split_semantics():
    assert regex_split(".", "abc") == ("a", "b", "c")
    assert regex_split("b", "abba") == ("a", "b", "b", "a")
    assert regex_split("x", "") == ()


def test_same_seed_gives_identical_files(tmp_path):
    for name in ("stringrw", "toylist"):
        a = write_corpus(name, tmp_path / "a", seed=5, n_train=10, n_test=5)
        b = write_corpus(name, tmp_path / "b", seed=5, n_train=10, n_test=5)
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()
        assert (tmp_path / "a" / f"{name}.manifest.json").read_bytes() == \
            (tmp_path / "b" / f"{name}.manifest.json").read_bytes()


def test_different_seeds_differ(tmp_path):
    a, _ = write_corpus("stringrw", tmp_path / "a", seed=1, n_train=10, n_test=0)
    b, _ = write_corpus("stringrw", tmp_path / "b", seed=2, n_train=10, n_test=0)
    assert a.read_bytes() != b.read_bytes()


def test_zero_tasks_give_empty_files(tmp_path):
    train, test = write_corpus("stringrw", tmp_path, seed=0, n_train=0, n_test=0)
    assert train.read_text() == "" and test.read_text() == ""
    dom = load_domain("stringrw", tmp_path)
    assert dom.train == () and dom.test == ()


def test_bundled_files_regenerate_byte_identically(tmp_path):
    for name in ("stringrw", "toylist"):
        train, test = write_corpus(name, tmp_path)
        assert train.read_bytes() == (DATA_DIR / train.name).read_bytes()
        assert test.read_bytes() == (DATA_DIR / test.name).read_bytes()


def test_generated_programs_are_unique_across_splits(toylist):
    train, test = generate_corpus(recipe_for("toylist"), toylist.library(), 3, 20, 10)
    programs = [t.program for t in train + test]
    assert len(programs) == len(set(programs)) == 30


def test_validation_lists_failing_ids(toylist, tmp_path):
    lib = toylist.library()
    good = toylist.train[0]
    wrong = Task("bad_output", "x", good.request, ((good.examples[0][0], "nope"),), good.program)
    ill = Task("bad_type", "x", parse_type("int"), good.examples, good.program)
    with pytest.raises(CorpusValidationError) as err:
        validate_tasks([good, wrong, ill, good], lib)
    for tid in ("bad_output", "bad_type", good.id):
        assert tid in str(err.value)


def test_task_file_round_trip(toylist, tmp_path):
    from libinduce.tasks import write_tasks

    path = tmp_path / "t.jsonl"
    write_tasks(path, list(toylist.train[:5]))
    assert read_tasks(path) == list(toylist.train[:5])
    assert all(json.loads(line)["id"] for line in path.read_text().splitlines())


def test_manifest_lists_primitives(stringrw):
    m = stringrw.manifest()
    assert [p["name"] for p in m["primitives"]] == [p.name for p in stringrw.primitives]
    assert "Reconstructed" in m["semantics"]
