"""String-rewriting DSL modelled on regex-style string editing.

Substring values (``tsubstr``) double as regular-expression sources: a quoted
letter matches itself, ``'.'`` matches any single character, ``regex_or`` and
``regex_not`` build alternations and single-character complements. Full
strings (``tfullstr``) are plain Python strings.

These semantics are a reconstruction from published program listings; the
manifest (``data/stringrw.manifest.json``) records the same notes.
"""

from __future__ import annotations

import re
import string
from functools import lru_cache

from ..library import Primitive
from .corpus import Slot, Template

HEADER = (
    "The following programs edit English words. Each program is a lambda-calculus "
    "term over regex-style string primitives: words are split into single-letter "
    "substrings, transformed, and flattened back into a word."
)

VOWEL = "(regex_or 'a' (regex_or 'e' (regex_or 'i' (regex_or 'o' 'u'))))"
CONSONANT = f"(regex_not {VOWEL})"


@lru_cache(maxsize=512)
def _rx(source: str) -> re.Pattern:
    return re.compile(source)


def regex_split(pattern: str, s: str) -> tuple[str, ...]:
    """Partition ``s`` into matches of ``pattern`` and the gaps between them."""
    if pattern == "":
        return (s,) if s else ()
    rx = _rx(pattern)
    out: list[str] = []
    gap, i = "", 0
    while i < len(s):
        m = rx.match(s, i)
        if m and m.end() > i:
            if gap:
                out.append(gap)
                gap = ""
            out.append(m.group(0))
            i = m.end()
        else:
            gap += s[i]
            i += 1
    if gap:
        out.append(gap)
    return tuple(out)


def regex_match(pattern: str, s: str) -> bool:
    return _rx(pattern).fullmatch(s) is not None


def regex_or(a: str, b: str) -> str:
    return f"(?:{a}|{b})"


def regex_not(a: str) -> str:
    return f"(?:(?!{a}).)"


def regex_concat(a: str, b: str) -> str:
    return a + b


def regex_flatten(xs: tuple) -> str:
    return "".join(xs)


def regex_map(f, xs: tuple) -> tuple:
    return tuple(f(x) for x in xs)


def regex_if(c: bool, a, b):
    return a if c else b


def regex_cons(x, xs: tuple) -> tuple:
    return (x,) + xs


def regex_append(x, xs: tuple) -> tuple:
    return xs + (x,)


def regex_car(xs: tuple):
    return xs[0]


def regex_cdr(xs: tuple) -> tuple:
    if not xs:
        raise IndexError("cdr of empty list")
    return xs[1:]


def regex_tail(xs: tuple):
    return xs[-1]


def regex_reverse_cdr(xs: tuple) -> tuple:
    if not xs:
        raise IndexError("reverse_cdr of empty list")
    return xs[:-1]


LETTERS = string.ascii_lowercase


def primitives() -> list[Primitive]:
    P = Primitive.of
    prims = [
        P("regex_split", "tsubstr -> tfullstr -> list(tsubstr)", regex_split,
          "split a word into matches of the pattern and the gaps between them"),
        P("regex_map", "(tsubstr -> tsubstr) -> list(tsubstr) -> list(tsubstr)", regex_map),
        P("regex_if", "bool -> t0 -> t0 -> t0", regex_if),
        P("regex_match", "tsubstr -> tsubstr -> bool", regex_match,
          "does the substring (second) fully match the pattern (first)"),
        P("regex_or", "tsubstr -> tsubstr -> tsubstr", regex_or),
        P("regex_not", "tsubstr -> tsubstr", regex_not,
          "any single character not matched by the pattern"),
        P("regex_concat", "tsubstr -> tsubstr -> tsubstr", regex_concat),
        P("regex_flatten", "list(tsubstr) -> tfullstr", regex_flatten),
        P("regex_cons", "tsubstr -> list(tsubstr) -> list(tsubstr)", regex_cons),
        P("regex_car", "list(tsubstr) -> tsubstr", regex_car),
        P("regex_cdr", "list(tsubstr) -> list(tsubstr)", regex_cdr),
        P("regex_append", "tsubstr -> list(tsubstr) -> list(tsubstr)", regex_append,
          "add a substring at the end of the list"),
        P("regex_tail", "list(tsubstr) -> tsubstr", regex_tail, "last element"),
        P("regex_reverse_cdr", "list(tsubstr) -> list(tsubstr)", regex_reverse_cdr,
          "all elements but the last"),
        P("empty_string", "tsubstr", ""),
        P("'.'", "tsubstr", ".", "any single letter"),
    ]
    prims += [P(f"'{c}'", "tsubstr", c) for c in LETTERS]
    return prims


# -- task templates -----------------------------------------------------------

_CONDITIONS = [
    ("vowel", VOWEL),
    ("consonant", CONSONANT),
    ("any letter", "'.'"),
] + [(c, f"'{c}'") for c in LETTERS]


def _condition_sampler(rng):
    r = rng.random()
    if r < 0.3:
        return _CONDITIONS[0]
    if r < 0.5:
        return _CONDITIONS[1]
    if r < 0.6:
        return _CONDITIONS[2]
    return _CONDITIONS[3 + rng.randrange(len(LETTERS))]


def _insert_sampler(rng):
    a = rng.choice(LETTERS)
    if rng.random() < 0.5:
        return a, f"'{a}'"
    b = rng.choice(LETTERS)
    return f"{a} {b}", f"(regex_concat '{a}' '{b}')"


def _vowel(rng):
    return _CONDITIONS[0]


X = Slot("X", _condition_sampler)
Y = Slot("Y", _insert_sampler)
VX = Slot("X", _vowel)

_EACH = "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {X} $0) {body} $0)) (regex_split '.' $0))))"
_FIRST = "(regex_car (regex_split '.' $0))"
_LAST = "(regex_tail (regex_split '.' $0))"


def _when(test: str, then: str) -> str:
    return f"(lambda (regex_if (regex_match {{X}} {test}) {then} $0))"


TEMPLATES = [
    Template("replace_each", "if there is {X} replace that with {Y}", _EACH.replace("{body}", "{Y}"), (X, Y)),
    Template("add_after_each", "if there is {X} add {Y} after that",
             _EACH.replace("{body}", "(regex_concat $0 {Y})"), (X, Y)),
    Template("add_before_each", "if there is {X} add {Y} before that",
             _EACH.replace("{body}", "(regex_concat {Y} $0)"), (X, Y)),
    Template("remove_each", "if there is {X} remove that", _EACH.replace("{body}", "empty_string"), (X,)),
    Template("replace_first", "if the word starts with {X} replace that with {Y}",
             _when(_FIRST, "(regex_flatten (regex_cons {Y} (regex_cdr (regex_split '.' $0))))"), (X, Y)),
    Template("add_before_first", "if the word starts with {X} add {Y} before that",
             _when(_FIRST, "(regex_flatten (regex_cons {Y} (regex_split '.' $0)))"), (X, Y)),
    Template("remove_first", "if the word starts with {X} remove that",
             _when(_FIRST, "(regex_flatten (regex_cdr (regex_split '.' $0)))"), (X,)),
    Template("replace_last", "if the word ends with {X} replace that with {Y}",
             _when(_LAST, "(regex_flatten (regex_append {Y} (regex_reverse_cdr (regex_split '.' $0))))"), (X, Y)),
    Template("add_after_last", "if the word ends with {X} add {Y} after that",
             _when(_LAST, "(regex_flatten (regex_append {Y} (regex_split '.' $0)))"), (X, Y)),
    Template("remove_last", "if the word ends with {X} remove that",
             _when(_LAST, "(regex_flatten (regex_reverse_cdr (regex_split '.' $0)))"), (X,)),
    Template("prepend", "add {Y} before the word", "(lambda (regex_flatten (regex_cons {Y} (regex_split '.' $0))))", (Y,)),
    Template("append", "add {Y} after the word", "(lambda (regex_flatten (regex_append {Y} (regex_split '.' $0))))", (Y,)),
    Template("drop_first", "remove the first letter", "(lambda (regex_flatten (regex_cdr (regex_split '.' $0))))", ()),
    Template("drop_last", "remove the last letter", "(lambda (regex_flatten (regex_reverse_cdr (regex_split '.' $0))))", ()),
    Template("set_first", "replace the first letter with {Y}",
             "(lambda (regex_flatten (regex_cons {Y} (regex_cdr (regex_split '.' $0)))))", (Y,)),
    Template("set_last", "replace the last letter with {Y}",
             "(lambda (regex_flatten (regex_append {Y} (regex_reverse_cdr (regex_split '.' $0)))))", (Y,)),
]

_INPUT = "(regex_split '.' $0)"


def _then(inner: Template, outer: Template) -> Template:
    """Two-step edit: ``outer`` applied to the word ``inner`` produces."""
    inner_body = inner.program[len("(lambda "):-1]
    renamed = tuple(Slot(sl.name + "2", sl.sample) for sl in inner.slots)
    for sl in inner.slots:
        inner_body = inner_body.replace("{" + sl.name + "}", "{" + sl.name + "2}")
    inner_desc = inner.description
    for sl in inner.slots:
        inner_desc = inner_desc.replace("{" + sl.name + "}", "{" + sl.name + "2}")
    return Template(
        f"{inner.family}+{outer.family}",
        f"{inner_desc}, then {outer.description}",
        outer.program.replace(_INPUT, f"(regex_split '.' {inner_body})"),
        renamed + outer.slots,
    )


# outer steps must read the word exactly once
COMPOSED_TEMPLATES = [
    _then(inner, outer)
    for outer in TEMPLATES
    if outer.program.count(_INPUT) == 1 and not outer.program.startswith("(lambda (regex_if")
    for inner in TEMPLATES
]
COMPOSED_RATE = 0.3

# guaranteed vowel-substitution tasks so the shared vowel pattern is discoverable
SEED_TEMPLATES = [
    Template("replace_each", "if there is {X} replace that with {Y}", _EACH.replace("{body}", "{Y}"), (VX, Y)),
]
MIN_SEED_TASKS = 5

# names a scripted documentation backend gives to well-known bodies
DOC_NAMES = {VOWEL: "vowel_regex", CONSONANT: "consonant_regex"}

REQUEST = "tfullstr -> tfullstr"
