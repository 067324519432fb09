"""Small integer/list DSL used for oracle tests and fast end-to-end runs."""

from __future__ import annotations

from ..library import Primitive
from .corpus import Slot, Template

HEADER = (
    "The following programs compute with natural numbers and lists of numbers. "
    "Programs are curried lambda-calculus terms; fold is a right fold taking the "
    "list, the initial accumulator, then a function of element and accumulator."
)


def add(a: int, b: int) -> int:
    return a + b


def sub(a: int, b: int) -> int:
    return a - b


def mul(a: int, b: int) -> int:
    return a * b


def cons(x, xs: tuple) -> tuple:
    return (x,) + xs


def car(xs: tuple):
    return xs[0]


def cdr(xs: tuple) -> tuple:
    if not xs:
        raise IndexError("cdr of empty list")
    return xs[1:]


def map_(f, xs: tuple) -> tuple:
    return tuple(f(x) for x in xs)


def fold(xs: tuple, init, f):
    acc = init
    for x in reversed(xs):
        acc = f(x)(acc)
    return acc


def length(xs: tuple) -> int:
    return len(xs)


def if_(c: bool, a, b):
    return a if c else b


def eq(a: int, b: int) -> bool:
    return a == b


def gt(a: int, b: int) -> bool:
    return a > b


def is_empty(xs: tuple) -> bool:
    return len(xs) == 0


def arith_primitives() -> list[Primitive]:
    """The {0, 1, +} fragment used for exhaustive enumeration oracles."""
    P = Primitive.of
    return [P("0", "int", 0), P("1", "int", 1), P("+", "int -> int -> int", add)]


def primitives() -> list[Primitive]:
    P = Primitive.of
    return arith_primitives() + [
        P("2", "int", 2),
        P("-", "int -> int -> int", sub),
        P("*", "int -> int -> int", mul),
        P("empty", "list(t0)", ()),
        P("cons", "t0 -> list(t0) -> list(t0)", cons),
        P("car", "list(t0) -> t0", car, "first element"),
        P("cdr", "list(t0) -> list(t0)", cdr, "all but the first element"),
        P("map", "(t0 -> t1) -> list(t0) -> list(t1)", map_),
        P("fold", "list(t0) -> t1 -> (t0 -> t1 -> t1) -> t1", fold,
          "right fold: list, initial value, then f element accumulator"),
        P("length", "list(t0) -> int", length),
        P("if", "bool -> t0 -> t0 -> t0", if_),
        P("eq?", "int -> int -> bool", eq),
        P("gt?", "int -> int -> bool", gt),
        P("is_empty", "list(t0) -> bool", is_empty),
    ]


# -- task templates -----------------------------------------------------------

# the smallest spelling of each constant in the base DSL
NUMERALS = {
    0: "0", 1: "1", 2: "2", 3: "(+ 1 2)", 4: "(+ 2 2)", 5: "(+ 1 (+ 2 2))",
    6: "(* 2 (+ 1 2))", 7: "(+ 1 (* 2 (+ 1 2)))", 8: "(* 2 (+ 2 2))", 9: "(* (+ 1 2) (+ 1 2))",
}


def _k(lo: int, hi: int):
    def sample(rng):
        k = rng.randint(lo, hi)
        return str(k), NUMERALS[k]
    return sample


def _int_input(rng):
    return (rng.randint(0, 20),)


def _list_input(rng):
    return (tuple(rng.randint(0, 9) for _ in range(rng.randint(1, 6))),)


K = Slot("K", _k(1, 9))
K2 = Slot("K", _k(2, 9))
K0 = Slot("K", _k(0, 9))

_SUM = "(fold $0 0 (lambda (lambda (+ $1 $0))))"

TEMPLATES = [
    Template("add_k", "add {K} to the number", "(lambda (+ $0 {K}))", (K,)),
    Template("sub_k", "subtract {K} from the number", "(lambda (- $0 {K}))", (K,)),
    Template("mul_k", "multiply the number by {K}", "(lambda (* $0 {K}))", (K2,)),
    Template("double", "double the number", "(lambda (+ $0 $0))"),
    Template("square", "square the number", "(lambda (* $0 $0))"),
    Template("map_add_k", "add {K} to each element", "(lambda (map (lambda (+ $0 {K})) $0))", (K,),
             "list(int) -> list(int)", _list_input),
    Template("map_mul_k", "multiply each element by {K}", "(lambda (map (lambda (* $0 {K})) $0))", (K2,),
             "list(int) -> list(int)", _list_input),
    Template("map_square", "square each element", "(lambda (map (lambda (* $0 $0)) $0))", (),
             "list(int) -> list(int)", _list_input),
    Template("sum", "sum the list", f"(lambda {_SUM})", (), "list(int) -> int", _list_input),
    Template("sum_plus_k", "sum the list then add {K}", f"(lambda (+ {_SUM} {{K}}))", (K,),
             "list(int) -> int", _list_input),
    Template("count_gt_k", "count the elements greater than {K}",
             "(lambda (fold $0 0 (lambda (lambda (if (gt? $1 {K}) (+ $0 1) $0)))))", (K0,),
             "list(int) -> int", _list_input),
    Template("length", "count the elements", "(lambda (length $0))", (), "list(int) -> int", _list_input),
    Template("first_plus_k", "add {K} to the first element", "(lambda (+ (car $0) {K}))", (K0,),
             "list(int) -> int", _list_input),
    Template("cons_k", "put {K} in front of the list", "(lambda (cons {K} $0))", (K0,),
             "list(int) -> list(int)", _list_input),
    Template("drop_first", "remove the first element", "(lambda (cdr $0))", (),
             "list(int) -> list(int)", _list_input),
]

REQUEST = "int -> int"
INPUTS = _int_input
