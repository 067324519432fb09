"""Few-shot prompt rendering and token-budget packing."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from ..errors import PromptBudgetExceeded
from ..library import Abstraction, Library
from ..types import type_str

__all__ = [
    "Tokenizer", "estimate_tokens", "render_library", "PromptSpec", "build_prompt",
    "exemplar_text", "target_line", "COMMENT", "STOP",
]

Tokenizer = Callable[[str], int]

COMMENT = "-- "
STOP = "\n\n"


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def _one_line(text: str) -> str:
    return " ".join(text.split())


def render_library(lib: Library) -> str:
    """One line per production: ``name :: type`` with a doc comment when present."""
    lines = []
    for p in lib.productions:
        line = f"{p.name} :: {type_str(p.ty)}"
        if p.doc:
            line += f"  {{- {_one_line(p.doc)} -}}"
        lines.append(line)
    return "\n".join(lines)


def exemplar_text(description: str, program: str) -> str:
    return f"{COMMENT}{_one_line(description)}\n{program}"


def target_line(description: str) -> str:
    return f"{COMMENT}{_one_line(description)}\n"


@dataclass(frozen=True)
class PromptSpec:
    header: str
    library_block: str
    exemplars: tuple[tuple[str, str], ...]
    target_description: str
    token_budget: int

    @classmethod
    def pack(
        cls,
        header: str,
        lib: Library,
        candidates: Sequence[tuple[str, str]],
        target_description: str,
        token_budget: int,
        tokenizer: Tokenizer = estimate_tokens,
    ) -> PromptSpec:
        """Take exemplars in order while the rendered prompt fits the budget."""
        spec = cls(header, render_library(lib), (), target_description, token_budget)
        used = tokenizer(build_prompt(spec, tokenizer, check=False))
        if used > token_budget:
            raise PromptBudgetExceeded(f"prompt without exemplars needs {used} > {token_budget} tokens")
        chosen: list[tuple[str, str]] = []
        for ex in candidates:
            cost = tokenizer(exemplar_text(*ex) + "\n\n")
            if used + cost > token_budget:
                break
            chosen.append(ex)
            used += cost
        return cls(spec.header, spec.library_block, tuple(chosen), target_description, token_budget)


def build_prompt(spec: PromptSpec, tokenizer: Tokenizer = estimate_tokens, check: bool = True) -> str:
    """Header, library listing, exemplar blocks and the open target line."""
    parts = [spec.header.strip(), spec.library_block]
    parts += [exemplar_text(d, p) for d, p in spec.exemplars]
    text = "\n\n".join(parts) + "\n\n" + target_line(spec.target_description)
    if check and tokenizer(text) > spec.token_budget:
        raise PromptBudgetExceeded(f"prompt needs {tokenizer(text)} > {spec.token_budget} tokens")
    return text


def abstraction_listing(a: Abstraction, body_text: str) -> str:
    """Name, type and body of a learned abstraction (plus its doc if any)."""
    out = f"{a.name} :: {type_str(a.ty)}\n{body_text}"
    if a.doc:
        out += f"\n{{- {_one_line(a.doc)} -}}"
    return out
