"""Language-model backends, prompt construction and the LLM solve step."""

from .backends import (
    Backend, BackendConfig, CompletionRequest, CompletionResponse, HttpBackend, RetryingBackend,
    RetryPolicy, ScriptedBackend, make_backend, target_description,
)
from .ledger import FailureRecord, QueryRecord, UsageLedger
from .prompts import PromptSpec, build_prompt, estimate_tokens, render_library
from .selection import CosineSelection, Exemplar, RandomSelection, cosine, select_examples
from .solver import LlmSolveResult, SolveOutcome, extract_program, solve_with_llm, task_prompts

__all__ = [
    "Backend", "BackendConfig", "CompletionRequest", "CompletionResponse", "HttpBackend",
    "RetryingBackend", "RetryPolicy", "ScriptedBackend", "make_backend", "target_description",
    "FailureRecord", "QueryRecord", "UsageLedger", "PromptSpec", "build_prompt",
    "estimate_tokens", "render_library", "CosineSelection", "Exemplar", "RandomSelection",
    "cosine", "select_examples", "LlmSolveResult", "SolveOutcome", "extract_program",
    "solve_with_llm", "task_prompts",
]
