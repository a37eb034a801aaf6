"""Prompt templates, sentence splitting, and hyphen-list statement parsing.

Templates live as editable UTF-8 text files (one per template name); the
shipped defaults are packaged under ``ragscore/templates``. Placeholders use
``{name}`` syntax but only the known placeholder names are substituted, so
literal braces inside few-shot examples survive rendering untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MissingBinding, NoStatementsFound, UnknownPlaceholder
from .types import Statement

TEMPLATE_NAMES = (
    "statement_extraction",
    "correctness_verdict",
    "faithfulness_verdict",
    "constrained_parse_correctness",
    "constrained_parse_faithfulness",
)

PLACEHOLDER_NAMES = (
    "question",
    "answer",
    "sentences",
    "statements_answer",
    "statements_groundtruth",
    "context",
    "statements",
)

_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDER_NAMES) + r")\}")

# Statements shorter than this after trimming are dropped as noise.
_MIN_STATEMENT_CHARS = 2


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt body with ``{placeholder}`` markers."""

    name: str
    body: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.body))


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder in the template body.

    Raises MissingBinding if a placeholder has no binding and
    UnknownPlaceholder if a binding names a placeholder absent from the
    template. An empty string is a valid binding.
    """
    present = template.placeholders()
    missing = present - set(bindings)
    if missing:
        raise MissingBinding(
            f"template {template.name!r} has unbound placeholders: {sorted(missing)}"
        )
    unknown = set(bindings) - present
    if unknown:
        raise UnknownPlaceholder(
            f"bindings {sorted(unknown)} have no placeholder in template {template.name!r}"
        )
    return _PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], template.body)


_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def split_sentences(answer: str) -> list[str]:
    """Split on sentence-terminal punctuation and prefix each part "i:".

    Deliberately naive: abbreviations are not handled. The numbered
    sentences are only a hint to the simplifier LLM.
    """
    parts = [p for p in _SENTENCE_SPLIT_RE.split(answer.strip()) if p]
    return [f"{i}:{part}" for i, part in enumerate(parts)]


def parse_statement_list(raw: str) -> list[Statement]:
    """Parse the simplifier's hyphen-list completion into statements.

    Every line whose first non-whitespace character is "-" becomes one
    statement; all other lines (preambles, chatter) are ignored. Raises
    NoStatementsFound when no hyphen line survives; callers fall back to
    wrapping the whole answer as a single statement.
    """
    texts: list[str] = []
    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped.startswith("-"):
            continue
        text = stripped.lstrip("-").strip()
        if len(text) >= _MIN_STATEMENT_CHARS:
            texts.append(text)
    if not texts:
        raise NoStatementsFound("no hyphen-list lines in simplifier output")
    return [Statement(index=i, text=t) for i, t in enumerate(texts)]


def format_statement_list(statements: list[Statement]) -> str:
    """Render statements back into the hyphen-list form used in prompts."""
    return "\n".join(f"- {s.text}" for s in statements)


class PromptLibrary:
    """Loads the five templates from a directory, defaulting to the
    packaged bodies for any file the directory does not provide."""

    def __init__(self, template_dir: str | Path | None = None):
        self._templates: dict[str, PromptTemplate] = {}
        directory = Path(template_dir) if template_dir is not None else None
        for name in TEMPLATE_NAMES:
            body = None
            if directory is not None:
                candidate = directory / f"{name}.txt"
                if candidate.is_file():
                    body = candidate.read_text(encoding="utf-8")
            if body is None:
                body = (
                    resources.files("ragscore.templates")
                    .joinpath(f"{name}.txt")
                    .read_text(encoding="utf-8")
                )
            self._templates[name] = PromptTemplate(name=name, body=body)

    def get(self, name: str) -> PromptTemplate:
        return self._templates[name]

    def render(self, name: str, **bindings: str) -> str:
        return render(self.get(name), bindings)
