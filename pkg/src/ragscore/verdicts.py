"""Extracting labeled statements from judge output.

Three strategies: two regex passes over the raw completion (a strict one and
a permissive one that tolerates extra characters before the label), and
constrained generation, where a finite-state token automaton compiled from a
label-list JSON schema restructures the judge output into index lists.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Protocol, Sequence

from .backend import BackendClient, GenerationRequest
from .errors import (
    IndexCoverageError,
    UnknownState,
    UnsupportedSchema,
    ZeroVerdicts,
)
from .types import CorrectnessCounts, FaithfulnessCounts, VerdictCounts

logger = logging.getLogger(__name__)


class ParsingStrategy(str, Enum):
    REGEX1 = "regex1"
    REGEX2 = "regex2"
    CONSTRAINED = "constrained"


CORRECTNESS_LABELS = ("TP", "FP", "FN")
FAITHFULNESS_LABELS = ("PASSED", "FAILED")

# Strict: the label must directly follow "VERDICT: ". Permissive: extra
# characters may intervene, but never across a line boundary. Both are
# case-sensitive. The permissive wildcard is lazy so that two verdicts on
# one line both count (keeps the permissive counts >= the strict ones).
_STRICT = {
    label: re.compile(rf"\bVERDICT: {label}\b")
    for label in CORRECTNESS_LABELS + FAITHFULNESS_LABELS
}
_PERMISSIVE = {
    label: re.compile(rf"\bVERDICT: .*?{label}\b")
    for label in CORRECTNESS_LABELS + FAITHFULNESS_LABELS
}


def _patterns(strategy: ParsingStrategy) -> dict[str, re.Pattern[str]]:
    if strategy == ParsingStrategy.REGEX1:
        return _STRICT
    if strategy == ParsingStrategy.REGEX2:
        return _PERMISSIVE
    raise ValueError(f"not a regex strategy: {strategy}")


def _count_labels(
    raw: str, labels: Sequence[str], strategy: ParsingStrategy
) -> dict[str, int]:
    patterns = _patterns(strategy)
    counts = {label: len(patterns[label].findall(raw)) for label in labels}
    if strategy == ParsingStrategy.REGEX2:
        # A single line can satisfy two label patterns; counted once per
        # pattern, but worth surfacing (see parse-failure diagnostics).
        for line in raw.splitlines():
            hits = [label for label in labels if patterns[label].search(line)]
            if len(hits) > 1:
                logger.warning("line matches multiple verdict labels %s: %r", hits, line)
    if all(v == 0 for v in counts.values()):
        raise ZeroVerdicts("no verdict pattern matched the judge output")
    return counts


def parse_regex1_correctness(raw: str) -> CorrectnessCounts:
    counts = _count_labels(raw, CORRECTNESS_LABELS, ParsingStrategy.REGEX1)
    return CorrectnessCounts(tp=counts["TP"], fp=counts["FP"], fn=counts["FN"])


def parse_regex2_correctness(raw: str) -> CorrectnessCounts:
    counts = _count_labels(raw, CORRECTNESS_LABELS, ParsingStrategy.REGEX2)
    return CorrectnessCounts(tp=counts["TP"], fp=counts["FP"], fn=counts["FN"])


def parse_regex_correctness(raw: str, strategy: ParsingStrategy) -> CorrectnessCounts:
    counts = _count_labels(raw, CORRECTNESS_LABELS, strategy)
    return CorrectnessCounts(tp=counts["TP"], fp=counts["FP"], fn=counts["FN"])


def parse_regex_faithfulness(raw: str, strategy: ParsingStrategy) -> FaithfulnessCounts:
    counts = _count_labels(raw, FAITHFULNESS_LABELS, strategy)
    return FaithfulnessCounts(passed=counts["PASSED"], failed=counts["FAILED"])


# --- schema automaton ------------------------------------------------------

def load_schema(metric: str) -> dict[str, Any]:
    """Load one of the canonical label-list schema files ("correctness" or
    "faithfulness")."""
    return json.loads(
        resources.files("ragscore.schemas")
        .joinpath(f"{metric}.json")
        .read_text(encoding="utf-8")
    )


def schema_labels(schema: dict[str, Any]) -> list[str]:
    """Validate a label-list schema and return its labels in order.

    Accepted shape: an object whose properties are all integer arrays, all
    required, with no additional properties. Anything else is unsupported.
    """
    if not isinstance(schema, dict) or schema.get("type") != "object":
        raise UnsupportedSchema("schema must describe an object")
    properties = schema.get("properties")
    if not isinstance(properties, dict) or not properties:
        raise UnsupportedSchema("schema must declare at least one property")
    for name, sub in properties.items():
        if sub.get("type") != "array" or sub.get("items", {}).get("type") != "integer":
            raise UnsupportedSchema(f"property {name!r} is not an integer array")
    if set(schema.get("required", [])) != set(properties):
        raise UnsupportedSchema("all label lists must be required")
    if schema.get("additionalProperties", True):
        raise UnsupportedSchema("additional properties must be disallowed")
    return list(properties)


# Automaton states are tagged tuples; ``used`` is the frozenset of indices
# already assigned, ``last`` the most recent index of the current list (0
# before any item).
State = tuple

# statement counts beyond this would materialize >1M states
MAX_AUTOMATON_STATEMENTS = 16


@dataclass(frozen=True)
class SchemaAutomaton:
    """Finite-state token automaton accepting exactly the canonical JSON
    documents that assign every statement index to exactly one label list
    (indices ascending within each list)."""

    states: frozenset[State]
    transitions: dict[State, dict[str, State]]
    start: State
    accepting: frozenset[State]
    vocabulary: frozenset[str]
    labels: tuple[str, ...] = field(default=())
    statement_count: int = 0

    def step(self, state: State, token: str) -> State:
        if state not in self.transitions:
            raise UnknownState(f"state not reachable: {state!r}")
        try:
            return self.transitions[state][token]
        except KeyError:
            raise UnknownState(f"no transition from {state!r} on {token!r}") from None


def build_schema_automaton(
    schema: dict[str, Any], statement_count: int
) -> SchemaAutomaton:
    """Compile a label-list schema into a token automaton over statement
    index tokens plus JSON structural tokens.

    Accepted token strings concatenate to schema-valid JSON in which each
    index 1..statement_count appears in exactly one list; every reachable
    non-accepting state can still reach acceptance (no dead ends).
    """
    labels = tuple(schema_labels(schema))
    if statement_count < 1:
        raise ValueError(f"statement_count must be >= 1, got {statement_count}")
    if statement_count > MAX_AUTOMATON_STATEMENTS:
        raise ValueError(
            f"statement_count {statement_count} exceeds the automaton cap "
            f"of {MAX_AUTOMATON_STATEMENTS}"
        )

    k = len(labels)
    all_indices = frozenset(range(1, statement_count + 1))
    index_token = {i: str(i) for i in all_indices}

    def outgoing(state: State) -> dict[str, State]:
        tag = state[0]
        if tag == "start":
            return {"{": ("key", 0)}
        if tag == "key":
            (_, i) = state
            return {f'"{labels[i]}":': ("open", i)}
        if tag == "open":
            (_, i) = state
            return {"[": ("in_list", i, frozenset(), 0)}
        if tag in ("in_list", "after_comma"):
            (_, i, used, last) = state
            is_last_list = i == k - 1
            unused = sorted(all_indices - used)
            moves: dict[str, State] = {}
            if is_last_list:
                candidates = unused[:1]  # forced ascending: only the minimum
            else:
                candidates = [idx for idx in unused if idx > last]
            for idx in candidates:
                moves[index_token[idx]] = ("after_item", i, used | {idx}, idx)
            if tag == "in_list" and (not is_last_list or not unused):
                moves["]"] = ("closed", i, used)
            return moves
        if tag == "after_item":
            (_, i, used, last) = state
            is_last_list = i == k - 1
            unused = all_indices - used
            moves = {}
            # A comma commits to another item; only offer it when one can
            # actually follow (ascending order inside the list).
            can_continue = bool(unused) if is_last_list else any(
                idx > last for idx in unused
            )
            if can_continue:
                moves[","] = ("after_comma", i, used, last)
            if not is_last_list or not unused:
                moves["]"] = ("closed", i, used)
            return moves
        if tag == "closed":
            (_, i, used) = state
            if i < k - 1:
                return {",": ("key_after_comma", i + 1, used)}
            return {"}": ("accept",)}
        if tag == "key_after_comma":
            (_, i, used) = state
            return {f'"{labels[i]}":': ("open_next", i, used)}
        if tag == "open_next":
            (_, i, used) = state
            return {"[": ("in_list", i, used, 0)}
        if tag == "accept":
            return {}
        raise AssertionError(f"unknown state tag {tag!r}")

    start: State = ("start",)
    states: set[State] = set()
    transitions: dict[State, dict[str, State]] = {}
    frontier = [start]
    while frontier:
        state = frontier.pop()
        if state in states:
            continue
        states.add(state)
        moves = outgoing(state)
        transitions[state] = moves
        frontier.extend(moves.values())

    vocabulary = {token for moves in transitions.values() for token in moves}
    return SchemaAutomaton(
        states=frozenset(states),
        transitions=transitions,
        start=start,
        accepting=frozenset({("accept",)}),
        vocabulary=frozenset(vocabulary),
        labels=labels,
        statement_count=statement_count,
    )


def valid_next_tokens(automaton: SchemaAutomaton, state: State) -> set[str]:
    """The exact token mask at ``state``: empty only at acceptance."""
    if state not in automaton.transitions:
        raise UnknownState(f"state not reachable: {state!r}")
    return set(automaton.transitions[state])


class TokenStreamModel(Protocol):
    """A local sampler that picks one token from the masked candidate set.

    This is the pluggable stand-in for logit-level masking: the automaton
    supplies the mask, the model supplies the choice.
    """

    def choose(self, state: State, allowed: Sequence[str]) -> str: ...


def generate_masked(automaton: SchemaAutomaton, model: TokenStreamModel) -> str:
    """Run a token-stream model under the automaton's mask until acceptance
    and return the concatenated document."""
    state = automaton.start
    tokens: list[str] = []
    while state not in automaton.accepting:
        allowed = sorted(valid_next_tokens(automaton, state))
        token = model.choose(state, allowed)
        if token not in allowed:
            raise ValueError(f"model chose masked-out token {token!r}")
        tokens.append(token)
        state = automaton.step(state, token)
    return "".join(tokens)


def enumerate_accepted_documents(automaton: SchemaAutomaton) -> set[str]:
    """All documents the automaton accepts (exponential; small counts only)."""
    results: set[str] = set()

    def walk(state: State, tokens: list[str]) -> None:
        if state in automaton.accepting:
            results.add("".join(tokens))
            return
        for token, target in automaton.transitions[state].items():
            tokens.append(token)
            walk(target, tokens)
            tokens.pop()

    walk(automaton.start, [])
    return results


# --- constrained parsing ---------------------------------------------------

def verify_index_coverage(
    document: dict[str, list[int]], labels: Sequence[str], statement_count: int
) -> None:
    """Every index 1..statement_count must appear in exactly one list."""
    seen: list[int] = []
    for label in labels:
        seen.extend(document.get(label, []))
    expected = set(range(1, statement_count + 1))
    duplicates = {i for i in seen if seen.count(i) > 1}
    if duplicates:
        raise IndexCoverageError(f"duplicated statement indices: {sorted(duplicates)}")
    missing = expected - set(seen)
    extra = set(seen) - expected
    if missing or extra:
        raise IndexCoverageError(
            f"index coverage mismatch: missing {sorted(missing)}, extra {sorted(extra)}"
        )


def constrained_parse(
    raw_classified: str,
    metric: str,
    statement_count: int,
    backend: BackendClient,
    prompt_library,
    model_id: str,
    temperature: float = 1.0,
    max_tokens: int = 2048,
    seed: int | None = None,
) -> VerdictCounts:
    """Restructure judge output into label lists via a constrained
    generation round-trip and return counts as list lengths.

    ``metric`` is "correctness" or "faithfulness"; the matching parsing
    prompt and canonical schema are used.
    """
    if statement_count < 1:
        raise ValueError("statement_count must be >= 1")
    schema = load_schema(metric)
    labels = schema_labels(schema)
    prompt = prompt_library.render(
        f"constrained_parse_{metric}", statements=raw_classified
    )
    request = GenerationRequest(
        model_id=model_id,
        user_text=prompt,
        temperature=temperature,
        max_tokens=max_tokens,
        schema=schema,
        seed=seed,
    )
    result = backend.generate_constrained(request)
    document = json.loads(result.text)
    verify_index_coverage(document, labels, statement_count)
    if metric == "correctness":
        return CorrectnessCounts(
            tp=len(document["TP"]), fp=len(document["FP"]), fn=len(document["FN"])
        )
    return FaithfulnessCounts(
        passed=len(document["PASSED"]), failed=len(document["FAILED"])
    )
