from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragscore.errors import MissingBinding, NoStatementsFound, UnknownPlaceholder
from ragscore.prompting import (
    PromptLibrary,
    PromptTemplate,
    format_statement_list,
    parse_statement_list,
    render,
    split_sentences,
)


@pytest.fixture(scope="module")
def library() -> PromptLibrary:
    return PromptLibrary()


def test_statement_extraction_render(library):
    prompt = library.render(
        "statement_extraction", question="Q", answer="A", sentences="0:A"
    )
    assert "Question: Q" in prompt
    assert "Answer: A" in prompt
    assert "Sentences: 0:A" in prompt


def test_empty_string_is_a_valid_binding(library):
    prompt = library.render(
        "correctness_verdict",
        question="Q",
        statements_answer="",
        statements_groundtruth="- G",
    )
    assert "Statements answer: \n" in prompt


def test_unbound_placeholder_raises(library):
    with pytest.raises(MissingBinding):
        library.render("faithfulness_verdict", statements="- S")


def test_unknown_binding_raises(library):
    with pytest.raises(UnknownPlaceholder):
        library.render(
            "faithfulness_verdict", context="C", statements="- S", answer="A"
        )


def test_render_leaves_no_bound_markers(library):
    prompt = library.render(
        "faithfulness_verdict", context="C", statements="- S"
    )
    assert "{context}" not in prompt
    assert "{statements}" not in prompt


def test_literal_braces_in_template_survive():
    template = PromptTemplate(name="t", body='Output: {"x": 1} for {question}')
    assert render(template, {"question": "Q"}) == 'Output: {"x": 1} for Q'


def test_template_dir_override(tmp_path):
    (tmp_path / "statement_extraction.txt").write_text(
        "custom {question}", encoding="utf-8"
    )
    library = PromptLibrary(tmp_path)
    assert library.render("statement_extraction", question="Q") == "custom Q"
    # templates not present in the directory fall back to the defaults
    assert "VERDICT" in library.get("correctness_verdict").body


class TestSplitSentences:
    def test_two_terminal_periods(self):
        assert split_sentences("He was born. He died.") == [
            "0:He was born.", "1:He died."
        ]

    def test_single_fragment(self):
        assert split_sentences("Germany") == ["0:Germany"]

    def test_question_and_exclamation(self):
        assert split_sentences("Who? Me!") == ["0:Who?", "1:Me!"]


class TestParseStatementList:
    def test_three_statements_in_order(self):
        raw = ("- Albert Einstein was born in Spain.\n"
               "- Albert Einstein was born in Barcelona.\n"
               "- Albert Einstein was born in 1879.")
        statements = parse_statement_list(raw)
        assert [s.text for s in statements] == [
            "Albert Einstein was born in Spain.",
            "Albert Einstein was born in Barcelona.",
            "Albert Einstein was born in 1879.",
        ]
        assert [s.index for s in statements] == [0, 1, 2]

    def test_preamble_ignored(self):
        statements = parse_statement_list("Sure! Here they are:\n- X plus context")
        assert len(statements) == 1
        assert statements[0].text == "X plus context"

    def test_no_hyphen_lines(self):
        with pytest.raises(NoStatementsFound):
            parse_statement_list("no list at all")

    def test_short_noise_dropped(self):
        with pytest.raises(NoStatementsFound):
            parse_statement_list("- x")


@given(st.lists(
    st.text(alphabet=st.characters(blacklist_characters="\n-",
                                   blacklist_categories=("Cs", "Cc")),
            min_size=2).map(str.strip).filter(lambda t: len(t) >= 2),
    min_size=1, max_size=8,
))
def test_parse_is_idempotent_on_rendered_output(texts):
    first = parse_statement_list("\n".join(f"- {t}" for t in texts))
    second = parse_statement_list(format_statement_list(first))
    assert first == second
