from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tabqa.core import AnswerType, CandidateStatus, Question, TypedAnswer
from tabqa.e2e_solver import parse_freeform_answer, render_markdown, solve_e2e
from tabqa.retrieval import RowMatch
from tabqa.tables import ColumnSelection, load_table

from .helpers import gateway_for


@pytest.fixture
def small_table(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("word\nonly\n", encoding="utf-8")
    return load_table(path)


def _selection(table) -> ColumnSelection:
    return ColumnSelection(question_id="q", selected=tuple(table.column_names))


def test_render_minimal_table(small_table):
    text = render_markdown(small_table, _selection(small_table), row_limit=5)
    assert text.splitlines() == ["| word |", "| --- |", "| only |"]


def test_render_escapes_pipes(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text('v\n"a|b"\n', encoding="utf-8")
    table = load_table(path)
    text = render_markdown(table, _selection(table), row_limit=5)
    assert "a\\|b" in text


def test_render_row_limit(tmp_path):
    path = tmp_path / "big.csv"
    path.write_text("n\n" + "\n".join(str(i) for i in range(100)) + "\n", encoding="utf-8")
    table = load_table(path)
    text = render_markdown(table, _selection(table), row_limit=20)
    assert len(text.splitlines()) == 22  # header + separator + 20 data lines


def test_render_ranked_rows_first(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("n\n10\n20\n30\n40\n", encoding="utf-8")
    table = load_table(path)
    matches = [RowMatch(row_index=2, score=0.9), RowMatch(row_index=0, score=0.1)]
    text = render_markdown(table, _selection(table), row_limit=3, matches=matches)
    assert text.splitlines()[2:] == ["| 30 |", "| 10 |", "| 20 |"]


def test_parse_booleans():
    assert parse_freeform_answer("False") == TypedAnswer.boolean(False)
    assert parse_freeform_answer("  true ") == TypedAnswer.boolean(True)


def test_parse_number_list():
    assert parse_freeform_answer("[2000, 2100, 2200]") == TypedAnswer.list_number([2000, 2100, 2200])


def test_parse_category_list_strips_quotes():
    assert parse_freeform_answer("['Tree', 'Stone']") == TypedAnswer.list_category(["Tree", "Stone"])
    assert parse_freeform_answer('["a,b", "c"]') == TypedAnswer.list_category(["a,b", "c"])


def test_parse_numbers():
    assert parse_freeform_answer("35.2") == TypedAnswer.number(Decimal("35.2"))
    assert parse_freeform_answer("1,234.5") == TypedAnswer.number(Decimal("1234.5"))
    assert parse_freeform_answer("-7") == TypedAnswer.number(Decimal("-7"))
    # Scientific notation is not a number here; it stays a category.
    assert parse_freeform_answer("1e5") == TypedAnswer.category("1e5")


def test_parse_category_fallback_verbatim():
    assert parse_freeform_answer("Spanish") == TypedAnswer.category("Spanish")
    assert parse_freeform_answer("'Spanish'") == TypedAnswer.category("'Spanish'")


def test_parse_empty_list():
    assert parse_freeform_answer("[]") == TypedAnswer.list_category([])


@given(st.text(min_size=1, max_size=30))
def test_parse_is_total_and_deterministic(text):
    if not text.strip():
        return
    first = parse_freeform_answer(text)
    assert first == parse_freeform_answer(text)
    assert first.type in AnswerType


@given(st.text(min_size=1, max_size=30))
def test_parse_precedence_order(text):
    trimmed = text.strip()
    if not trimmed:
        return
    answer = parse_freeform_answer(text)
    if trimmed.lower() in ("true", "false"):
        assert answer.type is AnswerType.BOOLEAN
    elif trimmed.startswith("[") and trimmed.endswith("]"):
        assert answer.type in (AnswerType.LIST_NUMBER, AnswerType.LIST_CATEGORY)


def _question() -> Question:
    return Question(id="q", text="Is there only one word?", dataset_id="t")


def test_solve_boolean(small_table):
    gw = gateway_for({"Analyze the data": "Reasoning...\nFinal Answer: True"})
    outcome = solve_e2e(_question(), small_table, _selection(small_table), [], gw, "e2e-model")
    assert outcome.candidate.status is CandidateStatus.OK
    assert outcome.candidate.result == TypedAnswer.boolean(True)
    assert outcome.candidate.code == ""
    assert len(gw.requests) == 1
    assert [e.tag for e in outcome.exchanges] == ["e2e"]


def test_solve_list(small_table):
    gw = gateway_for({"Analyze the data": "Final Answer: ['Tree', 'Stone']"})
    outcome = solve_e2e(_question(), small_table, _selection(small_table), [], gw, "m")
    assert outcome.candidate.result == TypedAnswer.list_category(["Tree", "Stone"])


def test_solve_missing_marker(small_table):
    gw = gateway_for({"Analyze the data": "I have no idea."})
    outcome = solve_e2e(_question(), small_table, _selection(small_table), [], gw, "m")
    assert outcome.candidate.status is CandidateStatus.EXTRACTION_FAILED


def test_solve_takes_first_line_after_marker(small_table):
    gw = gateway_for({"Analyze the data": "Final Answer: 42\nBecause of reasons."})
    outcome = solve_e2e(_question(), small_table, _selection(small_table), [], gw, "m")
    assert outcome.candidate.result == TypedAnswer.number(42)
