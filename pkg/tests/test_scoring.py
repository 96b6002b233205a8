from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tabqa.core import AnswerType, TypedAnswer
from tabqa.scoring import (
    NonFinite,
    ScoredPair,
    answers_equal,
    read_score_file,
    score_run,
    truncate2,
    write_score_file,
)


def oracle_equal(expected: TypedAnswer, got: TypedAnswer) -> bool:
    """Brute-force comparison: canonicalize to strings, sort lists, compare."""

    def chop(value: Decimal) -> str:
        text = f"{value:f}"
        if "." in text:
            head, tail = text.split(".")
            text = head + "." + tail[:2]
            text = text.rstrip("0").rstrip(".")
        if text in ("-0", ""):
            text = "0"
        return text

    def canon(answer: TypedAnswer):
        if answer.type is AnswerType.NUMBER:
            return ("number", chop(answer.value))
        if answer.type is AnswerType.BOOLEAN:
            return ("boolean", str(answer.value))
        if answer.type is AnswerType.CATEGORY:
            return ("category", answer.value)
        if answer.type is AnswerType.LIST_NUMBER:
            return ("list[number]", tuple(sorted(chop(v) for v in answer.value)))
        return ("list[category]", tuple(sorted(answer.value)))

    return canon(expected) == canon(got)


def test_truncate_examples():
    assert truncate2(Decimal("35.217")) == Decimal("35.21")
    assert truncate2(Decimal("-1.999")) == Decimal("-1.99")
    assert truncate2(Decimal("5")) == Decimal("5.00")
    assert truncate2(Decimal("5")) == Decimal("5")
    assert truncate2(Decimal("35.219")) == Decimal("35.21")  # truncation, not rounding


def test_truncate_rejects_non_finite():
    with pytest.raises(NonFinite):
        truncate2(Decimal("NaN"))
    with pytest.raises(NonFinite):
        truncate2(Decimal("Infinity"))


_bounded = st.decimals(allow_nan=False, allow_infinity=False,
                       min_value=Decimal("-1e30"), max_value=Decimal("1e30"))


@given(_bounded)
def test_truncate_idempotent(value):
    once = truncate2(value)
    assert truncate2(once) == once


@given(_bounded)
def test_truncate_toward_zero(value):
    truncated = truncate2(value)
    assert abs(truncated) <= abs(value)
    assert (abs(value) - abs(truncated)) < Decimal("0.01")
    assert truncated == 0 or truncated.copy_sign(value) == truncated


def test_equal_examples():
    assert answers_equal(TypedAnswer.number(Decimal("35.217")), TypedAnswer.number(Decimal("35.21")))
    assert answers_equal(TypedAnswer.list_number([1, 2]), TypedAnswer.list_number([2, 1]))
    assert not answers_equal(TypedAnswer.category("Manager"), TypedAnswer.category("manager"))
    assert not answers_equal(TypedAnswer.number(1), TypedAnswer.category("1"))
    assert not answers_equal(TypedAnswer.boolean(True), TypedAnswer.category("True"))


def test_list_multiset_semantics():
    assert not answers_equal(TypedAnswer.list_number([1, 1, 2]), TypedAnswer.list_number([1, 2, 2]))
    assert answers_equal(TypedAnswer.list_category(["a", "a"]), TypedAnswer.list_category(["a", "a"]))
    assert not answers_equal(TypedAnswer.list_category(["a"]), TypedAnswer.list_category(["a", "a"]))


_texts = st.text(max_size=12)


def _answers():
    return st.one_of(
        st.booleans().map(TypedAnswer.boolean),
        _bounded.map(TypedAnswer.number),
        _texts.map(TypedAnswer.category),
        st.lists(_texts, max_size=5).map(TypedAnswer.list_category),
        st.lists(_bounded, max_size=5).map(TypedAnswer.list_number),
    )


@given(_answers())
def test_reflexive(answer):
    assert answers_equal(answer, answer)


@given(_answers(), _answers())
def test_symmetric(a, b):
    assert answers_equal(a, b) == answers_equal(b, a)


@given(st.lists(_bounded, max_size=6), st.randoms())
def test_list_permutation_invariance(values, rng):
    shuffled = list(values)
    rng.shuffle(shuffled)
    assert answers_equal(TypedAnswer.list_number(values), TypedAnswer.list_number(shuffled))


@given(_answers(), _answers())
def test_matches_brute_force_oracle(a, b):
    assert answers_equal(a, b) == oracle_equal(a, b)


def test_score_run_basic():
    ten = [(TypedAnswer.number(i), TypedAnswer.number(i if i < 8 else i + 1)) for i in range(10)]
    report = score_run(ten)
    assert report.total == 10
    assert report.correct == 8
    assert report.accuracy == pytest.approx(0.8)
    assert report.per_type["number"] == (10, 8)


def test_score_run_missing_answers():
    report = score_run([(TypedAnswer.boolean(True), None)] * 4)
    assert report.correct == 0
    assert report.accuracy == 0.0


def test_score_run_empty():
    report = score_run([])
    assert report.total == 0
    assert report.accuracy == 0.0
    assert report.empty is True
    assert "warning" in report.as_text()


def test_score_file_round_trip(tmp_path):
    pairs = [
        ScoredPair("q1", TypedAnswer.number(Decimal("1.5")), TypedAnswer.number(Decimal("1.5"))),
        ScoredPair("q2", TypedAnswer.list_category(["a"]), None),
        ScoredPair("q3", TypedAnswer.boolean(False), TypedAnswer.category("False")),
    ]
    path = tmp_path / "pairs.jsonl"
    write_score_file(path, pairs)
    again = read_score_file(path)
    assert again == pairs
    report = score_run((p.expected, p.got) for p in again)
    assert report.total == 3
    assert report.correct == 1
