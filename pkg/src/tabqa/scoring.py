"""Exact comparison semantics and accuracy aggregation.

Numbers compare equal after truncation (not rounding) to two decimals,
toward zero; categories and booleans compare as-is; lists compare as
multisets with the element rule of their element type.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal, localcontext
from pathlib import Path
from typing import Iterable

from .core import AnswerType, TabqaError, TypedAnswer, answer_from_obj, answer_to_obj, canonical_dumps

_TWO_PLACES = Decimal("0.01")


class NonFinite(TabqaError):
    pass


def truncate2(value: Decimal) -> Decimal:
    """Drop digits beyond the second decimal place, toward zero; idempotent."""
    if not isinstance(value, Decimal):
        value = Decimal(str(value))
    if not value.is_finite():
        raise NonFinite(f"cannot truncate {value}")
    with localcontext() as ctx:
        ctx.prec = 80
        return value.quantize(_TWO_PLACES, rounding=ROUND_DOWN)


def answers_equal(expected: TypedAnswer, got: TypedAnswer) -> bool:
    """Competition equality; cross-type comparisons are always false."""
    if expected.type is not got.type:
        return False
    t = expected.type
    if t is AnswerType.NUMBER:
        return truncate2(expected.value) == truncate2(got.value)
    if t in (AnswerType.BOOLEAN, AnswerType.CATEGORY):
        return expected.value == got.value
    if t is AnswerType.LIST_NUMBER:
        return Counter(map(truncate2, expected.value)) == Counter(map(truncate2, got.value))
    return Counter(expected.value) == Counter(got.value)


@dataclass
class ScoreReport:
    total: int
    correct: int
    accuracy: float
    per_type: dict[str, tuple[int, int]]  # type tag -> (total, correct)
    empty: bool = False

    def to_obj(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_type": {k: {"total": t, "correct": c} for k, (t, c) in sorted(self.per_type.items())},
            "empty": self.empty,
        }

    def as_text(self) -> str:
        lines = [
            f"{'answer type':<16} {'total':>6} {'correct':>8} {'accuracy':>9}",
            "-" * 41,
        ]
        for tag, (total, correct) in sorted(self.per_type.items()):
            acc = correct / total if total else 0.0
            lines.append(f"{tag:<16} {total:>6} {correct:>8} {acc:>9.3f}")
        lines.append("-" * 41)
        lines.append(f"{'overall':<16} {self.total:>6} {self.correct:>8} {self.accuracy:>9.3f}")
        if self.empty:
            lines.append("warning: no pairs were scored")
        return "\n".join(lines)


def score_run(pairs: Iterable[tuple[TypedAnswer, TypedAnswer | None]]) -> ScoreReport:
    """Aggregate accuracy; a missing answer counts as incorrect."""
    total = 0
    correct = 0
    per_type: dict[str, list[int]] = {}
    for expected, got in pairs:
        total += 1
        tally = per_type.setdefault(expected.type.value, [0, 0])
        tally[0] += 1
        if got is not None and answers_equal(expected, got):
            correct += 1
            tally[1] += 1
    accuracy = correct / total if total else 0.0
    return ScoreReport(
        total=total,
        correct=correct,
        accuracy=accuracy,
        per_type={k: (t, c) for k, (t, c) in per_type.items()},
        empty=total == 0,
    )


@dataclass(frozen=True)
class ScoredPair:
    question_id: str
    expected: TypedAnswer
    got: TypedAnswer | None


def read_score_file(path: str | Path) -> list[ScoredPair]:
    """JSON-lines of {question_id, expected, got}; got may be null."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line, parse_float=Decimal)
                expected = answer_from_obj(obj["expected"])
                got = answer_from_obj(obj["got"]) if obj.get("got") is not None else None
                pairs.append(ScoredPair(question_id=str(obj["question_id"]), expected=expected, got=got))
            except (ValueError, KeyError, TypeError, TabqaError) as exc:
                raise TabqaError(f"{path}:{line_no}: bad scoring line: {exc}") from exc
    return pairs


def write_score_file(path: str | Path, pairs: Iterable[ScoredPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(canonical_dumps({
                "question_id": pair.question_id,
                "expected": answer_to_obj(pair.expected),
                "got": answer_to_obj(pair.got) if pair.got is not None else None,
            }) + "\n")
