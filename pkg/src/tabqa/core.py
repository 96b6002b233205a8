"""Shared domain types: typed answers, questions, candidate solutions, traces.

Numbers are carried as :class:`decimal.Decimal` everywhere inside the
pipeline and converted to binary floats only at the edges (SQL storage,
CSV snapshots), so the two-decimal truncation rule used for scoring stays
bit-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, Sequence


class TabqaError(Exception):
    """Base class for every error raised by this package."""


class MalformedAnswer(TabqaError):
    """Answer JSON is invalid or its value does not match its type tag."""


class AnswerType(Enum):
    BOOLEAN = "boolean"
    NUMBER = "number"
    CATEGORY = "category"
    LIST_CATEGORY = "list[category]"
    LIST_NUMBER = "list[number]"

    @property
    def is_list(self) -> bool:
        return self in (AnswerType.LIST_CATEGORY, AnswerType.LIST_NUMBER)

    @classmethod
    def from_tag(cls, tag: str) -> "AnswerType":
        for member in cls:
            if member.value == tag:
                return member
        raise MalformedAnswer(f"unknown answer type tag: {tag!r}")


class Strategy(Enum):
    SQL_A = "sql_a"
    SQL_B = "sql_b"
    SCRIPT_A = "script_a"
    SCRIPT_B = "script_b"
    END_TO_END = "e2e"


class CandidateStatus(Enum):
    OK = "ok"
    EXEC_ERROR = "exec_error"
    TIMEOUT = "timeout"
    EXTRACTION_FAILED = "extraction_failed"


class DecisionCategory(Enum):
    AGREEMENT = "agreement"
    LOGICAL_FILTERING = "logical_filtering"
    FORMAT_MISMATCH = "format_mismatch"
    CONFLICT_RESOLUTION = "conflict_resolution"
    NO_VALID_CANDIDATE = "no_valid_candidate"


def _coerce_decimal(value: Any) -> Decimal:
    if isinstance(value, Decimal):
        dec = value
    elif isinstance(value, bool):
        raise MalformedAnswer("boolean is not a number")
    elif isinstance(value, (int, str)):
        try:
            dec = Decimal(value)
        except InvalidOperation as exc:
            raise MalformedAnswer(f"not a decimal number: {value!r}") from exc
    elif isinstance(value, float):
        # repr() is the shortest round-trip form, so 35.2 stays 35.2.
        dec = Decimal(repr(value))
    else:
        raise MalformedAnswer(f"not a decimal number: {value!r}")
    if not dec.is_finite():
        raise MalformedAnswer(f"non-finite number: {value!r}")
    return dec


def format_decimal(dec: Decimal) -> str:
    """Minimal plain-decimal form: no exponent, no trailing zeros (5.0 -> "5").

    Purely textual, so no context rounding ever touches the value.
    """
    text = format(dec, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


@dataclass(frozen=True)
class TypedAnswer:
    """One answer value whose variant always agrees with its type tag."""

    type: AnswerType
    value: bool | Decimal | str | tuple

    def __post_init__(self) -> None:
        t, v = self.type, self.value
        if t is AnswerType.BOOLEAN:
            if not isinstance(v, bool):
                raise MalformedAnswer(f"boolean answer needs a bool, got {v!r}")
        elif t is AnswerType.NUMBER:
            object.__setattr__(self, "value", _coerce_decimal(v))
        elif t is AnswerType.CATEGORY:
            if not isinstance(v, str):
                raise MalformedAnswer(f"category answer needs text, got {v!r}")
        elif t is AnswerType.LIST_CATEGORY:
            if not _is_sequence(v) or not all(isinstance(x, str) for x in v):
                raise MalformedAnswer(f"list[category] answer needs a list of text, got {v!r}")
            object.__setattr__(self, "value", tuple(v))
        elif t is AnswerType.LIST_NUMBER:
            if not _is_sequence(v):
                raise MalformedAnswer(f"list[number] answer needs a list of numbers, got {v!r}")
            object.__setattr__(self, "value", tuple(_coerce_decimal(x) for x in v))

    @classmethod
    def boolean(cls, value: bool) -> "TypedAnswer":
        return cls(AnswerType.BOOLEAN, value)

    @classmethod
    def number(cls, value: Any) -> "TypedAnswer":
        return cls(AnswerType.NUMBER, value)

    @classmethod
    def category(cls, value: str) -> "TypedAnswer":
        return cls(AnswerType.CATEGORY, value)

    @classmethod
    def list_category(cls, values: Sequence[str]) -> "TypedAnswer":
        return cls(AnswerType.LIST_CATEGORY, tuple(values))

    @classmethod
    def list_number(cls, values: Sequence[Any]) -> "TypedAnswer":
        return cls(AnswerType.LIST_NUMBER, tuple(values))

    def display_text(self) -> str:
        """Human-readable result text, as shown to the selection model."""
        if self.type is AnswerType.BOOLEAN:
            return "True" if self.value else "False"
        if self.type is AnswerType.NUMBER:
            return format_decimal(self.value)
        if self.type is AnswerType.CATEGORY:
            return str(self.value)
        if self.type is AnswerType.LIST_NUMBER:
            return "[" + ", ".join(format_decimal(x) for x in self.value) + "]"
        return "[" + ", ".join(repr(x) for x in self.value) + "]"


def _is_sequence(v: Any) -> bool:
    return isinstance(v, (list, tuple))


def _encode_value(answer: TypedAnswer) -> str:
    t, v = answer.type, answer.value
    if t is AnswerType.BOOLEAN:
        return "true" if v else "false"
    if t is AnswerType.NUMBER:
        return format_decimal(v)
    if t is AnswerType.CATEGORY:
        return json.dumps(v, ensure_ascii=False)
    if t is AnswerType.LIST_NUMBER:
        return "[" + ",".join(format_decimal(x) for x in v) + "]"
    return "[" + ",".join(json.dumps(x, ensure_ascii=False) for x in v) + "]"


def serialize_answer(answer: TypedAnswer) -> str:
    """Canonical compact JSON with "type" and "value" fields.

    Number values are emitted as plain minimal decimals (no exponent), so
    the text round-trips through :func:`parse_answer` without binary
    floating point ever touching the value.
    """
    return '{"type":%s,"value":%s}' % (json.dumps(answer.type.value), _encode_value(answer))


def parse_answer(text: str) -> TypedAnswer:
    """Parse canonical answer JSON; raises MalformedAnswer on any mismatch."""
    try:
        obj = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except (json.JSONDecodeError, ValueError) as exc:
        raise MalformedAnswer(f"invalid answer JSON: {exc}") from exc
    return answer_from_obj(obj)


def answer_from_obj(obj: Any) -> TypedAnswer:
    """Build a TypedAnswer from an already-decoded {"type", "value"} object."""
    if not isinstance(obj, dict) or set(obj) != {"type", "value"}:
        raise MalformedAnswer(f"answer object must have exactly 'type' and 'value': {obj!r}")
    tag = obj["type"]
    if not isinstance(tag, str):
        raise MalformedAnswer(f"answer type tag must be text: {tag!r}")
    answer_type = AnswerType.from_tag(tag)
    value = obj["value"]
    if answer_type is AnswerType.BOOLEAN and not isinstance(value, bool):
        raise MalformedAnswer(f"boolean answer needs a JSON boolean, got {value!r}")
    if answer_type is AnswerType.NUMBER and (isinstance(value, bool) or not isinstance(value, (Decimal, int, float))):
        raise MalformedAnswer(f"number answer needs a JSON number, got {value!r}")
    if answer_type is AnswerType.CATEGORY and not isinstance(value, str):
        raise MalformedAnswer(f"category answer needs a JSON string, got {value!r}")
    if answer_type.is_list:
        if not isinstance(value, list):
            raise MalformedAnswer(f"{tag} answer needs a JSON array, got {value!r}")
        if answer_type is AnswerType.LIST_NUMBER and any(
            isinstance(x, bool) or not isinstance(x, (Decimal, int, float)) for x in value
        ):
            raise MalformedAnswer(f"list[number] answer has a non-number element: {value!r}")
        if answer_type is AnswerType.LIST_CATEGORY and any(not isinstance(x, str) for x in value):
            raise MalformedAnswer(f"list[category] answer has a non-string element: {value!r}")
    return TypedAnswer(answer_type, tuple(value) if isinstance(value, list) else value)


def answer_to_obj(answer: TypedAnswer) -> Any:
    """Decoded-JSON form of an answer (Decimals preserved), for embedding in traces."""
    return json.loads(serialize_answer(answer), parse_float=Decimal)


def canonical_dumps(obj: Any) -> str:
    """Compact JSON text with Decimals emitted as plain minimal decimals."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, Decimal):
        return format_decimal(obj)
    if isinstance(obj, (int, float)):
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_dumps(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{canonical_dumps(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_loads(text: str) -> Any:
    """Inverse of canonical_dumps; non-integer JSON numbers come back as Decimal."""
    return json.loads(text, parse_float=Decimal)


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    dataset_id: str
    expected_type: AnswerType | None = None


@dataclass(frozen=True)
class CandidateSolution:
    """One solver's output; status and payload fields are coupled by construction."""

    strategy: Strategy
    code: str
    status: CandidateStatus
    result: TypedAnswer | None = None
    error_text: str | None = None
    corrected: bool = False

    def __post_init__(self) -> None:
        if self.status is CandidateStatus.OK:
            if self.result is None or self.error_text is not None:
                raise TabqaError("Ok candidate must carry a result and no error text")
        else:
            if self.result is not None or self.error_text is None:
                raise TabqaError("failed candidate must carry error text and no result")

    @property
    def ok(self) -> bool:
        return self.status is CandidateStatus.OK


@dataclass(frozen=True)
class SolverExchange:
    """One prompt/completion round, tagged with the role that issued it."""

    tag: str
    prompt: str
    completion: str


@dataclass(frozen=True)
class SolverOutcome:
    candidate: CandidateSolution
    exchanges: tuple[SolverExchange, ...]


@dataclass
class PipelineTrace:
    """Full per-question audit record."""

    question_id: str
    prompts: list[tuple[str, str]] = field(default_factory=list)
    completions: list[str] = field(default_factory=list)
    candidates: list[CandidateSolution] = field(default_factory=list)
    chosen_index: int | None = None
    decision_category: DecisionCategory = DecisionCategory.NO_VALID_CANDIDATE
    final_answer: TypedAnswer | None = None
    wall_time_ms: int = 0

    def validate(self) -> None:
        if self.chosen_index is not None:
            if not 0 <= self.chosen_index < len(self.candidates):
                raise TabqaError(f"chosen_index {self.chosen_index} out of range")
            if not self.candidates[self.chosen_index].ok:
                raise TabqaError("chosen candidate is not Ok")
        if self.wall_time_ms < 0:
            raise TabqaError("wall_time_ms must be non-negative")

    def to_obj(self) -> dict:
        return {
            "question_id": self.question_id,
            "prompts": [[tag, text] for tag, text in self.prompts],
            "completions": list(self.completions),
            "candidates": [
                {
                    "strategy": c.strategy.value,
                    "code": c.code,
                    "status": c.status.value,
                    "result": answer_to_obj(c.result) if c.result is not None else None,
                    "error_text": c.error_text,
                    "corrected": c.corrected,
                }
                for c in self.candidates
            ],
            "chosen_index": self.chosen_index,
            "decision_category": self.decision_category.value,
            "final_answer": answer_to_obj(self.final_answer) if self.final_answer is not None else None,
            "wall_time_ms": self.wall_time_ms,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PipelineTrace":
        candidates = []
        for c in obj["candidates"]:
            result = answer_from_obj(c["result"]) if c["result"] is not None else None
            candidates.append(
                CandidateSolution(
                    strategy=Strategy(c["strategy"]),
                    code=c["code"],
                    status=CandidateStatus(c["status"]),
                    result=result,
                    error_text=c["error_text"],
                    corrected=c["corrected"],
                )
            )
        trace = cls(
            question_id=obj["question_id"],
            prompts=[(tag, text) for tag, text in obj["prompts"]],
            completions=list(obj["completions"]),
            candidates=candidates,
            chosen_index=obj["chosen_index"],
            decision_category=DecisionCategory(obj["decision_category"]),
            final_answer=answer_from_obj(obj["final_answer"]) if obj["final_answer"] is not None else None,
            wall_time_ms=obj["wall_time_ms"],
        )
        trace.validate()
        return trace
