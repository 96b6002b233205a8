"""Candidate selection: present Ok candidates, parse the choice, classify it.

The selector model can only pick among presented solutions; any output it
produces maps back onto an existing candidate, so a fabricated answer is
impossible by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .core import AnswerType, CandidateSolution, DecisionCategory, Question, SolverExchange, TabqaError
from .gateway import ChatRequest, Gateway
from .prompts import MarkerNotFound, extract_marked_section, render_template
from .scoring import answers_equal
from .tables import TableHandle

RESULT_PREVIEW_CHARS = 50

# Declared convention: reasoning that cites one of these marks a logical filter.
FLAW_KEYWORDS = ("flaw", "incorrect logic", "wrong aggregation")


class SelectionUnparseable(TabqaError):
    pass


@dataclass(frozen=True)
class OrchestratorVerdict:
    chosen_index: int
    predicted_type: AnswerType
    reasoning: str
    category: DecisionCategory


_TYPE_PATTERNS: tuple[tuple[str, AnswerType], ...] = (
    (r"list\s*\[\s*(number|num|int|integer|float|decimal)\s*\]", AnswerType.LIST_NUMBER),
    (r"list\s+of\s+(numbers|integers|floats|decimals)", AnswerType.LIST_NUMBER),
    (r"list\s*\[\s*(category|categories|string|str|text)\s*\]", AnswerType.LIST_CATEGORY),
    (r"list\s+of\s+(categories|strings|values|names)", AnswerType.LIST_CATEGORY),
    (r"\blist\b", AnswerType.LIST_CATEGORY),
    (r"\bboolean\b|\bbool\b", AnswerType.BOOLEAN),
    (r"\binteger\b|\bnumber\b|\bnumeric\b|\bfloat\b|\bdecimal\b", AnswerType.NUMBER),
    (r"\bstring\b|\bcategory\b|\btext\b", AnswerType.CATEGORY),
)


def parse_answer_type(text: str) -> AnswerType | None:
    """Earliest type keyword in the text; specific list forms outrank bare words."""
    lowered = text.lower()
    best: tuple[int, int, AnswerType] | None = None
    for priority, (pattern, answer_type) in enumerate(_TYPE_PATTERNS):
        match = re.search(pattern, lowered)
        if match and (best is None or (match.start(), priority) < (best[0], best[1])):
            best = (match.start(), priority, answer_type)
    return best[2] if best else None


_NUMERIC_HINTS = ("how many", "how much", "average", "total", "count", "sum", "median", "number of")
_BOOLEAN_STARTS = ("is ", "are ", "does ", "do ", "did ", "has ", "have ", "was ", "were ", "can ")
_LIST_STARTS = ("list ", "name the ", "which ", "what are ")


def heuristic_answer_type(question_text: str) -> AnswerType:
    """Keyword fallback used when no model judgement is available."""
    lowered = question_text.strip().lower()
    if lowered.startswith(_BOOLEAN_STARTS):
        return AnswerType.BOOLEAN
    if any(hint in lowered for hint in _NUMERIC_HINTS):
        return AnswerType.NUMBER
    if lowered.startswith(_LIST_STARTS):
        return AnswerType.LIST_CATEGORY
    return AnswerType.CATEGORY


def deduce_answer_type(question: Question, gw: Gateway | None = None,
                       model: str | None = None) -> tuple[AnswerType, tuple[SolverExchange, ...]]:
    """Model-predicted answer type with a total heuristic fallback."""
    if gw is None or model is None:
        return heuristic_answer_type(question.text), ()
    prompt = render_template("type_deduction", {"question": question.text})
    completion = gw.complete(ChatRequest.user(model, prompt)).content
    exchanges = (SolverExchange("type_deduction", prompt, completion),)
    try:
        section = extract_marked_section(completion, "TYPE:")
    except MarkerNotFound:
        section = completion
    parsed = parse_answer_type(section) or parse_answer_type(completion)
    return parsed or heuristic_answer_type(question.text), exchanges


def render_solutions(presented: Sequence[CandidateSolution]) -> str:
    """Paper-shaped one-line listing; result text truncated to 50 characters."""
    parts = []
    for i, candidate in enumerate(presented):
        preview = candidate.result.display_text()[:RESULT_PREVIEW_CHARS]
        parts.append(
            f"Solution Number {i + 1}:  Code: {candidate.code} Answer: {preview} (may be truncated) "
        )
    return "   ".join(parts)


def _parse_choice(completion: str, presented_count: int) -> int:
    """0-based presented index; raises SelectionUnparseable when no usable pick."""
    try:
        section = extract_marked_section(completion, "ANSWER:")
    except MarkerNotFound as exc:
        raise SelectionUnparseable("no ANSWER: marker") from exc
    match = re.search(r"\d+", section)
    if match is None:
        raise SelectionUnparseable(f"no solution number after ANSWER: {section[:50]!r}")
    one_based = int(match.group(0))
    if not 1 <= one_based <= presented_count:
        raise SelectionUnparseable(f"solution number {one_based} out of range 1..{presented_count}")
    return one_based - 1


def classify_decision(candidates: Sequence[CandidateSolution], verdict: OrchestratorVerdict) -> DecisionCategory:
    """Bucket a verdict into the decision taxonomy used for error analysis."""
    ok = [c for c in candidates if c.ok]
    if not ok:
        return DecisionCategory.NO_VALID_CANDIDATE
    first = ok[0].result
    if all(answers_equal(first, c.result) for c in ok[1:]):
        return DecisionCategory.AGREEMENT
    chosen = candidates[verdict.chosen_index]
    rejected = [c for c in ok if c is not chosen]
    if chosen.result.type is verdict.predicted_type and any(
        c.result.type is not verdict.predicted_type for c in rejected
    ):
        return DecisionCategory.FORMAT_MISMATCH
    reasoning = verdict.reasoning.lower()
    types_match = all(c.result.type is first.type for c in ok)
    if types_match and any(keyword in reasoning for keyword in FLAW_KEYWORDS):
        return DecisionCategory.LOGICAL_FILTERING
    return DecisionCategory.CONFLICT_RESOLUTION


def select(
    question: Question,
    candidates: Sequence[CandidateSolution],
    table: TableHandle,
    gw: Gateway,
    model: str,
    deduced_hint: AnswerType | None = None,
) -> tuple[OrchestratorVerdict, tuple[SolverExchange, ...]]:
    """Ask the selector to pick among Ok candidates and classify the outcome.

    Unparseable or out-of-range picks fall back to the lowest-indexed Ok
    candidate; the returned index always denotes an Ok candidate of the
    full list.
    """
    presented = [(i, c) for i, c in enumerate(candidates) if c.ok]
    if not presented:
        raise TabqaError("select requires at least one Ok candidate")
    prompt = render_template(
        "orchestrator",
        {
            "question": question.text,
            "solutions": render_solutions([c for _, c in presented]),
            "columns": "[" + ", ".join(repr(n) for n in table.column_names) + "]",
        },
    )
    completion = gw.complete(ChatRequest.user(model, prompt)).content
    exchanges = (SolverExchange("orchestrator", prompt, completion),)

    unparseable = False
    try:
        picked = _parse_choice(completion, len(presented))
    except SelectionUnparseable:
        unparseable = True
        picked = 0  # lowest-indexed Ok candidate
    chosen_index = presented[picked][0]

    predicted = None
    try:
        predicted = parse_answer_type(extract_marked_section(completion, "ANSWER:"))
    except MarkerNotFound:
        pass
    if predicted is None:
        predicted = parse_answer_type(completion)
    if predicted is None:
        predicted = deduced_hint or heuristic_answer_type(question.text)

    reasoning = completion
    marker = re.search(r"REASONING:", completion, re.IGNORECASE)
    if marker:
        tail = completion[marker.end():]
        answer_at = re.search(r"ANSWER:", tail, re.IGNORECASE)
        reasoning = tail[: answer_at.start()] if answer_at else tail
    reasoning = reasoning.strip()

    verdict = OrchestratorVerdict(
        chosen_index=chosen_index,
        predicted_type=predicted,
        reasoning=reasoning,
        category=DecisionCategory.CONFLICT_RESOLUTION,
    )
    category = classify_decision(candidates, verdict)
    if unparseable and category is not DecisionCategory.AGREEMENT:
        category = DecisionCategory.CONFLICT_RESOLUTION
    verdict = OrchestratorVerdict(
        chosen_index=chosen_index,
        predicted_type=predicted,
        reasoning=reasoning,
        category=category,
    )
    return verdict, exchanges
