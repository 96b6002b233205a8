"""Direct answering over a markdown rendering of the table, no code generation."""

from __future__ import annotations

import re
from decimal import Decimal
from typing import Sequence

from .core import (
    CandidateSolution,
    CandidateStatus,
    Question,
    SolverExchange,
    SolverOutcome,
    Strategy,
    TypedAnswer,
)
from .gateway import ChatRequest, Gateway
from .prompts import MarkerNotFound, extract_marked_section, render_template
from .retrieval import RowMatch
from .tables import ColumnSelection, TableHandle, cell_text, markdown_table

FINAL_ANSWER_MARKER = "Final Answer:"


def render_markdown(table: TableHandle, selection: ColumnSelection, row_limit: int = 20,
                    matches: Sequence[RowMatch] = ()) -> str:
    """Pipe table over the selected columns, retrieval-ranked rows first."""
    if row_limit < 1:
        raise ValueError("row_limit must be >= 1")
    names = list(selection.selected)
    cols = [table.column_index(n) for n in names]
    ordered = [m.row_index for m in matches]
    seen = set(ordered)
    ordered.extend(i for i in range(table.n_rows) if i not in seen)
    picked = ordered[:row_limit]
    rows = [[cell_text(table.rows[i][j]) for j in cols] for i in picked]
    return markdown_table(names, rows)


_NUMBER_RE = re.compile(r"[+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d+)?")


def _parse_number(text: str) -> Decimal | None:
    if _NUMBER_RE.fullmatch(text):
        return Decimal(text.replace(",", ""))
    return None


def _split_list(body: str) -> list[str]:
    items, buf, quote = [], [], None
    for ch in body:
        if quote:
            if ch == quote:
                quote = None
            buf.append(ch)
        elif ch in "'\"":
            quote = ch
            buf.append(ch)
        elif ch == ",":
            items.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    items.append("".join(buf))
    return [i.strip() for i in items]


def _strip_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def parse_freeform_answer(text: str) -> TypedAnswer:
    """Parse a free-form answer using a fixed precedence.

    Boolean first, then a bracketed list (all-numeric elements make it
    list[number]), then a plain number with thousands separators allowed,
    and finally the verbatim text as a category; the function is total.
    """
    trimmed = text.strip()
    lowered = trimmed.lower()
    if lowered == "true":
        return TypedAnswer.boolean(True)
    if lowered == "false":
        return TypedAnswer.boolean(False)
    if trimmed.startswith("[") and trimmed.endswith("]"):
        body = trimmed[1:-1].strip()
        if not body:
            return TypedAnswer.list_category([])
        raw_items = _split_list(body)
        numbers = [_parse_number(i) for i in raw_items]
        if all(n is not None for n in numbers):
            return TypedAnswer.list_number(numbers)
        return TypedAnswer.list_category([_strip_quotes(i) for i in raw_items])
    number = _parse_number(trimmed)
    if number is not None:
        return TypedAnswer.number(number)
    return TypedAnswer.category(trimmed)


def solve_e2e(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    matches: Sequence[RowMatch],
    gw: Gateway,
    model: str,
    row_limit: int = 20,
    seed: int | None = None,
) -> SolverOutcome:
    """One direct completion; no execution, no self-correction.

    A missing or empty "Final Answer:" section makes the candidate
    ExtractionFailed; parsing itself cannot fail.
    """
    strategy = Strategy.END_TO_END
    prompt = render_template(
        "e2e",
        {
            "question": question.text,
            "dataset_text": "\n" + render_markdown(table, selection, row_limit=row_limit, matches=matches),
        },
    )
    completion = gw.complete(ChatRequest.user(model, prompt, seed=seed)).content
    exchanges = (SolverExchange(strategy.value, prompt, completion),)
    try:
        section = extract_marked_section(completion, FINAL_ANSWER_MARKER)
    except MarkerNotFound as exc:
        candidate = CandidateSolution(strategy, "", CandidateStatus.EXTRACTION_FAILED, error_text=str(exc))
        return SolverOutcome(candidate=candidate, exchanges=exchanges)
    answer_text = section.splitlines()[0].strip() if section else ""
    if not answer_text:
        candidate = CandidateSolution(strategy, "", CandidateStatus.EXTRACTION_FAILED,
                                      error_text="empty text after 'Final Answer:'")
        return SolverOutcome(candidate=candidate, exchanges=exchanges)
    candidate = CandidateSolution(strategy, "", CandidateStatus.OK, result=parse_freeform_answer(answer_text))
    return SolverOutcome(candidate=candidate, exchanges=exchanges)
