"""SQL candidate generation: prompt, guard, embedded execution, self-correction.

The guard sits between extraction and the engine: nothing but a single
SELECT statement (no WITH) is ever executed, regardless of what the model
returns. The table is always materialized as ``temp_table`` with sanitized
column names.
"""

from __future__ import annotations

import re
import sqlite3
import time
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Sequence

from .core import (
    AnswerType,
    CandidateSolution,
    CandidateStatus,
    Question,
    SolverExchange,
    SolverOutcome,
    Strategy,
    TabqaError,
    TypedAnswer,
)
from .gateway import ChatRequest, Gateway
from .prompts import NoCodeFound, extract_code_block, render_template
from .retrieval import RowMatch
from .tables import (
    ColumnDtype,
    ColumnSelection,
    TableHandle,
    cell_text,
    columns_with_dtypes,
    markdown_table,
    row_repr,
)

TABLE_NAME = "temp_table"


class ForbiddenSql(TabqaError):
    pass


class UnformattableResult(TabqaError):
    pass


class AttemptStatus(Enum):
    OK = "ok"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SqlAttempt:
    query: str
    cells: tuple = ()
    status: AttemptStatus = AttemptStatus.OK
    error_text: str = ""


def build_sql_prompt(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    matches: Sequence[RowMatch],
    explained: dict | None = None,
) -> str:
    names = list(selection.selected)
    listed = []
    for name in names:
        dtype = table.dtype_of(name).value
        if explained and explained.get(name, name) != name:
            listed.append(f"{name} ({explained[name]}): {dtype}")
        else:
            listed.append(f"{name}: {dtype}")
    rows = [
        [cell_text(table.rows[m.row_index][table.column_index(n)]) for n in names]
        for m in matches
    ]
    return render_template(
        "sql_gen",
        {
            "question": question.text,
            "columns_and_types": ", ".join(listed),
            "relevant_rows": "\n" + markdown_table(names, rows),
        },
    )


_FORBIDDEN_WORDS = (
    "with", "insert", "update", "delete", "drop", "alter", "create", "truncate",
    "attach", "detach", "pragma", "vacuum", "reindex", "grant", "revoke",
    "begin", "commit", "rollback", "savepoint", "analyze",
)
_FORBIDDEN_RE = re.compile(r"\b(" + "|".join(_FORBIDDEN_WORDS) + r")\b", re.IGNORECASE)
_REPLACE_INTO_RE = re.compile(r"\breplace\s+into\b", re.IGNORECASE)


def _scan_sql(query: str) -> tuple[str, str]:
    """Split query text into (code outside comments, code outside comments+quotes).

    Raises ForbiddenSql when a second statement follows a top-level
    semicolon.
    """
    code: list[str] = []
    bare: list[str] = []
    i, n = 0, len(query)
    after_semicolon = False
    while i < n:
        ch = query[i]
        two = query[i : i + 2]
        if two == "--":
            end = query.find("\n", i)
            i = n if end == -1 else end + 1
            continue
        if two == "/*":
            end = query.find("*/", i + 2)
            if end == -1:
                raise ForbiddenSql("unterminated block comment")
            i = end + 2
            continue
        if ch in ("'", '"', "`"):
            quote = ch
            j = i + 1
            while j < n:
                if query[j] == quote:
                    if query[j : j + 2] == quote * 2:
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise ForbiddenSql(f"unterminated {quote} quote")
            literal = query[i : j + 1]
            code.append(literal)
            bare.append(" ")
            i = j + 1
            continue
        if ch == "[":
            end = query.find("]", i)
            if end == -1:
                raise ForbiddenSql("unterminated [ identifier")
            code.append(query[i : end + 1])
            bare.append(" ")
            i = end + 1
            continue
        if ch == ";":
            after_semicolon = True
            code.append(ch)
            bare.append(ch)
            i += 1
            continue
        if after_semicolon and not ch.isspace():
            raise ForbiddenSql("multiple statements are not allowed")
        code.append(ch)
        bare.append(ch)
        i += 1
    return "".join(code), "".join(bare)


def guard_sql(query: str) -> str:
    """Admit exactly one SELECT statement; reject everything else with a reason."""
    code, bare = _scan_sql(query)
    stripped = code.strip()
    if not stripped:
        raise ForbiddenSql("empty query")
    first_word = re.match(r"[A-Za-z]+", stripped.lstrip("( \t\r\n"))
    if first_word is None or first_word.group(0).lower() != "select":
        raise ForbiddenSql("only a single SELECT statement is allowed")
    hit = _FORBIDDEN_RE.search(bare)
    if hit:
        raise ForbiddenSql(f"forbidden keyword: {hit.group(1).upper()}")
    if _REPLACE_INTO_RE.search(bare):
        raise ForbiddenSql("forbidden keyword: REPLACE INTO")
    return stripped


_AFFINITY = {
    ColumnDtype.INTEGER: "INTEGER",
    ColumnDtype.DECIMAL: "REAL",
    ColumnDtype.BOOLEAN: "INTEGER",
    ColumnDtype.TEXT: "TEXT",
    ColumnDtype.DATETIME: "TEXT",
}


def _storage_value(value):
    if value is None:
        return None
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, Decimal):
        return float(value)
    return value


def execute_sql(query: str, table: TableHandle, timeout_s: float = 10.0) -> SqlAttempt:
    """Run a guarded query against a private in-memory engine instance."""
    conn = sqlite3.connect(":memory:")
    try:
        column_defs = ", ".join(
            f'"{c.sanitized_name}" {_AFFINITY[c.dtype]}' for c in table.columns
        )
        conn.execute(f'CREATE TABLE "{TABLE_NAME}" ({column_defs})')
        placeholders = ", ".join("?" for _ in table.columns)
        conn.executemany(
            f'INSERT INTO "{TABLE_NAME}" VALUES ({placeholders})',
            [tuple(_storage_value(v) for v in row) for row in table.rows],
        )

        deadline = time.monotonic() + timeout_s
        timed_out = False

        def watchdog():
            nonlocal timed_out
            if time.monotonic() > deadline:
                timed_out = True
                return 1
            return 0

        conn.set_progress_handler(watchdog, 1000)
        try:
            cursor = conn.execute(query)
            cells = tuple(tuple(row) for row in cursor.fetchall())
        except sqlite3.Error as exc:
            if timed_out:
                return SqlAttempt(query=query, status=AttemptStatus.TIMEOUT,
                                  error_text=f"statement timeout after {timeout_s:g}s")
            return SqlAttempt(query=query, status=AttemptStatus.ERROR, error_text=str(exc))
        return SqlAttempt(query=query, cells=cells, status=AttemptStatus.OK)
    finally:
        conn.close()


_BOOL_TEXT = {"true": True, "false": False}
_NUMERIC_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)")


def _cell_to_decimal(cell) -> Decimal | None:
    if isinstance(cell, bool):
        return None
    if isinstance(cell, int):
        return Decimal(cell)
    if isinstance(cell, float):
        return Decimal(repr(cell))
    if isinstance(cell, str) and _NUMERIC_RE.fullmatch(cell.strip()):
        return Decimal(cell.strip())
    return None


def _scalar_answer(cell, hint: AnswerType | None) -> TypedAnswer:
    if cell is None:
        raise UnformattableResult("NULL result cell")
    text = cell_text(cell)
    if hint is AnswerType.BOOLEAN:
        if text.strip().lower() in _BOOL_TEXT:
            return TypedAnswer.boolean(_BOOL_TEXT[text.strip().lower()])
        if isinstance(cell, int) and cell in (0, 1):
            return TypedAnswer.boolean(bool(cell))
        raise UnformattableResult(f"expected 'True'/'False', got {text!r}")
    if isinstance(cell, str) and cell.strip().lower() in _BOOL_TEXT and hint in (None, AnswerType.BOOLEAN):
        return TypedAnswer.boolean(_BOOL_TEXT[cell.strip().lower()])
    dec = _cell_to_decimal(cell)
    if hint is AnswerType.CATEGORY:
        return TypedAnswer.category(text)
    if dec is not None:
        return TypedAnswer.number(dec)
    return TypedAnswer.category(text)


def _list_answer(cells: list, hint: AnswerType | None) -> TypedAnswer:
    values = [c for c in cells if c is not None]
    if hint is AnswerType.LIST_CATEGORY:
        return TypedAnswer.list_category([cell_text(c) for c in values])
    decs = [_cell_to_decimal(c) for c in values]
    all_numeric = all(d is not None for d in decs)
    if hint is AnswerType.LIST_NUMBER:
        if not all_numeric:
            raise UnformattableResult("list[number] expected but non-numeric cells present")
        return TypedAnswer.list_number(decs)
    if values and all_numeric:
        return TypedAnswer.list_number(decs)
    return TypedAnswer.list_category([cell_text(c) for c in values])


def format_sql_result(attempt: SqlAttempt, hint: AnswerType | None = None) -> TypedAnswer:
    """Shape raw result cells into a typed answer.

    Single cell becomes a scalar ('True'/'False' text is recognized as
    boolean), a single column or single row becomes a list, and the
    expected-type hint settles the list-versus-scalar ambiguity; a
    multi-row multi-column grid has no typed reading.
    """
    if attempt.status is not AttemptStatus.OK:
        raise TabqaError("cannot format a failed attempt")
    cells = attempt.cells
    n_rows = len(cells)
    n_cols = len(cells[0]) if n_rows else 0
    if n_rows == 0:
        if hint is not None and hint.is_list:
            return _list_answer([], hint)
        raise UnformattableResult("query returned no rows")
    if n_rows == 1 and n_cols == 1:
        if hint is not None and hint.is_list:
            return _list_answer([cells[0][0]], hint)
        return _scalar_answer(cells[0][0], hint)
    if n_cols == 1:
        return _list_answer([row[0] for row in cells], hint)
    if n_rows == 1:
        return _list_answer(list(cells[0]), hint)
    raise UnformattableResult(f"{n_rows}x{n_cols} grid has no typed reading")


def _correction_prompt(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    tracebacks: Sequence[str],
) -> str:
    failures = "\n".join(
        f"Solution {i + 1} Error:\n{tb}\n" for i, tb in enumerate(tracebacks)
    )
    return render_template(
        "self_correction",
        {
            "question": question.text,
            "failures": failures,
            "columns_and_dtypes": columns_with_dtypes(table, selection.selected),
            "first_row": row_repr(table, 0, selection.selected),
        },
    )


def extract_correction_code(completion: str) -> str:
    """Correction replies may be bare one-liners; fall back to the whole text."""
    try:
        return extract_code_block(completion)
    except NoCodeFound:
        code = completion.strip()
        if not code:
            raise
        return code


def _run_sql_once(code: str, table: TableHandle, hint: AnswerType | None, timeout_s: float):
    """Returns (answer, None) on success or (None, (status, error_text))."""
    try:
        query = guard_sql(code)
    except ForbiddenSql as exc:
        return None, (CandidateStatus.EXEC_ERROR, f"rejected query: {exc}")
    attempt = execute_sql(query, table, timeout_s=timeout_s)
    if attempt.status is AttemptStatus.TIMEOUT:
        return None, (CandidateStatus.TIMEOUT, attempt.error_text)
    if attempt.status is AttemptStatus.ERROR:
        return None, (CandidateStatus.EXEC_ERROR, attempt.error_text)
    try:
        return format_sql_result(attempt, hint), None
    except UnformattableResult as exc:
        return None, (CandidateStatus.EXEC_ERROR, str(exc))


def solve_sql(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    matches: Sequence[RowMatch],
    gw: Gateway,
    model: str,
    strategy: Strategy = Strategy.SQL_A,
    hint: AnswerType | None = None,
    timeout_s: float = 10.0,
    seed: int | None = None,
    explained: dict | None = None,
) -> SolverOutcome:
    """Generate, guard, and execute one SQL candidate with one correction retry.

    Never raises: every failure mode lands in the candidate's status and
    error text. At most two completions are consumed.
    """
    tag = strategy.value
    exchanges: list[SolverExchange] = []
    prompt = build_sql_prompt(question, table, selection, matches, explained=explained)
    completion = gw.complete(ChatRequest.user(model, prompt, seed=seed)).content
    exchanges.append(SolverExchange(tag, prompt, completion))

    def finish(candidate: CandidateSolution) -> SolverOutcome:
        return SolverOutcome(candidate=candidate, exchanges=tuple(exchanges))

    try:
        code = extract_code_block(completion)
    except NoCodeFound as exc:
        return finish(CandidateSolution(strategy, "", CandidateStatus.EXTRACTION_FAILED,
                                        error_text=str(exc)))

    answer, failure = _run_sql_once(code, table, hint, timeout_s)
    if failure is None:
        return finish(CandidateSolution(strategy, code, CandidateStatus.OK, result=answer))

    # One self-correction round: feed the error back with schema context.
    fix_prompt = _correction_prompt(question, table, selection, [failure[1]])
    fix_completion = gw.complete(ChatRequest.user(model, fix_prompt, seed=seed)).content
    exchanges.append(SolverExchange(f"{tag}_correction", fix_prompt, fix_completion))
    try:
        fixed_code = extract_correction_code(fix_completion)
    except NoCodeFound:
        return finish(CandidateSolution(strategy, code, failure[0], error_text=failure[1], corrected=True))

    answer, fix_failure = _run_sql_once(fixed_code, table, hint, timeout_s)
    if fix_failure is None:
        return finish(CandidateSolution(strategy, fixed_code, CandidateStatus.OK, result=answer, corrected=True))
    return finish(CandidateSolution(strategy, fixed_code, fix_failure[0],
                                    error_text=f"{failure[1]}; after correction: {fix_failure[1]}",
                                    corrected=True))
