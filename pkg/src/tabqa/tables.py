"""Table loading, emoji-safe column sanitization, and LLM column selection.

Sanitized names use only ``[A-Za-z0-9_ ]`` so they are safe both inside
double-quoted SQL identifiers and as dataframe column labels; the original
headers stay recoverable through the handle's sanitization map.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

from .core import Question, SolverExchange, TabqaError, format_decimal
from .gateway import ChatRequest, Gateway
from .prompts import render_template


class UnreadableFile(TabqaError):
    pass


class EmptyTable(TabqaError):
    pass


class RaggedRows(TabqaError):
    pass


class ColumnDtype(Enum):
    INTEGER = "integer"
    DECIMAL = "decimal"
    BOOLEAN = "boolean"
    TEXT = "text"
    DATETIME = "datetime"


@dataclass(frozen=True)
class Column:
    sanitized_name: str
    original_name: str
    dtype: ColumnDtype


@dataclass(frozen=True)
class TableHandle:
    """An immutable loaded table with sanitized headers."""

    dataset_id: str
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...]
    sanitization_map: dict  # sanitized name -> original header

    @property
    def column_names(self) -> list[str]:
        return [c.sanitized_name for c in self.columns]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_index(self, sanitized_name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.sanitized_name == sanitized_name:
                return i
        raise KeyError(sanitized_name)

    def restore(self, sanitized_name: str) -> str:
        return self.sanitization_map[sanitized_name]

    def dtype_of(self, sanitized_name: str) -> ColumnDtype:
        return self.columns[self.column_index(sanitized_name)].dtype


@dataclass(frozen=True)
class ColumnSelection:
    question_id: str
    selected: tuple[str, ...]
    rationale: str = ""

    def __post_init__(self) -> None:
        if not self.selected:
            raise TabqaError("column selection must not be empty")


_ALLOWED_CHAR = re.compile(r"[A-Za-z0-9_ ]")


def _hash_token(ch: str) -> str:
    code = int.from_bytes(hashlib.sha256(ch.encode("utf-8")).digest()[:2], "big")
    return f"_h{code:04x}_"


def sanitize_columns(headers: Sequence[str]) -> tuple[list[str], dict]:
    """Replace every character outside [A-Za-z0-9_ ] with a stable hash token.

    Outer whitespace is trimmed afterwards and collisions get numeric
    suffixes, so the output list is always unique. Returns the sanitized
    list plus a sanitized->original map; restoring through the map is exact
    for every position.
    """
    if not headers:
        raise TabqaError("headers must be non-empty")
    sanitized: list[str] = []
    mapping: dict = {}
    used: set[str] = set()
    for header in headers:
        base = "".join(c if _ALLOWED_CHAR.fullmatch(c) else _hash_token(c) for c in header)
        base = base.strip()
        if not base:
            base = "col"
        name = base
        suffix = 2
        while name in used:
            name = f"{base}_{suffix}"
            suffix += 1
        used.add(name)
        sanitized.append(name)
        mapping[name] = header
    return sanitized, mapping


_BOOL_VALUES = {"true": True, "false": False}
_INT_RE = re.compile(r"[+-]?\d+")


def _parse_bool(text: str) -> bool | None:
    return _BOOL_VALUES.get(text.strip().lower())


def _parse_int(text: str) -> int | None:
    return int(text) if _INT_RE.fullmatch(text.strip()) else None


def _parse_decimal(text: str) -> Decimal | None:
    try:
        dec = Decimal(text.strip())
    except InvalidOperation:
        return None
    return dec if dec.is_finite() else None


def _parse_datetime(text: str) -> str | None:
    candidate = text.strip().replace("Z", "+00:00")
    try:
        datetime.fromisoformat(candidate)
    except ValueError:
        return None
    return text.strip()


def _infer_dtype(cells: list[str]) -> ColumnDtype:
    present = [c for c in cells if c != ""]
    if not present:
        return ColumnDtype.TEXT
    if all(_parse_bool(c) is not None for c in present):
        return ColumnDtype.BOOLEAN
    if all(_parse_int(c) is not None for c in present):
        return ColumnDtype.INTEGER
    if all(_parse_decimal(c) is not None for c in present):
        return ColumnDtype.DECIMAL
    if all(_parse_datetime(c) is not None for c in present):
        return ColumnDtype.DATETIME
    return ColumnDtype.TEXT


def _convert(cell: str, dtype: ColumnDtype):
    if cell == "":
        return None
    if dtype is ColumnDtype.BOOLEAN:
        return _parse_bool(cell)
    if dtype is ColumnDtype.INTEGER:
        return _parse_int(cell)
    if dtype is ColumnDtype.DECIMAL:
        return _parse_decimal(cell)
    if dtype is ColumnDtype.DATETIME:
        return _parse_datetime(cell)
    return cell


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            records = list(reader)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if not records:
        raise EmptyTable(f"{path}: no header row")
    return records[0], records[1:]


def _read_parquet(path: Path) -> tuple[list[str], list[list[str]]]:
    # Optional format; served through whichever dataframe reader is installed.
    try:
        import polars as pl

        frame = pl.read_parquet(path)
        header = list(frame.columns)
        raw = [["" if v is None else str(v) for v in row] for row in frame.rows()]
        return header, raw
    except ImportError:
        pass
    try:
        import pandas as pd

        frame = pd.read_parquet(path)
        header = [str(c) for c in frame.columns]
        raw = [["" if v != v or v is None else str(v) for v in row] for row in frame.itertuples(index=False)]
        return header, raw
    except ImportError as exc:
        raise UnreadableFile(f"{path}: parquet support needs polars or pandas+pyarrow") from exc


def load_table(path: str | Path, dataset_id: str | None = None) -> TableHandle:
    """Load a CSV (or, optionally, Parquet) file into an immutable handle.

    Dtypes come from a full-column scan with the strictest type first
    (boolean, integer, decimal, ISO datetime, then text); empty fields are
    nulls and stay None.
    """
    path = Path(path)
    if not path.exists():
        raise UnreadableFile(f"{path}: no such file")
    if path.suffix.lower() == ".parquet":
        header, raw_rows = _read_parquet(path)
    else:
        header, raw_rows = _read_csv(path)
    if not raw_rows:
        raise EmptyTable(f"{path}: zero data rows")
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise RaggedRows(f"{path}: row {i + 2} has {len(row)} fields, header has {len(header)}")

    sanitized, mapping = sanitize_columns(header)
    dtypes = [_infer_dtype([row[j] for row in raw_rows]) for j in range(len(header))]
    columns = tuple(
        Column(sanitized_name=s, original_name=o, dtype=d) for s, o, d in zip(sanitized, header, dtypes)
    )
    rows = tuple(tuple(_convert(row[j], dtypes[j]) for j in range(len(header))) for row in raw_rows)
    return TableHandle(
        dataset_id=dataset_id or path.stem,
        columns=columns,
        rows=rows,
        sanitization_map=mapping,
    )


def cell_text(value: Any) -> str:
    """Plain-text form of a cell for prompts and snapshots; None becomes ''."""
    if value is None:
        return ""
    if value is True:
        return "True"
    if value is False:
        return "False"
    if isinstance(value, Decimal):
        return format_decimal(value)
    return str(value)


def cell_repr(value: Any) -> str:
    if value is None:
        return "None"
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, Decimal):
        return format_decimal(value)
    if isinstance(value, int):
        return str(value)
    return repr(value)


def row_repr(table: TableHandle, row_index: int, selected: Sequence[str] | None = None) -> str:
    """Dict-style text of one row, e.g. ``{'department': 'HR', 'age': 31}``."""
    names = list(selected) if selected is not None else table.column_names
    parts = []
    for name in names:
        j = table.column_index(name)
        parts.append(f"{name!r}: {cell_repr(table.rows[row_index][j])}")
    return "{" + ", ".join(parts) + "}"


def columns_with_dtypes(table: TableHandle, selected: Sequence[str] | None = None) -> str:
    names = list(selected) if selected is not None else table.column_names
    return "[" + ", ".join(f"({n!r}, {table.dtype_of(n).value!r})" for n in names) + "]"


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """GitHub-style pipe table; cells get pipes and newlines escaped."""

    def esc(text: str) -> str:
        return text.replace("|", "\\|").replace("\r\n", "\\n").replace("\n", "\\n")

    lines = ["| " + " | ".join(esc(h) for h in headers) + " |"]
    lines.append("| " + " | ".join("---" for _ in headers) + " |")
    for row in rows:
        lines.append("| " + " | ".join(esc(c) for c in row) + " |")
    return "\n".join(lines)


def text_grid(table: TableHandle, selected: Sequence[str], row_indices: Sequence[int]) -> str:
    """Fixed-width text rendering of chosen rows, dataframe-print style."""
    names = list(selected)
    cols = [table.column_index(n) for n in names]
    grid = [[""] + names]
    for i in row_indices:
        grid.append([str(i)] + [cell_text(table.rows[i][j]) for j in cols])
    widths = [max(len(row[k]) for row in grid) for k in range(len(grid[0]))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() for row in grid)


def write_csv_snapshot(table: TableHandle, path: str | Path) -> None:
    """Write the table with sanitized headers; nulls become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        for row in table.rows:
            writer.writerow([cell_text(v) for v in row])


def _parse_name_list(completion: str, known: Sequence[str]) -> list[str]:
    text = completion.strip()
    if "COLUMNS:" in text:
        text = text.rsplit("COLUMNS:", 1)[1]
    tokens = [t.strip().strip("\"'`") for t in re.split(r"[,\n]", text)]
    tokens = [t for t in tokens if t]
    known_set = set(known)
    hits = [t for t in tokens if t in known_set]
    # Preserve table order, drop duplicates and hallucinated names.
    ordered = [n for n in known if n in set(hits)]
    return ordered


def select_columns(
    question: Question, table: TableHandle, gw: Gateway, model: str
) -> tuple[ColumnSelection, tuple[SolverExchange, ...]]:
    """Ask the model for the relevant columns; hallucinations are dropped.

    A single-column table short-circuits without a model call, and an empty
    intersection falls back to all columns. The selection is always a
    non-empty subset of the real columns.
    """
    names = table.column_names
    if len(names) == 1:
        selection = ColumnSelection(question_id=question.id, selected=tuple(names), rationale="single column")
        return selection, ()
    prompt = render_template(
        "column_select",
        {
            "question": question.text,
            "columns_and_types": ", ".join(f"{n}: {table.dtype_of(n).value}" for n in names),
            "first_row": row_repr(table, 0),
        },
    )
    response = gw.complete(ChatRequest.user(model, prompt))
    chosen = _parse_name_list(response.content, names)
    if not chosen:
        chosen = list(names)
    selection = ColumnSelection(question_id=question.id, selected=tuple(chosen), rationale=response.content.strip())
    return selection, (SolverExchange("column_select", prompt, response.content),)


def explain_columns(table: TableHandle, gw: Gateway, model: str) -> dict:
    """Optional readability pass: sanitized name -> clearer display name.

    The result is only ever interpolated into prompts; execution keeps the
    sanitized identifiers.
    """
    names = table.column_names
    head = list(range(min(3, table.n_rows)))
    prompt = render_template(
        "explain_columns",
        {
            "columns": ", ".join(names),
            "first_rows": text_grid(table, names, head),
        },
    )
    response = gw.complete(ChatRequest.user(model, prompt))
    explained = {n: n for n in names}
    for line in response.content.splitlines():
        if "->" not in line:
            continue
        left, right = line.split("->", 1)
        name, clearer = left.strip().strip("\"'`"), right.strip().strip("\"'`")
        if name in explained and clearer:
            explained[name] = clearer
    return explained
