from __future__ import annotations

import sqlite3
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabqa.core import Question
from tabqa.tables import (
    ColumnDtype,
    ColumnSelection,
    EmptyTable,
    RaggedRows,
    TableHandle,
    UnreadableFile,
    explain_columns,
    load_table,
    markdown_table,
    sanitize_columns,
    select_columns,
    text_grid,
    write_csv_snapshot,
)

from .helpers import FakeGateway, gateway_for


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_basic_csv(tmp_path):
    path = _write(tmp_path, "t.csv", "age,salary\n25,1000.5\n40,2000.25\n31,\n")
    table = load_table(path)
    assert [c.sanitized_name for c in table.columns] == ["age", "salary"]
    assert table.n_rows == 3
    assert table.dtype_of("age") is ColumnDtype.INTEGER
    assert table.dtype_of("salary") is ColumnDtype.DECIMAL
    assert table.rows[0] == (25, Decimal("1000.5"))
    assert table.rows[2] == (31, None)  # empty field preserved as null
    assert table.dataset_id == "t"


def test_load_emoji_column_round_trip(tmp_path):
    path = _write(tmp_path, "t.csv", "mood🔥,n\nhappy,1\nsad,2\n")
    table = load_table(path)
    sanitized = table.columns[0].sanitized_name
    assert sanitized != "mood🔥"
    assert table.restore(sanitized) == "mood🔥"


def test_load_failures(tmp_path):
    with pytest.raises(EmptyTable):
        load_table(_write(tmp_path, "zero.csv", "a,b\n"))
    with pytest.raises(RaggedRows):
        load_table(_write(tmp_path, "ragged.csv", "a,b\n1,2\n3\n"))
    with pytest.raises(UnreadableFile):
        load_table(tmp_path / "missing.csv")


def test_dtype_inference_order(tmp_path):
    path = _write(
        tmp_path,
        "t.csv",
        "flag,count,price,when,label\n"
        "True,3,1.5,2024-01-02,x\n"
        "false,-7,2,2024-02-03T10:00:00,7\n",
    )
    table = load_table(path)
    dtypes = [c.dtype for c in table.columns]
    assert dtypes == [
        ColumnDtype.BOOLEAN,
        ColumnDtype.INTEGER,
        ColumnDtype.DECIMAL,
        ColumnDtype.DATETIME,
        ColumnDtype.TEXT,
    ]
    assert table.rows[1][0] is False
    assert table.rows[1][4] == "7"  # mixed column falls back to text verbatim


def test_sanitize_identity():
    sanitized, mapping = sanitize_columns(["age"])
    assert sanitized == ["age"]
    assert mapping == {"age": "age"}


def test_sanitize_emoji_token_is_stable():
    sanitized, mapping = sanitize_columns(["score⭐"])
    assert sanitized == ["score_h9597_"]  # frozen: sha256("⭐")[:2] == 0x9597
    assert mapping["score_h9597_"] == "score⭐"
    assert sanitize_columns(["score⭐"])[0] == sanitized


def test_sanitize_collision_gets_suffix():
    sanitized, mapping = sanitize_columns(["a🔥", "a🔥 "])
    assert sanitized == ["a_hed8d_", "a_hed8d__2"]
    assert mapping["a_hed8d_"] == "a🔥"
    assert mapping["a_hed8d__2"] == "a🔥 "


def test_sanitize_degenerate_headers():
    sanitized, mapping = sanitize_columns(["", " ", "🔥"])
    assert len(set(sanitized)) == 3
    assert all(mapping[s] == orig for s, orig in zip(sanitized, ["", " ", "🔥"]))


@settings(max_examples=200)
@given(st.lists(st.text(max_size=12), min_size=1, max_size=8))
def test_sanitize_injective_and_restorable(headers):
    sanitized, mapping = sanitize_columns(headers)
    assert len(set(sanitized)) == len(headers)
    for name, original in zip(sanitized, headers):
        assert mapping[name] == original
    # Deterministic across calls.
    assert sanitize_columns(headers) == (sanitized, mapping)


@given(st.lists(st.text(max_size=10), min_size=1, max_size=5))
def test_sanitized_names_work_as_quoted_sql_identifiers(headers):
    sanitized, _ = sanitize_columns(headers)
    conn = sqlite3.connect(":memory:")
    columns = ", ".join(f'"{name}" TEXT' for name in sanitized)
    conn.execute(f"CREATE TABLE probe ({columns})")
    conn.close()


def _table(tmp_path) -> TableHandle:
    path = _write(tmp_path, "people.csv", "age,name,city\n30,Ann,Oslo\n40,Bob,Kyiv\n")
    return load_table(path)


def test_select_columns_uses_model_answer(tmp_path):
    table = _table(tmp_path)
    gw = gateway_for({"Select the columns": "age"})
    question = Question(id="q", text="average age?", dataset_id="people")
    selection, exchanges = select_columns(question, table, gw, "m")
    assert "age" in selection.selected
    assert set(selection.selected) <= set(table.column_names)
    assert len(exchanges) == 1 and exchanges[0].tag == "column_select"


def test_select_columns_drops_hallucinations_and_falls_back(tmp_path):
    table = _table(tmp_path)
    gw = gateway_for({"Select the columns": "bogus, nonsense"})
    question = Question(id="q", text="anything", dataset_id="people")
    selection, _ = select_columns(question, table, gw, "m")
    assert selection.selected == tuple(table.column_names)


def test_select_columns_single_column_skips_model(tmp_path):
    path = _write(tmp_path, "one.csv", "only\n1\n2\n")
    table = load_table(path)

    def explode(req):
        raise AssertionError("model must not be called for single-column tables")

    selection, exchanges = select_columns(
        Question(id="q", text="?", dataset_id="one"), table, FakeGateway(explode), "m"
    )
    assert selection.selected == ("only",)
    assert exchanges == ()


def test_column_selection_must_be_non_empty():
    with pytest.raises(Exception):
        ColumnSelection(question_id="q", selected=())


def test_explain_columns(tmp_path):
    path = _write(tmp_path, "fires.csv", "DMC,RH\n26.2,51\n23.3,33\n")
    table = load_table(path)
    gw = gateway_for({"clearer": "DMC -> Duff Moisture Code\nRH -> Relative Humidity"})
    explained = explain_columns(table, gw, "m")
    assert explained == {"DMC": "Duff Moisture Code", "RH": "Relative Humidity"}


def test_explain_columns_identity_when_no_suggestions(tmp_path):
    table = _table(tmp_path)
    gw = gateway_for({"clearer": "these names are already clear"})
    assert explain_columns(table, gw, "m") == {n: n for n in table.column_names}


def test_markdown_table_escapes_cells():
    text = markdown_table(["a"], [["x|y"], ["line1\nline2"]])
    lines = text.splitlines()
    assert lines[0] == "| a |"
    assert lines[1] == "| --- |"
    assert "x\\|y" in lines[2]
    assert "line1\\nline2" in lines[3]


def test_text_grid_alignment(tmp_path):
    table = _table(tmp_path)
    grid = text_grid(table, ["age", "name"], [0, 1])
    lines = grid.splitlines()
    assert len(lines) == 3
    assert "age" in lines[0] and "name" in lines[0]
    assert "Ann" in lines[1] and "Bob" in lines[2]


def test_load_parquet_optional(tmp_path):
    pl = pytest.importorskip("polars")
    path = tmp_path / "t.parquet"
    pl.DataFrame({"age": [30, 40], "name": ["Ann", "Bob"]}).write_parquet(path)
    table = load_table(path)
    assert table.column_names == ["age", "name"]
    assert table.dtype_of("age") is ColumnDtype.INTEGER
    assert table.rows[1] == (40, "Bob")


def test_write_csv_snapshot_round_trips(tmp_path):
    source = _write(tmp_path, "s.csv", "flag,n🔥,txt\nTrue,1,a\nFalse,,b\n")
    table = load_table(source)
    snapshot = tmp_path / "snap.csv"
    write_csv_snapshot(table, snapshot)
    again = load_table(snapshot)
    assert again.column_names == table.column_names
    assert again.rows == table.rows
