from __future__ import annotations

import json
import subprocess
import sys
import time

import numpy as np
import pandas as pd
import pytest

from dfsandbox.runner import UnmappableResult, map_result, run_job

RUNNER = (sys.executable, "-m", "dfsandbox")


@pytest.fixture
def csv_path(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "department,age,flag\nHR,30,True\nIT,40,False\nIT,25,True\n", encoding="utf-8"
    )
    return str(path)


def _invoke(request: dict, timeout_s: float = 15.0) -> tuple[int, dict | None, str]:
    proc = subprocess.run(
        RUNNER, input=json.dumps(request), capture_output=True, text=True, timeout=timeout_s
    )
    payload = json.loads(proc.stdout) if proc.stdout.strip() else None
    return proc.returncode, payload, proc.stderr


def _request(code: str, csv_path: str, timeout_ms: int = 5000, id: str = "job-1") -> dict:
    return {"id": id, "code": code, "table_csv_path": csv_path, "timeout_ms": timeout_ms}


def test_ok_scalar_roundtrip(csv_path):
    rc, payload, _ = _invoke(_request("result = int(df['age'].sum())", csv_path))
    assert rc == 0
    assert payload["id"] == "job-1"
    assert payload["status"] == "ok"
    assert payload["result"] == {"type": "number", "value": 95}
    assert payload["duration_ms"] >= 0


def test_ok_boolean(csv_path):
    rc, payload, _ = _invoke(_request("result = True", csv_path))
    assert rc == 0
    assert payload["result"] == {"type": "boolean", "value": True}


def test_ok_value_counts_list(csv_path):
    rc, payload, _ = _invoke(
        _request("result = df['department'].value_counts().nlargest(2).index.tolist()", csv_path)
    )
    assert rc == 0
    assert payload["result"]["type"] == "list[category]"
    assert sorted(payload["result"]["value"]) == ["HR", "IT"]


def test_error_carries_traceback(csv_path):
    rc, payload, _ = _invoke(_request("result = 1/0", csv_path))
    assert rc == 0
    assert payload["status"] == "error"
    assert "ZeroDivisionError" in payload["error_text"]
    assert "result" not in payload


def test_missing_result_assignment(csv_path):
    rc, payload, _ = _invoke(_request("x = 1", csv_path))
    assert rc == 0
    assert payload["status"] == "error"
    assert "result" in payload["error_text"]


def test_multiline_code_rejected(csv_path):
    rc, payload, _ = _invoke({"id": "x", "code": "result = 1\nresult = 2",
                              "table_csv_path": csv_path, "timeout_ms": 1000})
    assert rc == 0
    assert payload["status"] == "error"
    assert "single line" in payload["error_text"]


def test_self_timeout(csv_path):
    started = time.monotonic()
    rc, payload, _ = _invoke(_request("result = [0 for _ in iter(int, 1)]", csv_path, timeout_ms=300))
    elapsed = time.monotonic() - started
    assert rc == 0
    assert payload["status"] == "timeout"
    assert elapsed < 10


def test_protocol_error_nonzero_exit():
    proc = subprocess.run(RUNNER, input="this is not json", capture_output=True, text=True, timeout=15)
    assert proc.returncode != 0
    assert "protocol error" in proc.stderr


def test_unreadable_csv_is_job_error(tmp_path):
    rc, payload, _ = _invoke(_request("result = 1", str(tmp_path / "missing.csv")))
    assert rc == 0
    assert payload["status"] == "error"
    assert "missing.csv" in payload["error_text"]


def test_map_scalars():
    assert map_result(35.2) == {"type": "number", "value": 35.2}
    assert map_result(np.float64(1.5)) == {"type": "number", "value": 1.5}
    assert map_result(np.int64(7)) == {"type": "number", "value": 7}
    assert map_result(np.bool_(False)) == {"type": "boolean", "value": False}
    assert map_result("HR") == {"type": "category", "value": "HR"}
    assert map_result(pd.Timestamp("2024-01-02")) == {"type": "category", "value": "2024-01-02 00:00:00"}


def test_map_lists():
    assert map_result(["HR", "IT"]) == {"type": "list[category]", "value": ["HR", "IT"]}
    assert map_result([1, 2.5]) == {"type": "list[number]", "value": [1, 2.5]}
    assert map_result(np.array([1, 2])) == {"type": "list[number]", "value": [1, 2]}
    assert map_result(pd.Series([True, False])) == {"type": "list[category]", "value": ["True", "False"]}
    assert map_result(pd.Index(["a"])) == {"type": "list[category]", "value": ["a"]}
    assert map_result([]) == {"type": "list[category]", "value": []}


def test_map_mixed_list_stringifies():
    assert map_result(["a", 1, True]) == {"type": "list[category]", "value": ["a", "1", "True"]}


def test_map_set_is_sorted():
    assert map_result({3, 1, 2}) == {"type": "list[number]", "value": [1, 2, 3]}


def test_map_rejections():
    with pytest.raises(UnmappableResult):
        map_result(pd.DataFrame({"a": [1]}))
    with pytest.raises(UnmappableResult):
        map_result({"a": 1})
    with pytest.raises(UnmappableResult):
        map_result(float("nan"))
    with pytest.raises(UnmappableResult):
        map_result([1, float("nan")])
    with pytest.raises(UnmappableResult):
        map_result([[1, 2]])
    with pytest.raises(UnmappableResult):
        map_result(np.array([[1], [2]]))
    with pytest.raises(UnmappableResult):
        map_result(None)


def test_run_job_booleans_win_over_ints(csv_path):
    response = run_job(_request("result = bool(df['flag'].iloc[0])", csv_path))
    assert response["status"] == "ok"
    assert response["result"] == {"type": "boolean", "value": True}
