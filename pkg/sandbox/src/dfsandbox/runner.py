"""One-shot dataframe script runner speaking JSON over stdio.

Reads exactly one request object on stdin:

    {"id": ..., "code": ..., "table_csv_path": ..., "timeout_ms": ...}

loads the CSV into ``df``, executes the single-line script, and writes
exactly one newline-terminated response object on stdout:

    {"id": ..., "status": "ok"|"error"|"timeout",
     "result": <answer object, ok only>, "error_text": <error only>,
     "duration_ms": ...}

The answer object is {"type", "value"} with type one of boolean, number,
category, list[category], list[number]. Exit code is 0 for all three
statuses; a non-zero exit means the protocol itself failed. The supervisor
owns the real timeout by killing the process; the in-process timer here is
defense in depth only and cannot interrupt native code.
"""

from __future__ import annotations

import json
import signal
import sys
import time
import traceback
from datetime import date, datetime
from decimal import Decimal

import numpy as np
import pandas as pd


class UnmappableResult(Exception):
    """The script produced a value with no canonical answer representation."""


class _TimeLimit(Exception):
    pass


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and value != value:
        return True
    return bool(value is pd.NaT)


def _scalar(value):
    """Map one scalar to a (type, json value) pair; bool wins over int."""
    if isinstance(value, (bool, np.bool_)):
        return "boolean", bool(value)
    if isinstance(value, (int, np.integer)):
        return "number", int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise UnmappableResult("non-finite number in result")
        return "number", value
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise UnmappableResult("non-finite number in result")
        return "number", float(value)
    if isinstance(value, str):
        return "category", value
    if isinstance(value, (datetime, date, pd.Timestamp)):
        return "category", str(value)
    raise UnmappableResult(f"cannot map scalar of type {type(value).__name__}")


def _as_items(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, np.ndarray):
        if value.ndim != 1:
            raise UnmappableResult(f"cannot map {value.ndim}-dimensional array")
        return value.tolist()
    if isinstance(value, (pd.Series, pd.Index)):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        items = list(value)
        try:
            return sorted(items)
        except TypeError:
            return sorted(items, key=str)
    return None


def map_result(value) -> dict:
    """Canonical answer object for a scalar or flat sequence result."""
    if isinstance(value, pd.DataFrame):
        raise UnmappableResult("dataframe results are not a single answer")
    if isinstance(value, dict):
        raise UnmappableResult("mapping results are not a single answer")
    if _is_missing(value):
        raise UnmappableResult("result is missing/NaN")

    items = _as_items(value)
    if items is None:
        kind, mapped = _scalar(value)
        return {"type": kind, "value": mapped}

    mapped_items = []
    for item in items:
        if _is_missing(item):
            raise UnmappableResult("missing/NaN element in result list")
        if _as_items(item) is not None or isinstance(item, (pd.DataFrame, dict)):
            raise UnmappableResult("nested containers are not a single answer")
        mapped_items.append(_scalar(item))
    if mapped_items and all(kind == "number" for kind, _ in mapped_items):
        return {"type": "list[number]", "value": [v for _, v in mapped_items]}
    # Mixed or textual lists stringify element-wise.
    values = []
    for (kind, mapped), item in zip(mapped_items, items):
        values.append(mapped if kind == "category" else _plain_text(item, mapped))
    return {"type": "list[category]", "value": values}


def _plain_text(original, mapped) -> str:
    if isinstance(mapped, bool):
        return "True" if mapped else "False"
    if isinstance(mapped, float) and mapped == int(mapped):
        return str(int(mapped))
    return str(mapped)


def run_job(request: dict) -> dict:
    """Execute one script against its CSV snapshot; never raises."""
    started = time.monotonic()

    def done(payload: dict) -> dict:
        payload["id"] = request.get("id", "")
        payload["duration_ms"] = int((time.monotonic() - started) * 1000)
        return payload

    code = request.get("code", "")
    if "\n" in code or "\r" in code:
        return done({"status": "error", "error_text": "code must be a single line"})
    timeout_ms = int(request.get("timeout_ms", 30_000))
    if timeout_ms <= 0:
        return done({"status": "error", "error_text": "timeout_ms must be positive"})

    previous = signal.signal(signal.SIGALRM, _raise_time_limit)
    signal.setitimer(signal.ITIMER_REAL, timeout_ms / 1000.0)
    try:
        frame = pd.read_csv(request["table_csv_path"])
        env = {"df": frame, "pd": pd, "np": np}
        exec(code, env)  # noqa: S102 - executing the script is this program's job
        if "result" not in env:
            return done({"status": "error", "error_text": "script did not assign the variable 'result'"})
        answer = map_result(env["result"])
        return done({"status": "ok", "result": answer})
    except _TimeLimit:
        return done({"status": "timeout"})
    except UnmappableResult as exc:
        return done({"status": "error", "error_text": str(exc)})
    except BaseException:
        return done({"status": "error", "error_text": traceback.format_exc()})
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous)


def _raise_time_limit(signum, frame):
    raise _TimeLimit()


def main() -> int:
    raw = sys.stdin.read()
    try:
        request = json.loads(raw)
        if not isinstance(request, dict):
            raise ValueError("request must be a JSON object")
    except ValueError as exc:
        print(f"protocol error: bad request JSON: {exc}", file=sys.stderr)
        return 2
    response = run_job(request)
    sys.stdout.write(json.dumps(response) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
