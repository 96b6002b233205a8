from __future__ import annotations

import json
from pathlib import Path

from tabqa.cli import main

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures" / "benchmark"


def _config_file(tmp_path: Path) -> str:
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "mode": "replay",
        "cassette_path": str(FIXTURE_DIR / "cassette.jsonl"),
    }), encoding="utf-8")
    return str(path)


def test_run_command(tmp_path, capsys):
    code = main([
        "run",
        "--questions", str(FIXTURE_DIR / "questions.jsonl"),
        "--tables", str(FIXTURE_DIR / "tables"),
        "--config", _config_file(tmp_path),
        "--out", str(tmp_path / "out"),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert "overall" in captured.out
    assert "16     0.800" in captured.out
    assert (tmp_path / "out" / "traces.jsonl").exists()
    assert (tmp_path / "out" / "answers.jsonl").exists()
    assert (tmp_path / "out" / "score.json").exists()


def test_run_requires_cassette_in_replay(tmp_path, capsys):
    code = main([
        "run",
        "--questions", str(FIXTURE_DIR / "questions.jsonl"),
        "--tables", str(FIXTURE_DIR / "tables"),
        "--mode", "replay",
        "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_ask_command_replays_recorded_question(tmp_path, capsys):
    code = main([
        "ask",
        "--question", "What is the average age of our employees?",
        "--table", str(FIXTURE_DIR / "tables" / "staff.csv"),
        "--config", _config_file(tmp_path),
        "--trace", str(tmp_path / "trace.json"),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.strip() == '{"type":"number","value":36}'
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["decision_category"] == "agreement"


def test_score_command(tmp_path, capsys):
    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text(
        '{"question_id": "a", "expected": {"type": "number", "value": 1}, '
        '"got": {"type": "number", "value": 1}}\n'
        '{"question_id": "b", "expected": {"type": "boolean", "value": true}, "got": null}\n',
        encoding="utf-8",
    )
    code = main(["score", "--pairs", str(pairs), "--json", str(tmp_path / "report.json")])
    captured = capsys.readouterr()
    assert code == 0
    assert "overall" in captured.out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["total"] == 2
    assert report["correct"] == 1


def test_stats_command(tmp_path, capsys):
    run_code = main([
        "run",
        "--questions", str(FIXTURE_DIR / "questions.jsonl"),
        "--tables", str(FIXTURE_DIR / "tables"),
        "--config", _config_file(tmp_path),
        "--out", str(tmp_path / "out"),
    ])
    assert run_code == 0
    capsys.readouterr()
    code = main(["stats", "--traces", str(tmp_path / "out" / "traces.jsonl")])
    captured = capsys.readouterr()
    assert code == 0
    stats = json.loads(captured.out)
    assert stats["traces"] == 20
    assert stats["decisions"]["no_valid_candidate"] == 2


def test_score_command_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n", encoding="utf-8")
    code = main(["score", "--pairs", str(bad)])
    assert code == 1
    assert "error" in capsys.readouterr().err
