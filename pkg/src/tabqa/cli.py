"""Command-line entry point: run, ask, score, stats."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .core import AnswerType, TabqaError, canonical_dumps, serialize_answer
from .pipeline import PipelineContext, report_stats, run_benchmark, run_question
from .scoring import read_score_file, score_run
from .tables import load_table


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.mode:
        cfg.mode = args.mode
    if args.cassette:
        cfg.cassette_path = args.cassette
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "sandbox_cmd", None):
        cfg.sandbox_cmd = tuple(args.sandbox_cmd.split())
    if getattr(args, "endpoint", None):
        cfg.endpoint = args.endpoint
    cfg.validate()
    return cfg


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (models, endpoints, budgets)")
    parser.add_argument("--mode", choices=["live", "record", "replay"], help="gateway mode")
    parser.add_argument("--cassette", help="cassette path for record/replay modes")
    parser.add_argument("--endpoint", help="chat-completions endpoint base URL")
    parser.add_argument("--sandbox-cmd", dest="sandbox_cmd",
                        help="sandbox runner command (quoted; unset = script candidates stubbed)")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    report, traces_path = run_benchmark(args.tables, args.questions, cfg)
    print(report.as_text())
    print(f"traces: {traces_path}")
    return 0


def _cmd_ask(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    ctx = PipelineContext.from_config(cfg)
    table = load_table(args.table)
    expected_type = AnswerType.from_tag(args.expected_type) if args.expected_type else None
    from .core import Question

    question = Question(id="adhoc", text=args.question, dataset_id=table.dataset_id,
                        expected_type=expected_type)
    trace = run_question(question, table, ctx)
    if trace.final_answer is not None:
        print(serialize_answer(trace.final_answer))
    else:
        print("no answer (no candidate executed successfully)", file=sys.stderr)
    if args.trace:
        Path(args.trace).write_text(canonical_dumps(trace.to_obj()) + "\n", encoding="utf-8")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    pairs = read_score_file(args.pairs)
    report = score_run((p.expected, p.got) for p in pairs)
    print(report.as_text())
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_obj(), indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    stats = report_stats(args.traces, plot_path=args.plot)
    print(json.dumps(stats, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a benchmark of questions against tables")
    run_p.add_argument("--questions", required=True, help="questions JSONL file")
    run_p.add_argument("--tables", required=True, help="directory of <dataset_id>.csv files")
    run_p.add_argument("--out", help="output directory for traces and scores")
    _add_config_flags(run_p)
    run_p.set_defaults(func=_cmd_run)

    ask_p = sub.add_parser("ask", help="answer a single question about one table")
    ask_p.add_argument("--question", required=True)
    ask_p.add_argument("--table", required=True, help="CSV (or Parquet) file")
    ask_p.add_argument("--expected-type", dest="expected_type",
                       choices=[t.value for t in AnswerType])
    ask_p.add_argument("--trace", help="write the full trace JSON here")
    _add_config_flags(ask_p)
    ask_p.set_defaults(func=_cmd_ask)

    score_p = sub.add_parser("score", help="score a JSONL file of expected/got answer pairs")
    score_p.add_argument("--pairs", required=True)
    score_p.add_argument("--json", help="also write the report as JSON here")
    score_p.set_defaults(func=_cmd_score)

    stats_p = sub.add_parser("stats", help="decision and failure statistics over a trace archive")
    stats_p.add_argument("--traces", required=True)
    stats_p.add_argument("--plot", help="optional decision histogram image path")
    stats_p.set_defaults(func=_cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except TabqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
