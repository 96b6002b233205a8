"""Per-question pipeline and benchmark runner.

One question fans out into five candidates (two SQL, two script, one
direct), which run concurrently over immutable inputs; the trace is
assembled by a single owner in a fixed order so replayed runs are
byte-stable apart from the wall-time field.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from . import e2e_solver, orchestrator, script_solver, sql_solver
from .config import RunConfig, build_embedder, build_gateway
from .core import (
    AnswerType,
    DecisionCategory,
    PipelineTrace,
    Question,
    Strategy,
    TabqaError,
    answer_from_obj,
    canonical_dumps,
)
from .gateway import Gateway
from .retrieval import EmbeddingCache, top_k_rows
from .scoring import ScoredPair, ScoreReport, score_run, write_score_file
from .script_solver import SandboxClient
from .tables import TableHandle, load_table, select_columns, write_csv_snapshot
from .tables import explain_columns as explain_columns_op


@dataclass
class PipelineContext:
    """Shared per-run services built once from a RunConfig."""

    cfg: RunConfig
    gw: Gateway
    embedder: object
    cache: EmbeddingCache
    sandbox: SandboxClient | None

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "PipelineContext":
        cfg.validate()
        sandbox = SandboxClient(cfg.sandbox_cmd) if cfg.sandbox_cmd else None
        return cls(cfg=cfg, gw=build_gateway(cfg), embedder=build_embedder(cfg),
                   cache=EmbeddingCache(), sandbox=sandbox)


def run_question(question: Question, table: TableHandle, ctx: PipelineContext) -> PipelineTrace:
    """Column selection, retrieval, five candidates, selection, trace."""
    cfg = ctx.cfg
    started = time.monotonic()
    trace = PipelineTrace(question_id=question.id)

    def absorb(exchanges) -> None:
        for ex in exchanges:
            trace.prompts.append((ex.tag, ex.prompt))
            trace.completions.append(ex.completion)

    selection, selection_exchanges = select_columns(
        question, table, ctx.gw, cfg.models["column_selector"]
    )
    absorb(selection_exchanges)

    hint, type_exchanges = orchestrator.deduce_answer_type(
        question, ctx.gw, cfg.models["orchestrator"]
    )
    absorb(type_exchanges)

    matches = top_k_rows(question, table, selection, k=cfg.k_rows,
                         embedder=ctx.embedder, cache=ctx.cache)

    explained = None
    if cfg.explain_columns:
        explained = explain_columns_op(table, ctx.gw, cfg.models["column_selector"])

    snapshot_path = ""
    snapshot_file = None
    if ctx.sandbox is not None:
        snapshot_file = tempfile.NamedTemporaryFile(
            mode="w", suffix=".csv", prefix=f"tabqa_{table.dataset_id}_", delete=False
        )
        snapshot_file.close()
        write_csv_snapshot(table, snapshot_file.name)
        snapshot_path = snapshot_file.name

    variant = "dialogue" if cfg.dialogue_variant else "standard"
    same_sql_model = cfg.models["sql_a"] == cfg.models["sql_b"]
    same_script_model = cfg.models["script_a"] == cfg.models["script_b"]

    jobs = {
        Strategy.SQL_A: lambda: sql_solver.solve_sql(
            question, table, selection, matches, ctx.gw, cfg.models["sql_a"],
            strategy=Strategy.SQL_A, hint=hint, timeout_s=cfg.sql_timeout_s, explained=explained),
        Strategy.SQL_B: lambda: sql_solver.solve_sql(
            question, table, selection, matches, ctx.gw, cfg.models["sql_b"],
            strategy=Strategy.SQL_B, hint=hint, timeout_s=cfg.sql_timeout_s,
            seed=1 if same_sql_model else None, explained=explained),
        Strategy.SCRIPT_A: lambda: script_solver.solve_script(
            question, table, selection, ctx.gw, ctx.sandbox, snapshot_path,
            cfg.models["script_a"], strategy=Strategy.SCRIPT_A, hint=hint,
            timeout_ms=cfg.script_timeout_ms, variant=variant),
        Strategy.SCRIPT_B: lambda: script_solver.solve_script(
            question, table, selection, ctx.gw, ctx.sandbox, snapshot_path,
            cfg.models["script_b"], strategy=Strategy.SCRIPT_B, hint=hint,
            timeout_ms=cfg.script_timeout_ms, seed=1 if same_script_model else None,
            variant=variant),
        Strategy.END_TO_END: lambda: e2e_solver.solve_e2e(
            question, table, selection, matches, ctx.gw, cfg.models["e2e"],
            row_limit=cfg.e2e_row_limit),
    }
    order = [Strategy.SQL_A, Strategy.SQL_B, Strategy.SCRIPT_A, Strategy.SCRIPT_B, Strategy.END_TO_END]
    try:
        with ThreadPoolExecutor(max_workers=ctx.cfg.concurrency) as pool:
            futures = {s: pool.submit(jobs[s]) for s in order}
            outcomes = {s: futures[s].result() for s in order}
    finally:
        if snapshot_file is not None:
            Path(snapshot_file.name).unlink(missing_ok=True)

    for strategy in order:
        outcome = outcomes[strategy]
        absorb(outcome.exchanges)
        trace.candidates.append(outcome.candidate)

    if any(c.ok for c in trace.candidates):
        verdict, orch_exchanges = orchestrator.select(
            question, trace.candidates, table, ctx.gw, cfg.models["orchestrator"], deduced_hint=hint
        )
        absorb(orch_exchanges)
        trace.chosen_index = verdict.chosen_index
        trace.decision_category = verdict.category
        trace.final_answer = trace.candidates[verdict.chosen_index].result
    else:
        trace.decision_category = DecisionCategory.NO_VALID_CANDIDATE

    trace.wall_time_ms = int((time.monotonic() - started) * 1000)
    trace.validate()
    return trace


def read_questions(path: str | Path) -> list[tuple[Question, object]]:
    """Questions JSONL: {id, dataset_id, question, expected_type, expected_answer}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line, parse_float=Decimal)
                expected_type = (
                    AnswerType.from_tag(obj["expected_type"]) if obj.get("expected_type") else None
                )
                question = Question(
                    id=str(obj["id"]),
                    text=obj["question"],
                    dataset_id=str(obj["dataset_id"]),
                    expected_type=expected_type,
                )
                expected_answer = (
                    answer_from_obj(obj["expected_answer"]) if obj.get("expected_answer") else None
                )
            except (ValueError, KeyError, TypeError, TabqaError) as exc:
                raise TabqaError(f"{path}:{line_no}: bad question line: {exc}") from exc
            out.append((question, expected_answer))
    return out


def _failed_trace(question_id: str) -> PipelineTrace:
    return PipelineTrace(question_id=question_id,
                         decision_category=DecisionCategory.NO_VALID_CANDIDATE)


def run_benchmark(dataset_dir: str | Path, questions_file: str | Path,
                  cfg: RunConfig) -> tuple[ScoreReport, Path]:
    """Run every question, write the trace archive and score report.

    Question failures are isolated: a broken table or a cassette miss marks
    that one question incorrect and the run continues.
    """
    ctx = PipelineContext.from_config(cfg)
    dataset_dir = Path(dataset_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = read_questions(questions_file)
    seen_ids = set()
    for question, _ in entries:
        if question.id in seen_ids:
            raise TabqaError(f"duplicate question id {question.id!r}")
        seen_ids.add(question.id)

    tables: dict[str, TableHandle] = {}
    traces: list[PipelineTrace] = []
    pairs: list[ScoredPair] = []
    for question, expected_answer in entries:
        try:
            if question.dataset_id not in tables:
                tables[question.dataset_id] = load_table(dataset_dir / f"{question.dataset_id}.csv")
            trace = run_question(question, tables[question.dataset_id], ctx)
        except Exception as exc:  # per-question isolation
            print(f"question {question.id} failed: {exc}", file=sys.stderr)
            trace = _failed_trace(question.id)
        traces.append(trace)
        if expected_answer is not None:
            pairs.append(ScoredPair(question.id, expected_answer, trace.final_answer))

    traces_path = out_dir / "traces.jsonl"
    with open(traces_path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(canonical_dumps(trace.to_obj()) + "\n")
    write_score_file(out_dir / "answers.jsonl", pairs)

    report = score_run((p.expected, p.got) for p in pairs)
    with open(out_dir / "score.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_obj(), indent=2) + "\n")
    return report, traces_path


def read_traces(path: str | Path) -> list[PipelineTrace]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(PipelineTrace.from_obj(json.loads(line, parse_float=Decimal)))
    return out


def report_stats(traces_path: str | Path, plot_path: str | Path | None = None) -> dict:
    """Decision-category histogram and per-strategy failure taxonomy."""
    traces = read_traces(traces_path)
    decisions: dict[str, int] = {c.value: 0 for c in DecisionCategory}
    statuses: dict[str, dict[str, int]] = {}
    corrected = 0
    for trace in traces:
        decisions[trace.decision_category.value] += 1
        for cand in trace.candidates:
            per = statuses.setdefault(cand.strategy.value, {})
            per[cand.status.value] = per.get(cand.status.value, 0) + 1
            if cand.corrected:
                corrected += 1
    total = len(traces)
    stats = {
        "traces": total,
        "decisions": decisions,
        "decision_percentages": {
            k: (100.0 * v / total if total else 0.0) for k, v in decisions.items()
        },
        "candidate_statuses": statuses,
        "corrected_candidates": corrected,
    }
    if total == 0:
        stats["warning"] = "trace archive is empty"
    if plot_path is not None:
        _plot_decisions(decisions, plot_path)
    return stats


def _plot_decisions(decisions: dict[str, int], plot_path: str | Path) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise TabqaError("plotting needs matplotlib (install extra 'plots')") from exc
    labels = list(decisions)
    values = [decisions[k] for k in labels]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(labels, values)
    ax.set_ylabel("questions")
    ax.set_title("selection decision scenarios")
    plt.xticks(rotation=20, ha="right")
    fig.tight_layout()
    fig.savefig(plot_path)
    plt.close(fig)
