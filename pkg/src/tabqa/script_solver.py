"""Dataframe-script candidate generation and sandbox dispatch.

Generated code must be a single line assigning to ``result``; it is
executed out of process by a sandbox runner speaking one-JSON-object-per
stream over stdio. The runner self-limits, but the client here is the
authoritative timeout: it kills the whole process group after
timeout_ms plus a grace period.
"""

from __future__ import annotations

import json
import os
import re
import signal
import subprocess
import uuid
from dataclasses import dataclass
from decimal import Decimal
from typing import Sequence

from .core import (
    AnswerType,
    SolverExchange,
    SolverOutcome,
    CandidateSolution,
    CandidateStatus,
    MalformedAnswer,
    Question,
    Strategy,
    TabqaError,
    TypedAnswer,
    answer_from_obj,
)
from .gateway import ChatRequest, Gateway
from .prompts import NoCodeFound, extract_code_block, render_template
from .sql_solver import _correction_prompt, extract_correction_code
from .tables import ColumnSelection, TableHandle, text_grid


class NotSingleLine(TabqaError):
    pass


class NoResultAssignment(TabqaError):
    pass


@dataclass(frozen=True)
class ScriptJob:
    code: str
    table_ref: str
    timeout_ms: int
    expected_type: AnswerType | None = None

    def __post_init__(self) -> None:
        if "\n" in self.code or "\r" in self.code:
            raise TabqaError("script job code must be a single line")
        if self.timeout_ms <= 0:
            raise TabqaError("timeout_ms must be positive")


@dataclass(frozen=True)
class SandboxResult:
    status: str  # ok | error | timeout
    answer: TypedAnswer | None = None
    error_text: str = ""


class SandboxClient:
    """Spawns one runner process per job and enforces the wall-clock timeout."""

    def __init__(self, command: Sequence[str], grace_ms: int = 1000):
        if not command:
            raise TabqaError("sandbox command must be non-empty")
        self.command = tuple(command)
        self.grace_ms = grace_ms

    def run(self, job: ScriptJob) -> SandboxResult:
        request = {
            "id": uuid.uuid4().hex,
            "code": job.code,
            "table_csv_path": job.table_ref,
            "timeout_ms": job.timeout_ms,
        }
        try:
            proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            return SandboxResult(status="error", error_text=f"cannot spawn sandbox runner: {exc}")
        try:
            stdout, stderr = proc.communicate(
                json.dumps(request), timeout=(job.timeout_ms + self.grace_ms) / 1000.0
            )
        except subprocess.TimeoutExpired:
            self._kill_group(proc)
            proc.wait()
            return SandboxResult(status="timeout", error_text=f"killed after {job.timeout_ms} ms")
        if proc.returncode != 0:
            return SandboxResult(status="error",
                                 error_text=f"runner exited {proc.returncode}: {stderr.strip()[:2000]}")
        try:
            payload = json.loads(stdout.strip(), parse_float=Decimal)
            status = payload["status"]
        except (ValueError, KeyError, TypeError) as exc:
            return SandboxResult(status="error", error_text=f"bad runner payload: {exc}")
        if payload.get("id") != request["id"]:
            return SandboxResult(status="error", error_text="runner echoed a different job id")
        if status == "ok":
            try:
                return SandboxResult(status="ok", answer=answer_from_obj(payload["result"]))
            except (MalformedAnswer, KeyError) as exc:
                return SandboxResult(status="error", error_text=f"unparseable runner result: {exc}")
        if status == "timeout":
            return SandboxResult(status="timeout", error_text=f"runner timeout after {job.timeout_ms} ms")
        return SandboxResult(status="error", error_text=str(payload.get("error_text", "unknown error")))

    @staticmethod
    def _kill_group(proc: subprocess.Popen) -> None:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            try:
                proc.kill()
            except ProcessLookupError:
                pass


def build_script_prompt(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    variant: str = "standard",
) -> str:
    """Render the script prompt; head rows (not retrieved rows) give context."""
    if variant not in ("standard", "dialogue"):
        raise TabqaError(f"unknown script prompt variant {variant!r}")
    template = "python_gen_dialogue" if variant == "dialogue" else "python_gen"
    names = list(selection.selected)
    head = list(range(min(3, table.n_rows)))
    return render_template(
        template,
        {
            "question": question.text,
            "columns": "[" + ", ".join(repr(n) for n in names) + "]",
            "first_rows": text_grid(table, names, head),
        },
    )


_RESULT_ASSIGN_RE = re.compile(r"\bresult\s*=(?!=)")


def extract_script(completion: str) -> str:
    """Single-line code after the last "Code:" marker (or fence) assigning to result."""
    code = extract_code_block(completion).strip()
    if "\n" in code or "\r" in code:
        raise NotSingleLine("script must be one line with ';' separators")
    if not _RESULT_ASSIGN_RE.search(code):
        raise NoResultAssignment("script never assigns to 'result'")
    return code


def _validate_script(code: str) -> str:
    code = code.strip()
    if "\n" in code or "\r" in code:
        raise NotSingleLine("script must be one line with ';' separators")
    if not _RESULT_ASSIGN_RE.search(code):
        raise NoResultAssignment("script never assigns to 'result'")
    return code


def _coerce_hint(answer: TypedAnswer, hint: AnswerType | None) -> TypedAnswer:
    # Text 'True'/'False' counts as boolean when a boolean is expected.
    if hint is AnswerType.BOOLEAN and answer.type is AnswerType.CATEGORY:
        lowered = answer.value.strip().lower()
        if lowered in ("true", "false"):
            return TypedAnswer.boolean(lowered == "true")
    return answer


def stub_candidate(strategy: Strategy) -> CandidateSolution:
    """Primary-only placeholder when no sandbox runner is configured."""
    return CandidateSolution(strategy, "", CandidateStatus.EXEC_ERROR,
                             error_text="sandbox runner not configured")


def solve_script(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    gw: Gateway,
    sandbox: SandboxClient | None,
    snapshot_path: str,
    model: str,
    strategy: Strategy = Strategy.SCRIPT_A,
    hint: AnswerType | None = None,
    timeout_ms: int = 30_000,
    seed: int | None = None,
    variant: str = "standard",
) -> SolverOutcome:
    """Generate and execute one dataframe-script candidate with one correction retry.

    Without a sandbox client the candidate is stubbed to ExecError and no
    completion is consumed. Never raises; at most two completions and two
    sandbox executions happen.
    """
    if sandbox is None:
        return SolverOutcome(candidate=stub_candidate(strategy), exchanges=())
    tag = strategy.value
    exchanges: list[SolverExchange] = []
    prompt = build_script_prompt(question, table, selection, variant=variant)
    completion = gw.complete(ChatRequest.user(model, prompt, seed=seed)).content
    exchanges.append(SolverExchange(tag, prompt, completion))

    def finish(candidate: CandidateSolution) -> SolverOutcome:
        return SolverOutcome(candidate=candidate, exchanges=tuple(exchanges))

    try:
        code = extract_script(completion)
    except (NoCodeFound, NotSingleLine, NoResultAssignment) as exc:
        return finish(CandidateSolution(strategy, "", CandidateStatus.EXTRACTION_FAILED,
                                        error_text=str(exc)))

    outcome = sandbox.run(ScriptJob(code, snapshot_path, timeout_ms, hint))
    if outcome.status == "ok":
        return finish(CandidateSolution(strategy, code, CandidateStatus.OK,
                                        result=_coerce_hint(outcome.answer, hint)))

    # One self-correction round with the captured traceback.
    fix_prompt = _correction_prompt(question, table, selection, [outcome.error_text])
    fix_completion = gw.complete(ChatRequest.user(model, fix_prompt, seed=seed)).content
    exchanges.append(SolverExchange(f"{tag}_correction", fix_prompt, fix_completion))
    first_error = outcome.error_text
    try:
        fixed_code = _validate_script(extract_correction_code(fix_completion))
    except (NoCodeFound, NotSingleLine, NoResultAssignment) as exc:
        status = CandidateStatus.TIMEOUT if outcome.status == "timeout" else CandidateStatus.EXEC_ERROR
        return finish(CandidateSolution(strategy, code, status,
                                        error_text=f"{first_error}; correction unusable: {exc}",
                                        corrected=True))

    fix_outcome = sandbox.run(ScriptJob(fixed_code, snapshot_path, timeout_ms, hint))
    if fix_outcome.status == "ok":
        return finish(CandidateSolution(strategy, fixed_code, CandidateStatus.OK,
                                        result=_coerce_hint(fix_outcome.answer, hint), corrected=True))
    status = CandidateStatus.TIMEOUT if fix_outcome.status == "timeout" else CandidateStatus.EXEC_ERROR
    return finish(CandidateSolution(strategy, fixed_code, status,
                                    error_text=f"{first_error}; after correction: {fix_outcome.error_text}",
                                    corrected=True))
