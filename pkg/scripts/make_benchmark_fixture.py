#!/usr/bin/env python3
"""Build the 20-question replay benchmark fixture with designed outcomes.

Runs the real pipeline against a scripted responder, recording every
request fingerprint into a cassette, once without a sandbox runner
(script candidates stubbed) and once with it. Afterwards it replays both
modes and asserts the designed accuracy, decision histogram, and
per-candidate statuses, so a drifting prompt or parser fails loudly here
instead of in CI.

Usage: python scripts/make_benchmark_fixture.py
"""

from __future__ import annotations

import json
import shutil
import sys
import threading
from pathlib import Path

from tabqa.config import RunConfig
from tabqa.core import Strategy
from tabqa.gateway import ChatRequest, ChatResponse, Gateway, fingerprint
from tabqa.pipeline import PipelineContext, run_benchmark, run_question, read_questions
from tabqa.retrieval import EmbeddingCache, TrigramEmbedder
from tabqa.script_solver import SandboxClient
from tabqa.tables import load_table

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "benchmark"
SANDBOX_CMD = (sys.executable, "-m", "dfsandbox")

TABLES = {
    "staff": (
        "name,department,age,salary,senior 🔥\n"
        "Ann,HR,30,3000,True\n"
        "Bob,IT,40,5200,True\n"
        "Cid,IT,25,2000,False\n"
        "Dee,Sales,35,2100,False\n"
        "Eve,HR,28,2200,False\n"
        "Fay,IT,45,7000,True\n"
        "Gil,Sales,52,4100,True\n"
        "Hal,Marketing,33,2600,False\n"
    ),
    "sales": (
        "order_id,country,amount,item\n"
        "1,japan,120.5,laptop\n"
        "2,Norway,80.25,phone\n"
        "3,japan,60,tablet\n"
        "4,Brazil,200,laptop\n"
        "5,japan,35.5,mouse\n"
        "6,Norway,99.99,monitor\n"
    ),
    "patents": (
        "title,year,granted\n"
        "Optical communication device,2015,True\n"
        "Neural data compressor,2018,False\n"
        "Communication protocol for drones,2020,True\n"
        "Solar cell coating,2017,True\n"
        "Quantum communication relay,2021,False\n"
    ),
    "survey": (
        "respondent,candidate,age_group,shifted\n"
        "r1,X,18-25,True\n"
        "r2,Y,26-40,False\n"
        "r3,X,26-40,False\n"
        "r4,Z,41-60,True\n"
        "r5,X,18-25,False\n"
        "r6,Y,41-60,False\n"
    ),
}

STAFF_COLS = "name, department, age, salary, senior _hed8d_"
SALES_COLS = "order_id, country, amount, item"
PATENT_COLS = "title, year, granted"
SURVEY_COLS = "respondent, candidate, age_group, shifted"


def sql(code: str) -> str:
    return f"REASONING: straightforward.\nCODE: ```{code}```"


def script(code: str) -> str:
    return f"Checklist answered.\nCode: {code}"


def e2e(answer: str) -> str:
    return f"Looking at the table carefully.\nFinal Answer: {answer}"


# Per-question design. sql_a/sql_b/script_a/script_b are completion
# sequences (second entry = the self-correction round); statuses/cats/
# answers below are the designed outcomes the verifier enforces.
QUESTIONS = [
    dict(
        id="q01", dataset="staff", text="What is the average age of our employees?",
        expected={"type": "number", "value": 36},
        col_select="age", type_deduce="TYPE: Number",
        sql_a=[sql('SELECT AVG("age") FROM temp_table')],
        sql_b=[sql('SELECT SUM("age") * 1.0 / COUNT(*) FROM temp_table')],
        script_a=[script("result = float(df['age'].mean())")],
        script_b=[script("result = float(df['age'].sum() / len(df))")],
        e2e=e2e("36"),
        orch="REASONING: All solutions agree on 36. Type is **Number**.\nANSWER: 1 (Number)",
        category="agreement", correct=True,
    ),
    dict(
        id="q02", dataset="staff", text="Most common department?",
        expected={"type": "category", "value": "IT"},
        col_select=STAFF_COLS, type_deduce="TYPE: String",
        sql_a=[sql('SELECT "department" FROM temp_table GROUP BY "department" ORDER BY COUNT(*) DESC LIMIT 1')],
        sql_b=[sql('SELECT "department" FROM temp_table GROUP BY "department" ORDER BY COUNT("name") DESC LIMIT 1')],
        script_a=[script("result = df['department'].value_counts().idxmax()")],
        script_b=[script("result = df['department'].mode().iloc[0]")],
        e2e=e2e("IT"),
        orch="REASONING: Every solution returns IT. Type is **String**.\nANSWER: 1 (String)",
        category="agreement", correct=True,
    ),
    dict(
        id="q03", dataset="staff", text="Is the highest salary above 6000?",
        expected={"type": "boolean", "value": True},
        col_select=STAFF_COLS, type_deduce="TYPE: Boolean",
        sql_a=[sql("SELECT CASE WHEN EXISTS(SELECT 1 FROM temp_table WHERE \"salary\" > 6000) THEN 'True' ELSE 'False' END")],
        sql_b=[sql("SELECT CASE WHEN MAX(\"salary\") > 6000 THEN 'True' ELSE 'False' END FROM temp_table")],
        script_a=[script("result = bool((df['salary'] > 6000).any())")],
        script_b=[script("result = bool(df['salary'].max() > 6000)")],
        e2e=e2e("True"),
        orch="REASONING: All three agree the value exists. Type is **Boolean**.\nANSWER: 1 (Boolean)",
        category="agreement", correct=True,
    ),
    dict(
        id="q04", dataset="staff", text="Lowest 3 salaries?",
        expected={"type": "list[number]", "value": [2000, 2100, 2200]},
        col_select=STAFF_COLS, type_deduce="TYPE: List[Number]",
        sql_a=[
            sql("SELECT wage FROM temp_table ORDER BY wage ASC LIMIT 3"),
            'SELECT "salary" FROM temp_table ORDER BY "salary" ASC LIMIT 3',
        ],
        sql_b=[sql('SELECT "salary" FROM temp_table ORDER BY "salary" ASC LIMIT 3')],
        script_a=[script("result = df['salary'].nsmallest(3).tolist()")],
        script_b=[script("result = sorted(df['salary'].tolist())[:3]")],
        e2e=e2e("[2000, 2100, 2200]"),
        orch="REASONING: The three lowest salaries match everywhere. Type is **List[Number]**.\nANSWER: 1 (List[Number])",
        category="agreement", correct=True, corrected=["sql_a"],
    ),
    dict(
        id="q05", dataset="staff", text="Which departments have more than one employee?",
        expected={"type": "list[category]", "value": ["HR", "IT", "Sales"]},
        col_select=STAFF_COLS, type_deduce="TYPE: List[String]",
        sql_a=[sql('SELECT "department" FROM temp_table GROUP BY "department" HAVING COUNT(*) > 1')],
        sql_b=[sql('SELECT "department" FROM temp_table GROUP BY "department" HAVING COUNT("name") > 1')],
        script_a=[
            script("result = df['dept'].value_counts()[df['dept'].value_counts() > 1].index.tolist()"),
            "result = df['department'].value_counts()[df['department'].value_counts() > 1].index.tolist()",
        ],
        script_b=[script("result = df['department'].value_counts()[df['department'].value_counts() > 1].index.tolist()")],
        e2e=e2e("['HR', 'IT', 'Sales']"),
        orch="REASONING: Same set of departments in every answer. Type is **List[String]**.\nANSWER: 1 (List[String])",
        category="agreement", correct=True, corrected_full=["script_a"],
    ),
    dict(
        id="q06", dataset="sales", text="How many orders came from japan?",
        expected={"type": "number", "value": 3},
        col_select=SALES_COLS, type_deduce="TYPE: Number",
        sql_a=[sql('SELECT COUNT(*) FROM temp_table WHERE "country" = "japan"')],
        sql_b=[sql('SELECT COALESCE(COUNT(*), 0) FROM temp_table WHERE "country" = "japan"')],
        script_a=[script("result = int((df['country'] == 'japan').sum())")],
        script_b=[script("result = len(df[df['country'] == 'japan'])")],
        e2e=e2e("3"),
        orch="REASONING: All count three japan orders. Type is **Integer**.\nANSWER: 1 (Integer)",
        category="agreement", correct=True,
    ),
    dict(
        id="q07", dataset="sales", text="What is the total amount of all orders?",
        expected={"type": "number", "value": 596.24},
        col_select=SALES_COLS, type_deduce="TYPE: Number",
        sql_a=[sql('SELECT SUM("amount") FROM temp_table')],
        sql_b=[sql('SELECT TOTAL("amount") FROM temp_table')],
        script_a=[script("result = float(df['amount'].sum())")],
        script_b=[script("result = float(df['amount'].astype(float).sum())")],
        e2e=e2e("596.24"),
        orch="REASONING: The sums agree. Type is **Number**.\nANSWER: 1 (Number)",
        category="agreement", correct=True,
    ),
    dict(
        id="q08", dataset="sales", text="Which country has the highest total order amount?",
        expected={"type": "category", "value": "japan"},
        col_select=SALES_COLS, type_deduce="TYPE: String",
        sql_a=[sql('SELECT "country" FROM temp_table GROUP BY "country" ORDER BY SUM("amount") DESC LIMIT 1')],
        sql_b=[sql('SELECT "country" FROM temp_table GROUP BY "country" ORDER BY TOTAL("amount") DESC LIMIT 1')],
        script_a=[script("result = df.groupby('country')['amount'].sum().idxmax()")],
        script_b=[script("result = df.groupby('country')['amount'].sum().sort_values().index[-1]")],
        e2e=e2e("japan"),
        orch="REASONING: japan leads the totals in every solution. Type is **String**.\nANSWER: 1 (String)",
        category="agreement", correct=True,
    ),
    dict(
        id="q09", dataset="sales", text="What is the average amount of japan orders?",
        expected={"type": "number", "value": 72},
        col_select=SALES_COLS, type_deduce="TYPE: Number",
        sql_a=[sql('SELECT AVG("amount") FROM temp_table WHERE "country" = "japan"')],
        sql_b=[sql('SELECT AVG("amount") FROM temp_table')],
        script_a=[script("result = float(df[df['country'] == 'japan']['amount'].mean())")],
        script_b=[script("result = float(df.loc[df['country'] == 'japan', 'amount'].mean())")],
        e2e=e2e("72"),
        orch=("REASONING: Solution 2 averages over all countries, which is incorrect logic for this "
              "question. The others agree on 72. Type is **Number**.\nANSWER: 1 (Number)"),
        category="logical_filtering", correct=True,
    ),
    dict(
        id="q10", dataset="sales", text="Are there more than two orders from Norway?",
        expected={"type": "boolean", "value": False},
        col_select=SALES_COLS, type_deduce="TYPE: Boolean",
        sql_a=[sql("SELECT CASE WHEN (SELECT COUNT(*) FROM temp_table WHERE \"country\" = \"Norway\") > 2 THEN 'True' ELSE 'False' END")],
        sql_b=[sql("SELECT CASE WHEN (SELECT COUNT(*) FROM temp_table WHERE \"country\" = \"Norway\") >= 2 THEN 'True' ELSE 'False' END")],
        script_a=[script("result = bool((df['country'] == 'Norway').sum() > 2)")],
        script_b=[script("result = bool(len(df[df['country'] == 'Norway']) > 2)")],
        e2e=e2e("False"),
        orch=("REASONING: Solution 2 has a flaw, it checks at least two instead of more than two. "
              "Type is **Boolean**.\nANSWER: 1 (Boolean)"),
        category="logical_filtering", correct=True,
    ),
    dict(
        id="q11", dataset="sales", text="List the amounts of the japan orders.",
        expected={"type": "list[number]", "value": [120.5, 60, 35.5]},
        col_select=SALES_COLS, type_deduce="TYPE: List[Number]",
        sql_a=[sql('SELECT "amount" FROM temp_table WHERE "country" = "japan"')],
        sql_b=[sql('SELECT "amount" FROM temp_table ORDER BY "amount" DESC LIMIT 3')],
        script_a=[script("result = df[df['country'] == 'japan']['amount'].tolist()")],
        script_b=[script("result = df.loc[df['country'] == 'japan', 'amount'].tolist()")],
        e2e=e2e("[120.5, 60, 35.5]"),
        orch=("REASONING: Solution 2 applies the wrong aggregation, taking the top amounts overall "
              "instead of filtering by country. Type is **List[Number]**.\nANSWER: 1 (List[Number])"),
        category="logical_filtering", correct=True,
    ),
    dict(
        id="q12", dataset="patents", text="How many patents are granted?",
        expected={"type": "number", "value": 3},
        col_select=PATENT_COLS, type_deduce="TYPE: Number",
        sql_a=[sql('SELECT COUNT(*) FROM temp_table WHERE "granted" = 1')],
        sql_b=[sql('SELECT COALESCE(COUNT(*), 0) FROM temp_table WHERE "granted" = 1')],
        script_a=[script("result = int(df['granted'].sum())")],
        script_b=[script("result = int((df['granted'] == True).sum())")],
        e2e=e2e("['Optical communication device', 'Communication protocol for drones', 'Solar cell coating']"),
        orch=("REASONING: The question asks for a count. The last solution gives the titles instead "
              "of the count, so its format does not fit.\nANSWER: 1 (Number)"),
        category="format_mismatch", correct=True,
    ),
    dict(
        id="q13", dataset="patents", text="Is there a patent related to communication in the title?",
        expected={"type": "boolean", "value": True},
        col_select=PATENT_COLS, type_deduce="TYPE: Boolean",
        sql_a=[sql("SELECT CASE WHEN EXISTS(SELECT 1 FROM temp_table WHERE \"title\" LIKE '%ommunication%') THEN 'True' ELSE 'False' END")],
        sql_b=[sql("SELECT CASE WHEN COUNT(*) > 0 THEN 'True' ELSE 'False' END FROM temp_table WHERE \"title\" LIKE '%ommunication%'")],
        script_a=[script("result = bool(df['title'].str.contains('ommunication').any())")],
        script_b=[script("result = bool(df['title'].str.lower().str.contains('communication').any())")],
        e2e=e2e("Yes"),
        orch=("REASONING: The last solution answered Yes, which is not the required True or False "
              "form for this question.\nANSWER: 1 (Boolean)"),
        category="format_mismatch", correct=True,
    ),
    dict(
        id="q14", dataset="survey", text="Unique candidates preferred by respondents?",
        expected={"type": "list[category]", "value": ["X", "Y", "Z"]},
        col_select=SURVEY_COLS, type_deduce="TYPE: List[String]",
        sql_a=[sql('SELECT DISTINCT "candidate" FROM temp_table')],
        sql_b=[sql('SELECT "candidate" FROM temp_table GROUP BY "candidate"')],
        script_a=[script("result = sorted(df['candidate'].unique().tolist())")],
        script_b=[script("result = df['candidate'].drop_duplicates().tolist()")],
        e2e=e2e("3"),
        orch=("REASONING: The question wants the candidate values, the last solution returned only "
              "how many there are.\nANSWER: 1 (List[String])"),
        category="format_mismatch", correct=True,
    ),
    dict(
        id="q15", dataset="survey", text="How many respondents are in the 26-40 age group?",
        expected={"type": "number", "value": 2},
        col_select=SURVEY_COLS, type_deduce="TYPE: Number",
        sql_a=[sql('SELECT COUNT(*) FROM temp_table WHERE "age_group" = "26-40"')],
        sql_b=[sql('SELECT COUNT(*) FROM temp_table WHERE "age_group" <> "18-25"')],
        script_a=[script("result = int((df['age_group'] == '26-40').sum())")],
        script_b=[script("result = len(df[df['age_group'] == '26-40'])")],
        e2e=e2e("2"),
        orch=("REASONING: Solutions disagree between 2 and 4; several agree on 2 so I return the "
              "lowest number of the correct solution. Type is **Integer**.\nANSWER: 1 (Integer)"),
        category="conflict_resolution", correct=True,
    ),
    dict(
        id="q16", dataset="staff", text="Which department has the highest average salary?",
        expected={"type": "category", "value": "IT"},
        col_select=STAFF_COLS, type_deduce="TYPE: String",
        sql_a=[sql('SELECT "name" FROM temp_table ORDER BY "salary" DESC LIMIT 1')],
        sql_b=[sql('SELECT "department" FROM temp_table GROUP BY "department" ORDER BY AVG("salary") DESC LIMIT 1')],
        script_a=[script("result = df.groupby('department')['salary'].mean().idxmax()")],
        script_b=[script("result = df.groupby('department')['salary'].mean().sort_values().index[-1]")],
        e2e=e2e("IT"),
        orch="The solutions disagree about the department and I cannot determine the right one.",
        category="conflict_resolution", correct=False,
    ),
    dict(
        id="q17", dataset="staff", text="List the ages of the IT employees.",
        expected={"type": "list[number]", "value": [40, 25, 45]},
        col_select=STAFF_COLS, type_deduce="TYPE: List[Number]",
        sql_a=[sql('SELECT "age" FROM temp_table WHERE "department" = "IT"')],
        sql_b=[sql('SELECT "age" FROM temp_table WHERE "department" = "IT" AND "senior _hed8d_" = 1')],
        script_a=[script("result = df[df['department'] == 'IT']['age'].tolist()")],
        script_b=[script("result = df.loc[df['department'] == 'IT', 'age'].tolist()")],
        e2e=e2e("[40, 25, 45]"),
        orch=("REASONING: Solutions 1 and the direct answer include every IT employee, the other "
              "returns only two values. Type is **List[Number]**.\nANSWER: 1 (List[Number])"),
        category="conflict_resolution", correct=True,
    ),
    dict(
        id="q18", dataset="patents", text="Were all communication patents granted?",
        expected={"type": "boolean", "value": False},
        col_select=PATENT_COLS, type_deduce="TYPE: Boolean",
        sql_a=[sql("SELECT CASE WHEN EXISTS(SELECT 1 FROM temp_table WHERE \"title\" LIKE '%ommunication%' AND \"granted\" = 1) THEN 'True' ELSE 'False' END")],
        sql_b=[sql("SELECT CASE WHEN EXISTS(SELECT 1 FROM temp_table WHERE \"title\" LIKE '%ommunication%' AND \"granted\" = 0) THEN 'False' ELSE 'True' END")],
        script_a=[script("result = bool(df[df['title'].str.contains('ommunication')]['granted'].any())")],
        script_b=[script("result = bool(df[df['title'].str.contains('ommunication')]['granted'].iloc[0])")],
        e2e=e2e("True"),
        orch=("REASONING: The majority of solutions found granted communication patents and agree "
              "on True, so I go with the most frequent response. Type is **Boolean**.\nANSWER: 1 (Boolean)"),
        category="conflict_resolution", correct=False,
    ),
    dict(
        id="q19", dataset="sales", text="What is the price difference between the most and least expensive orders?",
        expected={"type": "number", "value": 164.5},
        col_select=SALES_COLS, type_deduce="TYPE: Number",
        sql_a=["This task needs arithmetic over two aggregates and I cannot write it reliably."],
        sql_b=[
            sql("SELECT MAX(price) - MIN(price) FROM temp_table"),
            "SELECT MAX(cost) - MIN(cost) FROM temp_table",
        ],
        script_a=[script("result = float(df['amount'].max() - df['amount'].min())")],
        script_b=[script("result = float(df['amount'].max()) - float(df['amount'].min())")],
        e2e="I am unable to determine this from the table alone.",
        orch=None,
        orch_full="REASONING: Both scripts agree on 164.5. Type is **Number**.\nANSWER: 1 (Number)",
        category="no_valid_candidate", correct=False,
        category_full="agreement", correct_full=True, corrected=["sql_b"],
    ),
    dict(
        id="q20", dataset="survey", text="List respondents who shifted their voting preference.",
        expected={"type": "list[category]", "value": ["r1", "r4"]},
        col_select=SURVEY_COLS, type_deduce="TYPE: List[String]",
        sql_a=[
            sql("SELECT respondent FROM temp_table WHERE shifted_flag = 1"),
            "SELECT respondent FROM temp_table WHERE has_shifted = 1",
        ],
        sql_b=["The boolean semantics of this table are unclear so I will not attempt a query."],
        script_a=[script("result = df[df['shifted']]['respondent'].tolist()")],
        script_b=[script("result = df.loc[df['shifted'], 'respondent'].tolist()")],
        e2e="The respondent list is ambiguous in this rendering.",
        orch=None,
        orch_full="REASONING: Both scripts agree on the same two respondents. Type is **List[String]**.\nANSWER: 1 (List[String])",
        category="no_valid_candidate", correct=False,
        category_full="agreement", correct_full=True, corrected=["sql_a"],
    ),
]


class ScriptedRecorder(Gateway):
    """Resolves prompts against the design table and records fingerprints."""

    def __init__(self):
        self.mode = "primary"
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()

    def _design_for(self, prompt: str) -> dict:
        hits = [q for q in QUESTIONS if q["text"] in prompt]
        if len(hits) != 1:
            raise AssertionError(f"prompt matches {len(hits)} questions: {prompt[:90]!r}")
        return hits[0]

    def _respond(self, req: ChatRequest) -> str:
        prompt = req.messages[-1][1]
        q = self._design_for(prompt)
        model = req.model
        if "Select the columns" in prompt:
            return q["col_select"]
        if "Deduce the answer type" in prompt:
            return q["type_deduce"]
        if "Given the following solutions" in prompt:
            completion = q.get("orch_full", q["orch"]) if self.mode == "full" else q["orch"]
            if completion is None:
                raise AssertionError(f"{q['id']}: unexpected orchestrator call in {self.mode} mode")
            return completion
        if "failed for the task" in prompt:
            kind = "script" if "Traceback" in prompt else "sql"
            role = f"{kind}_{'a' if model == 'codestral-2501' else 'b'}"
            seq = q[role]
            if len(seq) != 2:
                raise AssertionError(f"{q['id']}: unexpected correction for {role}")
            return seq[1]
        if "The task is:" in prompt:
            return q["sql_a" if model == "codestral-2501" else "sql_b"][0]
        if "Pandas DataScientist" in prompt:
            return q["script_a" if model == "codestral-2501" else "script_b"][0]
        if "Analyze the data" in prompt:
            return q["e2e"]
        raise AssertionError(f"unrecognized prompt: {prompt[:90]!r}")

    def complete(self, req: ChatRequest) -> ChatResponse:
        content = self._respond(req)
        fp = fingerprint(req)
        with self._lock:
            if fp in self.entries and self.entries[fp] != content:
                raise AssertionError(f"fingerprint collision with differing content: {fp}")
            self.entries[fp] = content
        return ChatResponse(content=content)


def write_inputs() -> None:
    tables_dir = FIXTURE_DIR / "tables"
    if FIXTURE_DIR.exists():
        shutil.rmtree(FIXTURE_DIR)
    tables_dir.mkdir(parents=True)
    for name, text in TABLES.items():
        (tables_dir / f"{name}.csv").write_text(text, encoding="utf-8")
    with open(FIXTURE_DIR / "questions.jsonl", "w", encoding="utf-8") as fh:
        for q in QUESTIONS:
            fh.write(json.dumps({
                "id": q["id"],
                "dataset_id": q["dataset"],
                "question": q["text"],
                "expected_type": q["expected"]["type"],
                "expected_answer": q["expected"],
            }, ensure_ascii=False) + "\n")


def base_config(mode_full: bool, out_dir: Path) -> RunConfig:
    cfg = RunConfig()
    cfg.mode = "replay"
    cfg.cassette_path = str(FIXTURE_DIR / "cassette.jsonl")
    cfg.sandbox_cmd = SANDBOX_CMD if mode_full else None
    cfg.output_dir = str(out_dir)
    return cfg


def record() -> ScriptedRecorder:
    recorder = ScriptedRecorder()
    tables = {name: load_table(FIXTURE_DIR / "tables" / f"{name}.csv") for name in TABLES}
    entries = read_questions(FIXTURE_DIR / "questions.jsonl")
    for mode_full in (False, True):
        recorder.mode = "full" if mode_full else "primary"
        cfg = base_config(mode_full, FIXTURE_DIR / "_record_out")
        cfg.mode = "live"  # placeholder; the recorder gateway is injected directly
        cfg.cassette_path = None
        ctx = PipelineContext(
            cfg=cfg, gw=recorder, embedder=TrigramEmbedder(), cache=EmbeddingCache(),
            sandbox=SandboxClient(SANDBOX_CMD) if mode_full else None,
        )
        for question, _ in entries:
            run_question(question, tables[question.dataset_id], ctx)
    shutil.rmtree(FIXTURE_DIR / "_record_out", ignore_errors=True)
    return recorder


def write_cassette(recorder: ScriptedRecorder) -> None:
    with open(FIXTURE_DIR / "cassette.jsonl", "w", encoding="utf-8") as fh:
        for fp in sorted(recorder.entries):
            entry = {"fingerprint": fp,
                     "response": {"content": recorder.entries[fp], "finish_reason": "stop", "latency_ms": 0}}
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


EXPECTED = {
    "primary": {
        "correct": 16,
        "total": 20,
        "decisions": {
            "agreement": 8, "logical_filtering": 3, "format_mismatch": 3,
            "conflict_resolution": 4, "no_valid_candidate": 2,
        },
    },
    "full": {
        "correct": 18,
        "total": 20,
        "decisions": {
            "agreement": 10, "logical_filtering": 3, "format_mismatch": 3,
            "conflict_resolution": 4, "no_valid_candidate": 0,
        },
    },
}


def verify(mode: str) -> None:
    from tabqa.pipeline import report_stats

    out_dir = FIXTURE_DIR / f"_verify_{mode}"
    cfg = base_config(mode == "full", out_dir)
    report, traces_path = run_benchmark(FIXTURE_DIR / "tables", FIXTURE_DIR / "questions.jsonl", cfg)
    stats = report_stats(traces_path)
    expected = EXPECTED[mode]
    assert report.total == expected["total"], (mode, report.total)
    assert report.correct == expected["correct"], (mode, report.correct)
    assert stats["decisions"] == expected["decisions"], (mode, stats["decisions"])

    by_id = {}
    from tabqa.pipeline import read_traces

    for trace in read_traces(traces_path):
        by_id[trace.question_id] = trace
    for q in QUESTIONS:
        trace = by_id[q["id"]]
        designed_cat = q["category_full"] if (mode == "full" and "category_full" in q) else q["category"]
        assert trace.decision_category.value == designed_cat, (q["id"], mode, trace.decision_category)
        scripts = [c for c in trace.candidates
                   if c.strategy in (Strategy.SCRIPT_A, Strategy.SCRIPT_B)]
        if mode == "primary":
            assert all(c.error_text == "sandbox runner not configured" for c in scripts), q["id"]
        else:
            assert all(c.ok for c in scripts), (q["id"], [c.error_text for c in scripts])
        corrected_key = "corrected_full" if (mode == "full" and "corrected_full" in q) else "corrected"
        for role in q.get(corrected_key, []) or []:
            cand = next(c for c in trace.candidates if c.strategy.value == role)
            assert cand.corrected, (q["id"], role)
    shutil.rmtree(out_dir, ignore_errors=True)
    print(f"verified {mode}: accuracy {report.correct}/{report.total}, decisions {stats['decisions']}")


def main() -> None:
    texts = [q["text"] for q in QUESTIONS]
    assert len(set(texts)) == len(texts)
    for a in texts:
        assert sum(1 for b in texts if a in b) == 1, f"question text is a substring of another: {a!r}"
    write_inputs()
    recorder = record()
    write_cassette(recorder)
    print(f"cassette entries: {len(recorder.entries)}")
    verify("primary")
    verify("full")
    print("fixture written to", FIXTURE_DIR)


if __name__ == "__main__":
    main()
