"""Multi-candidate LLM pipeline for question answering over tables."""

from .core import (
    AnswerType,
    CandidateSolution,
    CandidateStatus,
    DecisionCategory,
    MalformedAnswer,
    PipelineTrace,
    Question,
    Strategy,
    TypedAnswer,
    parse_answer,
    serialize_answer,
)
from .scoring import ScoreReport, answers_equal, score_run, truncate2
from .tables import TableHandle, load_table, sanitize_columns

__all__ = [
    "AnswerType",
    "CandidateSolution",
    "CandidateStatus",
    "DecisionCategory",
    "MalformedAnswer",
    "PipelineTrace",
    "Question",
    "ScoreReport",
    "Strategy",
    "TableHandle",
    "TypedAnswer",
    "answers_equal",
    "load_table",
    "parse_answer",
    "sanitize_columns",
    "score_run",
    "serialize_answer",
    "truncate2",
]

__version__ = "0.1.0"
