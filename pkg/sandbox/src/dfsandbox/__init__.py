"""Sandboxed single-line dataframe script runner (JSON over stdio)."""

from .runner import UnmappableResult, map_result, run_job

__all__ = ["UnmappableResult", "map_result", "run_job"]
