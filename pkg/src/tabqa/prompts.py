"""Prompt template assets plus the fuzzy answer/code extraction helpers.

Model completions put the payload after a marker ("ANSWER:", "Code:",
"Final Answer:") but frequently mangle the marker itself, so extraction
matches markers up to a small edit distance instead of exactly.
"""

from __future__ import annotations

import re
from importlib import resources

from .core import TabqaError

PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

# Only fence-info words ever stripped from a code fence; anything else is code.
_FENCE_LANGS = {"sql", "sqlite", "python", "py", "pandas", "json", "text", "txt", "code"}


class TemplateNotFound(TabqaError):
    pass


class UnboundPlaceholder(TabqaError):
    def __init__(self, names: list[str]):
        super().__init__(f"unbound placeholders: {', '.join(names)}")
        self.names = names


class MarkerNotFound(TabqaError):
    pass


class NoCodeFound(TabqaError):
    pass


def load_template(name: str) -> str:
    path = resources.files("tabqa").joinpath("templates", f"{name}.txt")
    try:
        return path.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise TemplateNotFound(f"no template named {name!r}") from exc


def render_text(template: str, bindings: dict[str, str]) -> str:
    """Substitute every ``{{key}}`` in the template text.

    Raises UnboundPlaceholder when any placeholder is missing a binding or
    the rendered text still contains a literal ``{{`` sequence; a success
    therefore never emits ``{{``.
    """
    wanted = set(PLACEHOLDER_RE.findall(template))
    missing = sorted(wanted - set(bindings))
    if missing:
        raise UnboundPlaceholder(missing)
    rendered = PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], template)
    if "{{" in rendered:
        leftover = sorted(set(PLACEHOLDER_RE.findall(rendered))) or ["<literal braces>"]
        raise UnboundPlaceholder(leftover)
    return rendered


def render_template(name: str, bindings: dict[str, str]) -> str:
    """Substitute every ``{{key}}`` in the named template asset."""
    return render_text(load_template(name), bindings)


def default_tolerance(marker: str) -> int:
    """One edit of slack per 10 marker characters, at least one."""
    return max(1, len(marker) // 10)


def _fold(text: str) -> str:
    # Length-preserving lowercase so match offsets stay valid.
    return "".join(c if len(c.lower()) != 1 else c.lower() for c in text)


def _edit_distance_within(a: str, b: str, limit: int) -> int | None:
    """Levenshtein distance if it is <= limit, else None (banded DP)."""
    if abs(len(a) - len(b)) > limit:
        return None
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        row_min = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            val = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            current.append(val)
            row_min = min(row_min, val)
        if row_min > limit:
            return None
        previous = current
    return previous[-1] if previous[-1] <= limit else None


def find_marker(text: str, marker: str, max_edit_distance: int) -> tuple[int, int] | None:
    """(start, end) of the last case-insensitive approximate occurrence of marker.

    Scans starts right-to-left; at a given start the closest window wins,
    longer windows breaking distance ties. With max_edit_distance=0 this is
    exact last-occurrence search.
    """
    if not marker:
        raise ValueError("marker must be non-empty")
    folded_text = _fold(text)
    folded_marker = _fold(marker)
    m = len(folded_marker)
    lengths = [n for n in range(m + max_edit_distance, max(m - max_edit_distance, 1) - 1, -1)]
    for start in range(len(text) - 1, -1, -1):
        best: tuple[int, int] | None = None  # (distance, end)
        for length in lengths:
            end = start + length
            if end > len(text):
                continue
            dist = _edit_distance_within(folded_text[start:end], folded_marker, max_edit_distance)
            if dist is not None and (best is None or dist < best[0]):
                best = (dist, end)
                if dist == 0:
                    break
        if best is not None:
            return start, best[1]
    return None


def extract_marked_section(completion: str, marker: str, max_edit_distance: int | None = None) -> str:
    """Text after the last approximate occurrence of marker, trimmed."""
    if max_edit_distance is None:
        max_edit_distance = default_tolerance(marker)
    span = find_marker(completion, marker, max_edit_distance)
    if span is None:
        raise MarkerNotFound(f"marker {marker!r} not found within edit distance {max_edit_distance}")
    return completion[span[1]:].strip()


_FENCE_RE = re.compile(r"```(.*?)```", re.DOTALL)


def _strip_fence_lang(content: str) -> str:
    head, sep, rest = content.partition("\n")
    if sep and rest.strip() and head.strip().lower() in _FENCE_LANGS:
        return rest
    return content


def extract_code_block(completion: str) -> str:
    """Code from the last triple-backtick fence, else after the last "Code:" marker."""
    fences = _FENCE_RE.findall(completion)
    if fences:
        code = _strip_fence_lang(fences[-1]).strip()
        if code:
            return code
        raise NoCodeFound("last code fence is empty")
    try:
        code = extract_marked_section(completion, "Code:", 1)
    except MarkerNotFound:
        raise NoCodeFound("no code fence and no 'Code:' marker") from None
    if not code:
        raise NoCodeFound("'Code:' marker carries no code")
    return code
