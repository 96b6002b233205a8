"""Row retrieval: embed rows over the selected columns, rank by cosine.

The built-in embedder hashes character trigrams into a fixed 256-dim space
(a strong lowercased channel plus a faint case-sensitive one), so rankings
are fully deterministic and lexically close texts score high without any
model dependency. An OpenAI-compatible HTTP embedder is optional.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .core import TabqaError
from .gateway import EndpointUnreachable
from .tables import ColumnSelection, TableHandle, cell_text
from .core import Question


class DimMismatch(TabqaError):
    pass


@dataclass(frozen=True)
class RowMatch:
    row_index: int
    score: float


class TrigramEmbedder:
    """Deterministic dependency-free test embedder."""

    provider_id = "trigram-256"
    dim = 256

    _CASE_WEIGHT = 0.25

    def _accumulate(self, vec: np.ndarray, text: str, salt: bytes, weight: float) -> None:
        padded = f"#{text}#"
        for i in range(len(padded) - 2):
            tri = padded[i : i + 3]
            digest = hashlib.blake2b(tri.encode("utf-8"), digest_size=4, salt=salt).digest()
            vec[int.from_bytes(digest, "big") % self.dim] += weight

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            if not text:
                continue  # empty input embeds to the zero vector by convention
            vec = out[row]
            self._accumulate(vec, text.lower(), b"lowr", 1.0)
            self._accumulate(vec, text, b"case", self._CASE_WEIGHT)
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec /= norm
        return out


class HttpEmbedder:
    """OpenAI-compatible /v1/embeddings backend."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, timeout_s: float = 120.0):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.provider_id = f"http:{model}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.endpoint}/v1/embeddings",
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise EndpointUnreachable(f"embedding endpoint failed: {exc}") from exc
        if resp.status_code != 200:
            raise EndpointUnreachable(f"embedding endpoint returned {resp.status_code}")
        try:
            vectors = [item["embedding"] for item in resp.json()["data"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise EndpointUnreachable(f"malformed embedding payload: {exc}") from exc
        if len(vectors) != len(texts):
            raise DimMismatch(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise DimMismatch(f"inconsistent embedding dims: {sorted(dims)}")
        out = np.asarray(vectors, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise DimMismatch("non-finite embedding entries")
        return out


class EmbeddingCache:
    """Cache of row-embedding matrices, keyed by dataset, provider, column set.

    Persists as JSON-lines, one {"key", "vectors"} object per line.
    """

    def __init__(self):
        self._store: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(dataset_id: str, provider_id: str, selected: Sequence[str]) -> str:
        column_hash = hashlib.sha256("\x1f".join(selected).encode("utf-8")).hexdigest()[:16]
        return f"{dataset_id}|{provider_id}|{column_hash}"

    def get_or_compute(self, key: str, compute) -> np.ndarray:
        with self._lock:
            if key in self._store:
                return self._store[key]
        matrix = compute()
        with self._lock:
            return self._store.setdefault(key, matrix)

    def save(self, path) -> None:
        import json

        with self._lock, open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self._store):
                fh.write(json.dumps({"key": key, "vectors": self._store[key].tolist()}) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingCache":
        import json

        cache = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entry = json.loads(line)
                    cache._store[entry["key"]] = np.asarray(entry["vectors"], dtype=np.float64)
        return cache


def row_text(table: TableHandle, selected: Sequence[str], row_index: int) -> str:
    """Serialize one row over the selected columns as ``col=value; ...``."""
    parts = []
    for name in selected:
        j = table.column_index(name)
        parts.append(f"{name}={cell_text(table.rows[row_index][j])}")
    return "; ".join(parts)


def top_k_rows(
    question: Question,
    table: TableHandle,
    selection: ColumnSelection,
    k: int = 3,
    embedder=None,
    cache: EmbeddingCache | None = None,
) -> list[RowMatch]:
    """Top-k rows by cosine similarity to the question text.

    Scores are non-increasing and exact ties resolve to the lower row
    index, so the ranking is reproducible bit-for-bit.
    """
    if k < 1:
        raise TabqaError("k must be >= 1")
    embedder = embedder or TrigramEmbedder()
    texts = [row_text(table, selection.selected, i) for i in range(table.n_rows)]

    def compute() -> np.ndarray:
        return embedder.embed(texts)

    if cache is not None:
        key = EmbeddingCache.key(table.dataset_id, embedder.provider_id, selection.selected)
        row_vectors = cache.get_or_compute(key, compute)
    else:
        row_vectors = compute()

    query_vector = embedder.embed([question.text])[0]
    # Correctly-rounded inner products: exact ties stay exact ties no matter
    # how the platform's BLAS would have ordered the additions.
    scores = [
        math.fsum((row_vectors[i] * query_vector).tolist()) for i in range(table.n_rows)
    ]
    order = sorted(range(table.n_rows), key=lambda i: (-scores[i], i))
    return [RowMatch(row_index=i, score=scores[i]) for i in order[: min(k, table.n_rows)]]
