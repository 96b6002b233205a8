"""Chat-completion access: one live HTTP backend plus deterministic record/replay.

Cassette fingerprints cover the model name and message list only, never
sampling parameters, so a single cassette can serve temperature sweeps.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .core import TabqaError

_ROLES = ("system", "user", "assistant")


class EndpointUnreachable(TabqaError):
    pass


class RateLimited(TabqaError):
    pass


class CassetteMiss(TabqaError):
    pass


class CassetteError(TabqaError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 4096
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise TabqaError("chat request needs at least one message")
        if self.temperature < 0:
            raise TabqaError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise TabqaError("max_tokens must be positive")
        for role, _ in self.messages:
            if role not in _ROLES:
                raise TabqaError(f"unknown message role {role!r}")
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))

    @classmethod
    def user(cls, model: str, prompt: str, **kwargs) -> "ChatRequest":
        return cls(model=model, messages=(("user", prompt),), **kwargs)


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    latency_ms: int = 0


def fingerprint(req: ChatRequest) -> str:
    """Stable hash of model + messages (sampling params excluded)."""
    payload = json.dumps(
        {"model": req.model, "messages": [[r, c] for r, c in req.messages]},
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Gateway:
    """Interface: complete(req) -> ChatResponse."""

    def complete(self, req: ChatRequest) -> ChatResponse:
        raise NotImplementedError


@dataclass
class LiveGateway(Gateway):
    """OpenAI-compatible chat-completions endpoint with bounded retries."""

    endpoint: str
    api_key: str | None = None
    max_attempts: int = 3
    backoff_s: float = 0.5
    request_timeout_s: float = 120.0
    session: requests.Session = field(default_factory=requests.Session, repr=False)

    def complete(self, req: ChatRequest) -> ChatResponse:
        url = self.endpoint.rstrip("/") + "/v1/chat/completions"
        body = {
            "model": req.model,
            "messages": [{"role": r, "content": c} for r, c in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            body["seed"] = req.seed
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: str = ""
        rate_limited = False
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            started = time.monotonic()
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.request_timeout_s)
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            if resp.status_code == 429:
                rate_limited = True
                last_error = f"429 from {url}"
                continue
            if resp.status_code >= 500:
                last_error = f"{resp.status_code} from {url}"
                continue
            if resp.status_code != 200:
                raise EndpointUnreachable(f"{resp.status_code} from {url}: {resp.text[:500]}")
            try:
                data = resp.json()
                choice = data["choices"][0]
                content = choice["message"]["content"]
                finish = choice.get("finish_reason") or "stop"
            except (ValueError, LookupError, TypeError) as exc:
                raise EndpointUnreachable(f"malformed completion payload from {url}: {exc}") from exc
            return ChatResponse(content=content, finish_reason=finish, latency_ms=latency_ms)
        if rate_limited:
            raise RateLimited(f"rate limited after {self.max_attempts} attempts: {last_error}")
        raise EndpointUnreachable(f"no response after {self.max_attempts} attempts: {last_error}")


class ReplayGateway(Gateway):
    """Deterministic lookup of recorded responses by request fingerprint."""

    def __init__(self, cassette_path: str | Path, strict: bool = True):
        self.cassette_path = Path(cassette_path)
        self._responses: dict[str, ChatResponse] = {}
        self._load(strict)

    def _load(self, strict: bool) -> None:
        if not self.cassette_path.exists():
            raise CassetteError(f"cassette not found: {self.cassette_path}")
        with open(self.cassette_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    fp = entry["fingerprint"]
                    resp = entry["response"]
                    response = ChatResponse(
                        content=resp["content"],
                        finish_reason=resp.get("finish_reason", "stop"),
                        latency_ms=int(resp.get("latency_ms", 0)),
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise CassetteError(f"{self.cassette_path}:{line_no}: bad cassette line: {exc}") from exc
                if strict and fp in self._responses:
                    raise CassetteError(f"{self.cassette_path}:{line_no}: duplicate fingerprint {fp}")
                self._responses[fp] = response

    def __len__(self) -> int:
        return len(self._responses)

    def complete(self, req: ChatRequest) -> ChatResponse:
        fp = fingerprint(req)
        try:
            return self._responses[fp]
        except KeyError:
            preview = req.messages[0][1][:120].replace("\n", "\\n")
            raise CassetteMiss(f"no recorded response for {req.model} fingerprint {fp} ({preview}...)") from None


class RecordingGateway(Gateway):
    """Live calls that are also appended to a cassette file."""

    def __init__(self, live: Gateway, cassette_path: str | Path):
        self.live = live
        self.cassette_path = Path(cassette_path)
        self._lock = threading.Lock()
        self._seen: set[str] = set()

    def complete(self, req: ChatRequest) -> ChatResponse:
        response = self.live.complete(req)
        fp = fingerprint(req)
        entry = {
            "fingerprint": fp,
            "response": {
                "content": response.content,
                "finish_reason": response.finish_reason,
                "latency_ms": response.latency_ms,
            },
        }
        with self._lock:
            if fp not in self._seen:
                self._seen.add(fp)
                with open(self.cassette_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return response


def write_cassette(path: str | Path, entries: list[tuple[str, str]]) -> None:
    """Write a cassette of (fingerprint, content) pairs; used by fixture tooling."""
    with open(path, "w", encoding="utf-8") as fh:
        for fp, content in entries:
            entry = {"fingerprint": fp, "response": {"content": content, "finish_reason": "stop", "latency_ms": 0}}
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
