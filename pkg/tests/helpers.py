"""Shared test doubles: scripted gateways, a stub HTTP endpoint, a fake sandbox."""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from tabqa.gateway import ChatRequest, ChatResponse, Gateway


class FakeGateway(Gateway):
    """Answers through a callable; records every request it sees."""

    def __init__(self, responder):
        self.responder = responder
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
        content = self.responder(req)
        return ChatResponse(content=content)


def gateway_for(mapping: dict[str, str], default: str | None = None) -> FakeGateway:
    """Keys are substrings matched against the prompt text, first hit wins."""

    def responder(req: ChatRequest) -> str:
        prompt = req.messages[-1][1]
        for needle, content in mapping.items():
            if needle in prompt:
                return content
        if default is not None:
            return default
        raise AssertionError(f"no scripted response for prompt: {prompt[:120]!r}")

    return FakeGateway(responder)


class StubEndpoint:
    """Minimal OpenAI-compatible HTTP endpoint for gateway integration tests."""

    def __init__(self, behavior):
        # behavior(path, body) -> (status_code, payload_dict)
        self.behavior = behavior
        self.hits = 0
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                stub.hits += 1
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                status, payload = stub.behavior(self.path, body)
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self) -> "StubEndpoint":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()


def chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]}


# A scriptable stand-in for the sandbox runner, driven by magic tokens in the
# submitted code. Written to disk by the fake_runner_cmd fixture.
FAKE_RUNNER_SOURCE = r'''
import json, sys, time

request = json.loads(sys.stdin.read())
code = request["code"]
if "LOOP" in code:
    time.sleep(3600)
if "CRASH" in code:
    sys.exit(3)
if "BOOM" in code:
    response = {"id": request["id"], "status": "error",
                "error_text": "Traceback (most recent call last):\nZeroDivisionError: division by zero",
                "duration_ms": 1}
elif "SELFTIMEOUT" in code:
    response = {"id": request["id"], "status": "timeout", "duration_ms": request["timeout_ms"]}
else:
    response = {"id": request["id"], "status": "ok",
                "result": {"type": "number", "value": 35}, "duration_ms": 1}
sys.stdout.write(json.dumps(response) + "\n")
'''


def fake_runner_cmd(tmp_path) -> tuple[str, ...]:
    path = tmp_path / "fake_runner.py"
    path.write_text(FAKE_RUNNER_SOURCE, encoding="utf-8")
    return (sys.executable, str(path))
