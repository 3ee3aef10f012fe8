from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from lacuna.corpus import Document

GOLDEN = Path(__file__).parent / "golden"

TOY_TEXTS = [
    "ina szarru illik ana bitim",
    "szarru ina bitim wasib",
    "ana awilim szarru iqbi",
    "ina bitim awilum wasib",
    "awilum ana szarru illik",
]


@pytest.fixture
def toy_corpus() -> list[Document]:
    return [Document.from_words(f"t{i}", "Akkadian", t.split()) for i, t in enumerate(TOY_TEXTS)]


class MockChatServer:
    """Chat-completion endpoint that plays back a script of responses.

    Each script item is ``(status, body)``; ``body`` may be a dict (sent as
    JSON), a string (sent raw) or ``None`` to echo ``default_reply``.  Once
    the script is empty, ``respond_fn(body)`` may return a ``(status, body)``
    override; otherwise the request gets ``default_reply``.
    """

    def __init__(self) -> None:
        self.script: list[tuple[int, object]] = []
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.default_reply = "WORDS: x"
        self.reply_fn = None
        self.respond_fn = None
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                with server._lock:
                    body = json.loads(raw)
                    server.requests.append(body)
                    server.headers.append(dict(self.headers))
                    if server.script:
                        status, payload = server.script.pop(0)
                    else:
                        status, payload = (server.respond_fn and server.respond_fn(body)) or (200, None)
                if payload is None:
                    content = server.reply_fn(body) if server.reply_fn else server.default_reply
                    payload = {"choices": [{"message": {"role": "assistant", "content": content}}]}
                data = payload if isinstance(payload, str) else json.dumps(payload)
                data = data.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.01}, daemon=True)
        self.thread.start()

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def chat_server():
    server = MockChatServer()
    yield server
    server.close()


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
