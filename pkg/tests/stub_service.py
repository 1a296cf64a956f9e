"""Minimal in-process HTTP provider used to exercise the remote client.

Implements the provider wire protocol on a loopback port with hooks for
failure injection: a count of 500s to serve before succeeding, and a request
log for asserting batch shapes and call counts.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from echoscope.providers import hash_unit_vector


class StubState:
    def __init__(self, dim: int):
        self.dim = dim
        self.fail_next = 0
        self.requests: list[tuple[str, dict]] = []
        self.lock = threading.Lock()


def _make_handler(state: StubState):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, code: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._reply(200, {"status": "ok", "dim": state.dim, "models": {"embedding": "stub", "stance": "stub"}})
            else:
                self._reply(404, {"error": "not found"})

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            data = json.loads(self.rfile.read(length)) if length else {}
            with state.lock:
                state.requests.append((self.path, data))
                if state.fail_next > 0:
                    state.fail_next -= 1
                    self._reply(500, {"error": "injected failure"})
                    return
            if self.path == "/embed":
                vecs = [hash_unit_vector(t, state.dim).tolist() for t in data["texts"]]
                self._reply(200, {"embeddings": vecs, "dim": state.dim})
            elif self.path == "/stance":
                labels = []
                for item in data["items"]:
                    body = item["comment"].lstrip()
                    if body.startswith("AGREE:"):
                        labels.append("favor")
                    elif body.startswith("DISAGREE:"):
                        labels.append("against")
                    elif body.startswith("SHRUG:"):
                        labels.append("I could not decide, unsure about this one")
                    elif body.startswith("GARBAGE:"):
                        labels.append("!!!")
                    else:
                        labels.append("none")
                self._reply(200, {"stances": labels})
            else:
                self._reply(404, {"error": "not found"})

    return Handler


class StubServer:
    """Context manager running the stub on an ephemeral loopback port."""

    def __init__(self, dim: int = 8):
        self.state = StubState(dim)
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _make_handler(self.state))
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
        return False
