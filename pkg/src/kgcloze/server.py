"""Minimal HTTP server exposing any scorer over the v1 wire protocol.

Intended for local runs and tests (it lets the CLI's remote mode operate
against the reference scorer); a production deployment would run the
dedicated scoring service instead.
"""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Iterator, Tuple

from .protocol import dispatch
from .scoring import Scorer


def _make_handler(scorer: Scorer):
    class Handler(BaseHTTPRequestHandler):
        def _respond(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 (http.server naming)
            status, payload = dispatch(scorer, "GET", self.path, None)
            self._respond(status, payload)

        def do_POST(self):  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8")) if raw else None
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._respond(400, {"error": "request body must be valid JSON"})
                return
            status, payload = dispatch(scorer, "POST", self.path, body)
            self._respond(status, payload)

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

    return Handler


def start_server(scorer: Scorer, host: str = "127.0.0.1",
                 port: int = 0) -> Tuple[ThreadingHTTPServer, threading.Thread]:
    server = ThreadingHTTPServer((host, port), _make_handler(scorer))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


@contextmanager
def serve_scorer(scorer: Scorer, host: str = "127.0.0.1") -> Iterator[str]:
    """Context manager yielding the base URL of a live scorer server."""
    server, thread = start_server(scorer, host=host)
    try:
        yield f"http://{host}:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join(timeout=5)
        server.server_close()
