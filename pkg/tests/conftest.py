"""Shared fixtures: a local mock QRNG HTTP server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest


class MockQrngServer:
    """Configurable stand-in for the remote QRNG endpoint.

    ``responder`` maps a requested length to the response body (str).  The
    default mimics the real service: deterministic pseudo-bytes wrapped in
    the uint8 JSON schema.  Every request is recorded in ``requests``.
    """

    def __init__(self):
        self.requests: list[int] = []
        self.responder = self.default_responder
        handler = self._make_handler()
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/api"

    @staticmethod
    def default_responder(length: int) -> str:
        data = [(37 * i + 11) % 256 for i in range(length)]
        return json.dumps({"type": "uint8", "length": length, "data": data, "success": True})

    def _make_handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                qs = parse_qs(urlparse(self.path).query)
                length = int(qs.get("length", ["0"])[0])
                server.requests.append(length)
                body = server.responder(length).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):  # keep pytest output clean
                pass

        return Handler

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_qrng():
    server = MockQrngServer()
    yield server
    server.close()
