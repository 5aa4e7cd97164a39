"""Loopback document server: deterministic asset resolution plus a request log."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

D3_ROUTE = "/vendor/d3.v7.min.js"


class DocServer:
    """Serves one document at / and, in offline mode, the vendored CDN asset."""

    def __init__(self, doc: str, d3_path: Path | None = None):
        self.doc = doc
        self.d3_path = d3_path
        self.requests: list[str] = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                server.requests.append(self.path)
                if self.path == "/":
                    body = server.doc.encode("utf-8")
                    ctype = "text/html; charset=utf-8"
                elif self.path == D3_ROUTE and server.d3_path is not None:
                    body = server.d3_path.read_bytes()
                    ctype = "application/javascript"
                else:
                    self.send_response(404)
                    self.end_headers()
                    return
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address
        return f"http://{host}:{port}/"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
