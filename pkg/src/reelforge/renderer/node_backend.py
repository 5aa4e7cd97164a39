"""Fallback render session: the document runs in a Node subprocess (jsdom with
the virtual-clock harness installed before parse; frames rasterized from the
chart SVG). Used whenever no browser binary is configured."""

from __future__ import annotations

import base64
import json
import shutil
import subprocess
from pathlib import Path

from .frames import RenderError

HOST_DIR = Path(__file__).resolve().parent / "host"
D3_ASSET = Path(__file__).resolve().parent / "assets" / "d3.v7.min.js"

ALLOWED_CDN_ORIGINS = ["https://d3js.org"]


class NodeSession:
    """One live document in a dedicated Node subprocess; strictly sequential."""

    def __init__(self, load_timeout_ms: int = 15_000, node_binary: str | None = None):
        node = node_binary or shutil.which("node")
        if node is None:
            raise RenderError("node binary not found; the fallback backend requires Node.js")
        if not (HOST_DIR / "node_modules").is_dir():
            raise RenderError(
                f"render host dependencies missing; run `npm install` in {HOST_DIR}"
            )
        self._timeout_s = load_timeout_ms / 1000.0
        try:
            self._proc = subprocess.Popen(
                [node, str(HOST_DIR / "render_host.js")],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise RenderError(f"failed to launch render host: {exc}") from exc

    def _rpc(self, timeout_s: float | None = None, **msg) -> dict:
        if self._proc.poll() is not None:
            stderr = self._proc.stderr.read() if self._proc.stderr else ""
            raise RenderError(f"render host exited unexpectedly: {stderr.strip()[:500]}")
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise RenderError(f"render host pipe broken: {exc}") from exc
        line = self._read_line(timeout_s or self._timeout_s)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RenderError(f"bad reply from render host: {line[:200]!r}") from exc
        if not reply.get("ok"):
            raise RenderError(reply.get("error", "render host error"))
        return reply

    def _read_line(self, timeout_s: float) -> str:
        import select

        ready, _, _ = select.select([self._proc.stdout], [], [], timeout_s)
        if not ready:
            raise RenderError(f"render host timed out after {timeout_s:.1f}s")
        line = self._proc.stdout.readline()
        if not line:
            stderr = self._proc.stderr.read() if self._proc.stderr else ""
            raise RenderError(f"render host closed its pipe: {stderr.strip()[:500]}")
        return line

    def load(self, doc: str, offline: bool = True):
        self._rpc(
            cmd="load",
            html=doc,
            offline=offline,
            d3_path=str(D3_ASSET),
            allowed_origins=ALLOWED_CDN_ORIGINS,
        )

    def advance(self, delta_ms: int) -> int:
        return self._rpc(cmd="advance", delta_ms=delta_ms)["fired"]

    def screenshot(self) -> bytes:
        reply = self._rpc(cmd="screenshot")
        return base64.b64decode(reply["png_b64"])

    def probe(self, selector: str, attribute: str) -> str:
        return self._rpc(cmd="probe", selector=selector, attribute=attribute)["value"]

    def report(self) -> dict:
        return self._rpc(cmd="report")

    def network_log(self) -> list[str]:
        return self.report()["network"]

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"cmd": "close"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
