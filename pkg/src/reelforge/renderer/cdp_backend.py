"""Render session over the remote-debugging protocol of a real headless browser.

The browser binary path is configuration; the document is served from a
loopback server so asset resolution is deterministic and observable. The
virtual-clock harness is installed via the protocol's evaluate-on-new-document
mechanism, and the protocol's virtual-time budget is advanced in lockstep as
defense-in-depth against wall-clock CSS effects."""

from __future__ import annotations

import base64
import json
import subprocess
import time
from pathlib import Path

import httpx
from websockets.sync.client import connect as ws_connect

from .frames import RenderError
from .server import D3_ROUTE, DocServer

HOST_DIR = Path(__file__).resolve().parent / "host"
D3_ASSET = Path(__file__).resolve().parent / "assets" / "d3.v7.min.js"

HARNESS_GLOBAL = "__reelclock__"

BROWSER_FLAGS = [
    "--headless=new",
    "--remote-debugging-port=0",
    "--no-first-run",
    "--no-sandbox",
    "--disable-gpu",
    "--hide-scrollbars",
    "--window-size=1280,720",
    "--force-device-scale-factor=1",
]


def _offline_rewrite(doc: str, base_url: str) -> str:
    """Point allowed-CDN script tags at the loopback vendored copy."""
    import re

    return re.sub(
        r'src="https://d3js\.org/[^"]*"',
        f'src="{base_url.rstrip("/")}{D3_ROUTE}"',
        doc,
    )


class CdpConnection:
    """Minimal command/event framing over one protocol websocket."""

    def __init__(self, ws_url: str, timeout_s: float = 30.0):
        self._ws = ws_connect(ws_url, max_size=64 * 1024 * 1024, open_timeout=timeout_s)
        self._next_id = 1
        self._timeout_s = timeout_s
        self.events: list[dict] = []
        self._session_id: str | None = None

    def attach(self, session_id: str):
        self._session_id = session_id

    def call(self, method: str, params: dict | None = None, timeout_s: float | None = None) -> dict:
        msg_id = self._next_id
        self._next_id += 1
        msg = {"id": msg_id, "method": method, "params": params or {}}
        if self._session_id:
            msg["sessionId"] = self._session_id
        self._ws.send(json.dumps(msg))
        deadline = time.monotonic() + (timeout_s or self._timeout_s)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RenderError(f"protocol call {method} timed out")
            reply = json.loads(self._ws.recv(timeout=remaining))
            if reply.get("id") == msg_id:
                if "error" in reply:
                    raise RenderError(f"{method}: {reply['error'].get('message')}")
                return reply.get("result", {})
            if "method" in reply:
                self.events.append(reply)

    def wait_event(self, method: str, timeout_s: float) -> dict:
        for ev in self.events:
            if ev["method"] == method:
                return ev
        deadline = time.monotonic() + timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RenderError(f"timed out waiting for {method}")
            try:
                reply = json.loads(self._ws.recv(timeout=remaining))
            except TimeoutError:
                raise RenderError(f"timed out waiting for {method}")
            if "method" in reply:
                self.events.append(reply)
                if reply["method"] == method:
                    return reply

    def close(self):
        self._ws.close()


class CdpSession:
    """One render session owned by exactly one worker at a time."""

    def __init__(self, browser_binary: str, load_timeout_ms: int = 15_000,
                 debugger_url: str | None = None):
        self._timeout_s = load_timeout_ms / 1000.0
        self._proc = None
        self._server: DocServer | None = None
        self._conn: CdpConnection | None = None
        self._harness_source = (HOST_DIR / "harness.js").read_text(encoding="utf-8")
        if debugger_url is None:
            debugger_url = self._launch(browser_binary)
        ws_url = self._websocket_url(debugger_url)
        self._conn = CdpConnection(ws_url, timeout_s=self._timeout_s)

    def _launch(self, browser_binary: str) -> str:
        import shutil
        import tempfile

        if shutil.which(browser_binary) is None and not Path(browser_binary).is_file():
            raise RenderError(f"browser binary not found: {browser_binary}")
        self._profile_dir = tempfile.mkdtemp(prefix="reelforge-profile-")
        try:
            self._proc = subprocess.Popen(
                [browser_binary, *BROWSER_FLAGS, f"--user-data-dir={self._profile_dir}"],
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise RenderError(f"browser launch failed: {exc}") from exc
        # the browser prints "DevTools listening on ws://..." to stderr
        deadline = time.monotonic() + self._timeout_s
        while time.monotonic() < deadline:
            line = self._proc.stderr.readline()
            if "DevTools listening on" in line:
                return line.split("DevTools listening on", 1)[1].strip()
            if self._proc.poll() is not None:
                break
        raise RenderError("browser did not report a debugging endpoint")

    @staticmethod
    def _websocket_url(debugger_url: str) -> str:
        if debugger_url.startswith("ws://") or debugger_url.startswith("wss://"):
            return debugger_url
        resp = httpx.get(debugger_url.rstrip("/") + "/json/version", timeout=10.0)
        return resp.json()["webSocketDebuggerUrl"]

    def load(self, doc: str, offline: bool = True):
        conn = self._conn
        target = conn.call("Target.createTarget", {"url": "about:blank"})
        attach = conn.call(
            "Target.attachToTarget", {"targetId": target["targetId"], "flatten": True}
        )
        conn.attach(attach["sessionId"])
        conn.call("Page.enable")
        conn.call("Network.enable")
        conn.call("Runtime.enable")
        conn.call(
            "Page.addScriptToEvaluateOnNewDocument", {"source": self._harness_source}
        )
        # freeze virtual time until the first explicit advance
        conn.call("Emulation.setVirtualTimePolicy", {"policy": "pause"})

        self._server = DocServer(doc="", d3_path=D3_ASSET if offline else None).start()
        self._server.doc = _offline_rewrite(doc, self._server.url) if offline else doc

        conn.call("Page.navigate", {"url": self._server.url})
        conn.wait_event("Page.loadEventFired", self._timeout_s)

        errors = [
            ev for ev in conn.events if ev["method"] == "Runtime.exceptionThrown"
        ]
        if errors:
            detail = errors[0]["params"]["exceptionDetails"]
            raise RenderError(f"document script threw during load: {detail.get('text')}")

    def advance(self, delta_ms: int) -> int:
        conn = self._conn
        result = conn.call(
            "Runtime.evaluate",
            {"expression": f"window.{HARNESS_GLOBAL}.advance({int(delta_ms)})", "returnByValue": True},
        )
        fired = result.get("result", {}).get("value", 0)
        conn.call(
            "Emulation.setVirtualTimePolicy",
            {"policy": "pauseIfNetworkFetchesPending", "budget": int(delta_ms)},
        )
        conn.wait_event("Emulation.virtualTimeBudgetExpired", self._timeout_s)
        conn.events = [e for e in conn.events if e["method"] != "Emulation.virtualTimeBudgetExpired"]
        # force a style/layout flush before capture
        conn.call(
            "Runtime.evaluate",
            {"expression": "document.body && document.body.getBoundingClientRect().width"},
        )
        return int(fired)

    def screenshot(self) -> bytes:
        result = self._conn.call(
            "Page.captureScreenshot", {"format": "png", "fromSurface": True}
        )
        return base64.b64decode(result["data"])

    def probe(self, selector: str, attribute: str) -> str:
        expr = (
            "(() => { const el = document.querySelector(%s);"
            " if (!el) return {err: 'no match'};"
            " if (!el.hasAttribute(%s)) return {err: 'attribute absent'};"
            " return {value: el.getAttribute(%s)}; })()"
            % (json.dumps(selector), json.dumps(attribute), json.dumps(attribute))
        )
        result = self._conn.call(
            "Runtime.evaluate", {"expression": expr, "returnByValue": True}
        )
        value = result.get("result", {}).get("value", {})
        if "err" in value:
            raise RenderError(f"{value['err']}: {selector}[{attribute}]")
        return value["value"]

    def report(self) -> dict:
        result = self._conn.call(
            "Runtime.evaluate",
            {"expression": f"window.{HARNESS_GLOBAL}.report()", "returnByValue": True},
        )
        return {"report": result.get("result", {}).get("value"), "network": self.network_log()}

    def network_log(self) -> list[str]:
        return [
            ev["params"]["request"]["url"]
            for ev in self._conn.events
            if ev["method"] == "Network.requestWillBeSent"
        ]

    def close(self):
        if self._conn is not None:
            try:
                self._conn.close()
            except Exception:
                pass
        if self._server is not None:
            self._server.stop()
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
