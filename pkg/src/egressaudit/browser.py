"""Browser capture backend: instruments a Chromium-family browser over the
Chrome debugging wire protocol and records every outgoing request.

The backend either launches a local browser binary or attaches to an already
running debug endpoint (``host:port``), so a browser started elsewhere with
``--remote-debugging-port`` works too.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import shutil
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass

import requests
from websockets.asyncio.client import connect

from .capture import (
    BackendKind,
    CaptureOutcome,
    CaptureResult,
    CapturedRequest,
    DEFAULT_NAV_TIMEOUT_MS,
    DEFAULT_SETTLE_TIMEOUT_MS,
    ResourceHint,
    SETTLE_QUIET_MS,
    SessionEvent,
    utc_now,
)

log = logging.getLogger(__name__)

BROWSER_ENV_VAR = "EGRESSAUDIT_BROWSER"
DEBUG_PORT_ENV_VAR = "EGRESSAUDIT_DEBUG_PORT"
CAPTURE_GRACE_MS = 5_000

BROWSER_CANDIDATES = (
    "chromium",
    "chromium-browser",
    "google-chrome",
    "google-chrome-stable",
    "chrome",
    "brave-browser",
    "microsoft-edge",
)

# CDP Network.requestWillBeSent resource types -> our hints
_CDP_HINTS = {
    "Document": ResourceHint.DOCUMENT,
    "Stylesheet": ResourceHint.STYLESHEET,
    "Image": ResourceHint.IMAGE,
    "Media": ResourceHint.MEDIA,
    "Font": ResourceHint.FONT,
    "Script": ResourceHint.SCRIPT,
    "XHR": ResourceHint.XHR,
    "Fetch": ResourceHint.XHR,
}


class BrowserError(Exception):
    """Browser could not be found, launched, or attached to."""


def find_browser(binary: str | None = None) -> str:
    """Resolve the browser binary from an explicit path, the env var, or PATH."""
    for candidate in (binary, os.environ.get(BROWSER_ENV_VAR)):
        if candidate:
            resolved = shutil.which(candidate) or (candidate if os.path.exists(candidate) else None)
            if resolved:
                return resolved
            raise BrowserError(f"browser binary {candidate!r} not found")
    for name in BROWSER_CANDIDATES:
        resolved = shutil.which(name)
        if resolved:
            return resolved
    raise BrowserError(
        "no Chromium-family browser found; install one, set "
        f"{BROWSER_ENV_VAR}, or pass --browser-binary"
    )


def browser_available(binary: str | None = None) -> bool:
    try:
        find_browser(binary)
        return True
    except BrowserError:
        return False


@dataclass
class _Target:
    target_id: str
    ws_url: str


class _CdpSession:
    """One page's debugging connection: request/response calls plus an event queue."""

    def __init__(self, ws):
        self._ws = ws
        self._next_id = 0
        self._pending: dict[int, asyncio.Future] = {}
        self.events: asyncio.Queue = asyncio.Queue()
        self._reader = asyncio.ensure_future(self._read_loop())

    async def _read_loop(self):
        try:
            async for raw in self._ws:
                message = json.loads(raw)
                if "id" in message:
                    future = self._pending.pop(message["id"], None)
                    if future is not None and not future.done():
                        future.set_result(message)
                else:
                    await self.events.put(message)
        except Exception as exc:
            for future in self._pending.values():
                if not future.done():
                    future.set_exception(ConnectionError(f"debug connection lost: {exc}"))
            self._pending.clear()

    async def call(self, method: str, params: dict | None = None, timeout: float = 10.0) -> dict:
        self._next_id += 1
        call_id = self._next_id
        future = asyncio.get_running_loop().create_future()
        self._pending[call_id] = future
        await self._ws.send(json.dumps({"id": call_id, "method": method, "params": params or {}}))
        message = await asyncio.wait_for(future, timeout)
        if "error" in message:
            raise ConnectionError(f"{method} failed: {message['error'].get('message')}")
        return message.get("result", {})

    async def close(self):
        self._reader.cancel()
        await self._ws.close()


class BrowserBackend:
    """Capture backend speaking the Chrome debugging wire protocol."""

    kind = BackendKind.BROWSER

    def __init__(
        self,
        binary: str | None = None,
        attach: str | None = None,
        headless: bool = True,
        debug_port: int | None = None,
        launch_timeout_s: float = 20.0,
    ):
        self._process = None
        self._profile_dir = None
        if attach:
            host, _, port = attach.partition(":")
            self._endpoint = (host or "127.0.0.1", int(port))
        else:
            if debug_port is None:
                debug_port = int(os.environ.get(DEBUG_PORT_ENV_VAR, "0"))
            self._endpoint = self._launch(
                find_browser(binary), headless, debug_port, launch_timeout_s
            )

    def _launch(self, binary: str, headless: bool, debug_port: int, launch_timeout_s: float):
        self._profile_dir = tempfile.mkdtemp(prefix="egressaudit-profile-")
        args = [
            binary,
            f"--remote-debugging-port={debug_port}",
            f"--user-data-dir={self._profile_dir}",
            "--no-first-run",
            "--no-default-browser-check",
            "--disable-background-networking",
            "--no-sandbox",
            "--disable-gpu",
        ]
        if headless:
            args.append("--headless=new")
        args.append("about:blank")
        try:
            self._process = subprocess.Popen(
                args, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL
            )
        except OSError as exc:
            raise BrowserError(f"failed to launch {binary}: {exc}") from exc

        port_file = os.path.join(self._profile_dir, "DevToolsActivePort")
        deadline = time.monotonic() + launch_timeout_s
        while time.monotonic() < deadline:
            if self._process.poll() is not None:
                raise BrowserError(f"browser exited during startup (code {self._process.returncode})")
            if os.path.exists(port_file):
                try:
                    port = int(open(port_file).readline().strip())
                    return ("127.0.0.1", port)
                except (OSError, ValueError):
                    pass
            time.sleep(0.05)
        raise BrowserError(f"browser did not open a debug port within {launch_timeout_s}s")

    def _http_base(self) -> str:
        host, port = self._endpoint
        return f"http://{host}:{port}"

    def _new_target(self) -> _Target:
        # Modern Chrome requires PUT for /json/new; older builds (and simpler
        # debug servers) accept only GET.
        last_error: Exception | None = None
        for method in ("PUT", "GET"):
            try:
                response = requests.request(method, f"{self._http_base()}/json/new", timeout=10)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code == 200:
                info = response.json()
                return _Target(info["id"], info["webSocketDebuggerUrl"])
            last_error = BrowserError(f"/json/new returned HTTP {response.status_code}")
        raise BrowserError(f"could not create a page target: {last_error}")

    def capture_page(
        self,
        url: str,
        nav_timeout_ms: int = DEFAULT_NAV_TIMEOUT_MS,
        settle_timeout_ms: int = DEFAULT_SETTLE_TIMEOUT_MS,
    ) -> CaptureResult:
        started = time.monotonic()
        total_budget = (nav_timeout_ms + settle_timeout_ms + CAPTURE_GRACE_MS) / 1000.0

        def done(outcome, reqs, error=None):
            return CaptureResult(
                target_url=url,
                outcome=outcome,
                requests=reqs if outcome is CaptureOutcome.OK else [],
                error_message=error,
                backend=BackendKind.BROWSER,
                duration_ms=int((time.monotonic() - started) * 1000),
            )

        try:
            outcome, reqs, error = asyncio.run(
                asyncio.wait_for(
                    self._capture_async(url, nav_timeout_ms, settle_timeout_ms),
                    timeout=total_budget,
                )
            )
            return done(outcome, reqs, error)
        except asyncio.TimeoutError:
            return done(CaptureOutcome.ERROR, [], f"capture exceeded {int(total_budget * 1000)} ms budget")
        except Exception as exc:
            return done(CaptureOutcome.ERROR, [], str(exc) or repr(exc))

    async def _capture_async(self, url: str, nav_timeout_ms: int, settle_timeout_ms: int):
        target = self._new_target()
        async with connect(target.ws_url, max_size=32 * 1024 * 1024) as ws:
            session = _CdpSession(ws)
            collected: list[CapturedRequest] = []
            last_ts = [utc_now()]
            main_frame: list[str | None] = [None]

            def on_event(message) -> str | None:
                method = message.get("method")
                params = message.get("params", {})
                if method == "Network.requestWillBeSent":
                    hint = _CDP_HINTS.get(params.get("type", ""), ResourceHint.OTHER)
                    if (
                        hint is ResourceHint.DOCUMENT
                        and main_frame[0]
                        and params.get("frameId") not in (None, main_frame[0])
                    ):
                        hint = ResourceHint.FRAME
                    ts = max(last_ts[0], utc_now())
                    last_ts[0] = ts
                    collected.append(
                        CapturedRequest(params.get("request", {}).get("url", ""), hint, ts)
                    )
                    return "request"
                if method == "Page.loadEventFired":
                    return "load"
                return None

            try:
                await session.call("Network.enable")
                await session.call("Page.enable")
                try:
                    navigation = await session.call(
                        "Page.navigate", {"url": url}, timeout=nav_timeout_ms / 1000.0
                    )
                except asyncio.TimeoutError:
                    return (
                        CaptureOutcome.ERROR,
                        [],
                        f"navigation timeout after {nav_timeout_ms} ms",
                    )
                main_frame[0] = navigation.get("frameId")
                error_text = navigation.get("errorText")
                if error_text:
                    return CaptureOutcome.ERROR, [], error_text

                nav_deadline = time.monotonic() + nav_timeout_ms / 1000.0
                loaded = False
                while not loaded:
                    remaining = nav_deadline - time.monotonic()
                    if remaining <= 0:
                        return (
                            CaptureOutcome.ERROR,
                            [],
                            f"navigation timeout after {nav_timeout_ms} ms",
                        )
                    try:
                        message = await asyncio.wait_for(session.events.get(), remaining)
                    except asyncio.TimeoutError:
                        continue
                    loaded = on_event(message) == "load"

                # post-load settle: keep listening until a quiet gap or the budget ends
                settle_deadline = time.monotonic() + settle_timeout_ms / 1000.0
                quiet_deadline = time.monotonic() + SETTLE_QUIET_MS / 1000.0
                while True:
                    remaining = min(settle_deadline, quiet_deadline) - time.monotonic()
                    if remaining <= 0:
                        break
                    try:
                        message = await asyncio.wait_for(session.events.get(), remaining)
                    except asyncio.TimeoutError:
                        continue
                    if on_event(message) == "request":
                        quiet_deadline = time.monotonic() + SETTLE_QUIET_MS / 1000.0

                return CaptureOutcome.OK, collected, None
            finally:
                try:
                    await session.call("Page.close", timeout=2.0)
                except Exception:
                    pass
                await session.close()

    def open_interactive_session(self, event_sink) -> "SessionHandle":
        """Open a page for free navigation; forward every observation to event_sink.

        The sink is called from the session's own thread with SessionEvent values,
        in observation order.
        """
        return SessionHandle(self, event_sink)

    def close(self):
        if self._process is not None:
            self._process.terminate()
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._process.kill()
            self._process = None
        if self._profile_dir:
            shutil.rmtree(self._profile_dir, ignore_errors=True)
            self._profile_dir = None


class SessionHandle:
    """A live interactive capture session; close() ends it."""

    def __init__(self, backend: BrowserBackend, event_sink, open_timeout_s: float = 15.0):
        self._backend = backend
        self._sink = event_sink
        self._stop = threading.Event()
        self._started = threading.Event()
        self._error: Exception | None = None
        self._thread = threading.Thread(target=self._run, name="egressaudit-session", daemon=True)
        self._thread.start()
        self._started.wait(timeout=open_timeout_s)
        if self._error is not None:
            raise BrowserError(f"could not open interactive session: {self._error}")
        if not self._started.is_set():
            self._stop.set()
            raise BrowserError("interactive session did not come up; is the browser reachable?")

    def _run(self):
        try:
            asyncio.run(self._session_async())
        except Exception as exc:
            self._error = exc
            log.error("interactive session ended with error: %s", exc)
        finally:
            self._started.set()

    async def _session_async(self):
        target = self._backend._new_target()
        async with connect(target.ws_url, max_size=32 * 1024 * 1024) as ws:
            session = _CdpSession(ws)
            await session.call("Network.enable")
            await session.call("Page.enable")
            self._started.set()
            page_url = "about:blank"
            last_ts = utc_now()
            try:
                while not self._stop.is_set():
                    try:
                        message = await asyncio.wait_for(session.events.get(), 0.2)
                    except asyncio.TimeoutError:
                        continue
                    method = message.get("method")
                    params = message.get("params", {})
                    if method == "Page.frameNavigated" and "parentId" not in params.get("frame", {}):
                        page_url = params["frame"].get("url", page_url)
                        self._emit(SessionEvent("page", page_url))
                    elif method == "Network.requestWillBeSent":
                        ts = max(last_ts, utc_now())
                        last_ts = ts
                        request = CapturedRequest(
                            params.get("request", {}).get("url", ""),
                            _CDP_HINTS.get(params.get("type", ""), ResourceHint.OTHER),
                            ts,
                        )
                        self._emit(SessionEvent("request", page_url, request))
            finally:
                try:
                    await session.call("Page.close", timeout=2.0)
                except Exception:
                    pass
                await session.close()

    def _emit(self, event: SessionEvent):
        try:
            self._sink(event)
        except Exception:
            log.exception("event sink raised; event dropped")

    def close(self, timeout: float = 10.0):
        self._stop.set()
        self._thread.join(timeout=timeout)
