"""Live event stream: classify interactive-session observations on the fly and
publish them to WebSocket subscribers as line-delimited JSON messages."""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from collections import Counter
from typing import Iterable

from websockets.asyncio.server import broadcast, serve

from .blacklist import Attribution, Blacklist, match_url
from .capture import SessionEvent
from .classify import flag_request

log = logging.getLogger(__name__)

DEFAULT_STREAM_PORT = 8765


class EventStreamServer:
    """Local WebSocket endpoint broadcasting one JSON message per line/frame.

    Publishing never blocks on subscribers; with nobody connected, messages
    are dropped silently.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_STREAM_PORT):
        self.host = host
        self.port = port
        self._loop: asyncio.AbstractEventLoop | None = None
        self._server = None
        self._stopped: asyncio.Event | None = None
        self._thread: threading.Thread | None = None
        self._ready = threading.Event()

    async def _handler(self, ws):
        try:
            async for _ in ws:  # subscriber input is ignored, malformed or not
                pass
        except Exception:
            pass

    def _run(self):
        async def main():
            self._stopped = asyncio.Event()
            async with serve(self._handler, self.host, self.port) as server:
                self._server = server
                self.port = server.sockets[0].getsockname()[1]
                self._loop = asyncio.get_running_loop()
                self._ready.set()
                await self._stopped.wait()

        asyncio.run(main())

    def start(self) -> "EventStreamServer":
        self._thread = threading.Thread(target=self._run, name="egressaudit-stream", daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise RuntimeError(f"event stream server failed to bind {self.host}:{self.port}")
        return self

    def publish(self, message: dict):
        if self._loop is None or self._server is None:
            return
        line = json.dumps(message, ensure_ascii=False)

        def _send():
            connections = self._server.connections
            if connections:
                broadcast(connections, line)

        try:
            self._loop.call_soon_threadsafe(_send)
        except RuntimeError:
            pass  # server already stopped

    def stop(self):
        if self._loop is not None and self._stopped is not None:
            try:
                self._loop.call_soon_threadsafe(self._stopped.set)
            except RuntimeError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    @property
    def subscriber_count(self) -> int:
        if self._server is None:
            return 0
        return len(self._server.connections)


def _timestamp(dt) -> str:
    return dt.isoformat(timespec="milliseconds")


class StreamCounts:
    def __init__(self):
        self.pages = 0
        self.requests = 0
        self.bad_requests = 0
        self.by_company: Counter = Counter()
        self.by_country: Counter = Counter()

    def summary_payload(self) -> dict:
        return {
            "pages": self.pages,
            "requests": self.requests,
            "bad_requests": self.bad_requests,
            "by_company": dict(self.by_company),
            "by_country": dict(self.by_country),
        }


def stream_events(
    events: Iterable[SessionEvent],
    endpoint,
    blacklist: Blacklist,
    attribution: dict[str, Attribution],
) -> StreamCounts:
    """Publish a session's events until the source is exhausted (session closed).

    Every captured request is classified on the fly; a summary message with the
    running counts follows every flagged event.
    """
    counts = StreamCounts()
    for event in events:
        if event.kind == "page":
            counts.pages += 1
            endpoint.publish({"type": "page", "payload": {"page_url": event.page_url}})
            continue
        if event.kind != "request" or event.request is None:
            continue
        request = event.request
        counts.requests += 1
        endpoint.publish(
            {
                "type": "request",
                "payload": {
                    "page_url": event.page_url,
                    "request_url": request.request_url,
                    "resource_hint": request.resource_hint.value,
                    "observed_at": _timestamp(request.observed_at),
                },
            }
        )
        match = match_url(request.request_url, blacklist)
        if match is None:
            continue
        bad = flag_request(request, match, attribution)
        counts.bad_requests += 1
        counts.by_company[bad.company] += 1
        counts.by_country[bad.country] += 1
        endpoint.publish(
            {
                "type": "bad_request",
                "payload": {
                    "page_url": event.page_url,
                    "request_url": bad.request_url,
                    "matched_pattern": bad.matched_pattern,
                    "group_name": bad.group_name,
                    "company": bad.company,
                    "country": bad.country,
                    "service_type": bad.service_type.value,
                    "resource_hint": bad.resource_hint.value,
                    "observed_at": _timestamp(bad.observed_at),
                },
            }
        )
        endpoint.publish({"type": "summary", "payload": counts.summary_payload()})
    return counts
