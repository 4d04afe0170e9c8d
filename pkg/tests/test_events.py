import asyncio
import io
import json

from websockets.asyncio.client import connect

from egressaudit.blacklist import load_attribution, load_blacklist
from egressaudit.capture import CapturedRequest, ResourceHint, SessionEvent, utc_now
from egressaudit.events import EventStreamServer, stream_events

BLACKLIST = load_blacklist(io.StringIO(json.dumps({"youtube": ["youtube.com", "ytimg.com"]})))
ATTRIBUTION = load_attribution(
    io.StringIO("group_name,company,country,service_type\nyoutube,Google,US,SOCIAL_MULTIMEDIA\n")
)


class Recorder:
    def __init__(self):
        self.published = []

    def publish(self, message):
        self.published.append(message)


def request_event(page, url, hint=ResourceHint.SCRIPT):
    return SessionEvent("request", page, CapturedRequest(url, hint, utc_now()))


def scripted_session(page_url):
    return [
        SessionEvent("page", page_url),
        request_event(page_url, page_url, ResourceHint.DOCUMENT),
        request_event(page_url, "https://www.youtube.com/iframe_api"),
        request_event(page_url, f"{page_url}assets/app.js"),
    ]


class TestStreamEvents:
    def test_fixture_page_message_mix(self):
        recorder = Recorder()
        counts = stream_events(
            scripted_session("http://pa.example.it/"), recorder, BLACKLIST, ATTRIBUTION
        )
        kinds = [m["type"] for m in recorder.published]
        assert kinds.count("page") == 1
        assert kinds.count("request") == 3
        assert kinds.count("bad_request") == 1
        assert kinds.count("summary") == 1
        assert counts.requests == 3
        assert counts.bad_requests == 1

        bad = next(m for m in recorder.published if m["type"] == "bad_request")
        assert bad["payload"]["company"] == "Google"
        assert bad["payload"]["country"] == "US"
        assert bad["payload"]["service_type"] == "SOCIAL_MULTIMEDIA"
        assert bad["payload"]["page_url"] == "http://pa.example.it/"

        summary = next(m for m in recorder.published if m["type"] == "summary")
        assert summary["payload"]["bad_requests"] == 1
        assert summary["payload"]["by_company"] == {"Google": 1}

    def test_no_events_no_messages(self):
        recorder = Recorder()
        counts = stream_events([], recorder, BLACKLIST, ATTRIBUTION)
        assert recorder.published == []
        assert counts.requests == 0

    def test_summary_after_every_flagged_event(self):
        page = "http://pa.example.it/"
        events = [SessionEvent("page", page)]
        for i in range(5):
            events.append(request_event(page, f"https://i.ytimg.com/vi/{i}.jpg"))
        recorder = Recorder()
        stream_events(events, recorder, BLACKLIST, ATTRIBUTION)
        summaries = [m["payload"] for m in recorder.published if m["type"] == "summary"]
        assert [s["bad_requests"] for s in summaries] == [1, 2, 3, 4, 5]
        assert summaries[-1]["by_company"] == {"Google": 5}

    def test_flagged_ordering_summary_follows_bad_request(self):
        recorder = Recorder()
        stream_events(scripted_session("http://x.it/"), recorder, BLACKLIST, ATTRIBUTION)
        kinds = [m["type"] for m in recorder.published]
        assert kinds.index("summary") == kinds.index("bad_request") + 1


class TestEventStreamServer:
    def test_publish_without_subscribers_is_silent(self):
        server = EventStreamServer(port=0).start()
        try:
            server.publish({"type": "request", "payload": {}})
        finally:
            server.stop()

    def test_subscriber_receives_line_json(self):
        server = EventStreamServer(port=0).start()
        try:

            async def roundtrip():
                async with connect(server.url) as ws:
                    server.publish({"type": "page", "payload": {"page_url": "http://x.it/"}})
                    raw = await asyncio.wait_for(ws.recv(), timeout=5)
                    assert "\n" not in raw
                    return json.loads(raw)

            message = asyncio.run(roundtrip())
            assert message == {"type": "page", "payload": {"page_url": "http://x.it/"}}
        finally:
            server.stop()

    def test_multiple_subscribers_broadcast(self):
        server = EventStreamServer(port=0).start()
        try:

            async def run():
                async with connect(server.url) as a, connect(server.url) as b:
                    server.publish({"type": "summary", "payload": {"requests": 1}})
                    got_a = json.loads(await asyncio.wait_for(a.recv(), timeout=5))
                    got_b = json.loads(await asyncio.wait_for(b.recv(), timeout=5))
                    return got_a, got_b

            got_a, got_b = asyncio.run(run())
            assert got_a == got_b

        finally:
            server.stop()

    def test_malformed_subscriber_input_ignored(self):
        server = EventStreamServer(port=0).start()
        try:

            async def run():
                async with connect(server.url) as ws:
                    await ws.send("this is not json {")
                    server.publish({"type": "page", "payload": {"page_url": "u"}})
                    return json.loads(await asyncio.wait_for(ws.recv(), timeout=5))

            assert asyncio.run(run())["type"] == "page"
        finally:
            server.stop()
