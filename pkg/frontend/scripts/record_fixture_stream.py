"""Record the dashboard's fixture stream by scripting a browsing session
through the scanner's live-stream machinery, so the committed fixture is
genuine wire format. Rerun after any stream schema change:

    python3 frontend/scripts/record_fixture_stream.py
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

from egressaudit.blacklist import load_attribution, load_blacklist
from egressaudit.capture import CapturedRequest, ResourceHint, SessionEvent
from egressaudit.events import stream_events

REPO = Path(__file__).resolve().parents[2]
FIXTURES = REPO / "tests" / "fixtures"
OUT_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

BASE_TS = datetime(2026, 3, 5, 9, 0, 0, tzinfo=timezone.utc)

PAGE_A = "http://comune-arezzo-nord.example.it/"
PAGE_B = "http://universita-collina.example.it/"
PAGE_C = "http://comune-belmonte.example.it/"

# (page, url, hint); 35 requests, 6 of them blacklisted
SCRIPT = [
    (PAGE_A, PAGE_A, ResourceHint.DOCUMENT),
    (PAGE_A, PAGE_A + "assets/app.js", ResourceHint.SCRIPT),
    (PAGE_A, "https://www.youtube.com/iframe_api", ResourceHint.SCRIPT),
    (PAGE_A, PAGE_A + "assets/style.css", ResourceHint.STYLESHEET),
    (PAGE_A, "https://i.ytimg.com/vi/a1/default.jpg", ResourceHint.IMAGE),
    *[(PAGE_A, f"{PAGE_A}img/photo-{i}.jpg", ResourceHint.IMAGE) for i in range(1, 6)],
    (PAGE_A, "https://fonts.gstatic.com/s/titillium.woff2", ResourceHint.FONT),
    (PAGE_A, PAGE_A + "favicon.ico", ResourceHint.OTHER),
    (PAGE_B, PAGE_B, ResourceHint.DOCUMENT),
    (PAGE_B, "https://sdk.amazonaws.com/js/aws-sdk.min.js", ResourceHint.SCRIPT),
    (PAGE_B, "https://d1.awsstatic.com/logos/aws-logo.png", ResourceHint.IMAGE),
    *[(PAGE_B, f"{PAGE_B}static/mod-{i}.js", ResourceHint.SCRIPT) for i in range(1, 6)],
    *[(PAGE_B, f"{PAGE_B}api/data-{i}", ResourceHint.XHR) for i in range(1, 6)],
    (PAGE_C, PAGE_C, ResourceHint.DOCUMENT),
    (PAGE_C, "https://use.fontawesome.com/releases/v5.15.4/css/all.css", ResourceHint.STYLESHEET),
    *[(PAGE_C, f"{PAGE_C}albo/doc-{i}.pdf", ResourceHint.OTHER) for i in range(1, 9)],
]


class Recorder:
    def __init__(self):
        self.messages = []

    def publish(self, message):
        self.messages.append(message)


def scripted_events():
    events = []
    tick = 0
    current_page = None
    for page, url, hint in SCRIPT:
        if page != current_page:
            events.append(SessionEvent("page", page))
            current_page = page
        observed = BASE_TS + timedelta(milliseconds=137 * tick)
        tick += 1
        events.append(SessionEvent("request", page, CapturedRequest(url, hint, observed)))
    return events


def main():
    with open(FIXTURES / "hosts.json", encoding="utf-8") as fh:
        blacklist = load_blacklist(fh)
    with open(FIXTURES / "attribution.csv", encoding="utf-8") as fh:
        attribution = load_attribution(fh)

    recorder = Recorder()
    stream_events(scripted_events(), recorder, blacklist, attribution)
    messages = recorder.messages
    assert len(messages) == 50, f"fixture drifted: {len(messages)} messages"

    by_type: dict[str, int] = {}
    by_company: dict[str, int] = {}
    by_country: dict[str, int] = {}
    flagged_by_page: dict[str, int] = {}
    for message in messages:
        by_type[message["type"]] = by_type.get(message["type"], 0) + 1
        if message["type"] == "bad_request":
            payload = message["payload"]
            by_company[payload["company"]] = by_company.get(payload["company"], 0) + 1
            by_country[payload["country"]] = by_country.get(payload["country"], 0) + 1
            flagged_by_page[payload["page_url"]] = flagged_by_page.get(payload["page_url"], 0) + 1

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with open(OUT_DIR / "stream-50.ndjson", "w", encoding="utf-8") as fh:
        for message in messages:
            fh.write(json.dumps(message, ensure_ascii=False) + "\n")
    expected = {
        "messages": len(messages),
        "byType": by_type,
        "byCompany": by_company,
        "byCountry": by_country,
        "flaggedByPage": flagged_by_page,
        "lastSummary": [m for m in messages if m["type"] == "summary"][-1]["payload"],
    }
    with open(OUT_DIR / "stream-50.expected.json", "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    print(f"wrote {len(messages)} messages to {OUT_DIR}")


if __name__ == "__main__":
    main()
