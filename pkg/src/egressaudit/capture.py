"""Page-load capture: enumerate the HTTP requests a target URL triggers.

Two interchangeable backends exist: the CDP-instrumented browser backend in
`browser.py` and the static backend here, which fetches only the document and
enumerates the resource URLs embedded in its HTML.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from html.parser import HTMLParser
from urllib.parse import urljoin, urlsplit

import requests

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "egressaudit/0.1.0 (+non-EEA transfer audit)"
DEFAULT_NAV_TIMEOUT_MS = 30_000
DEFAULT_SETTLE_TIMEOUT_MS = 3_000
SETTLE_QUIET_MS = 500
MAX_REDIRECTS = 5


class ResourceHint(str, Enum):
    DOCUMENT = "DOCUMENT"
    SCRIPT = "SCRIPT"
    STYLESHEET = "STYLESHEET"
    IMAGE = "IMAGE"
    FONT = "FONT"
    MEDIA = "MEDIA"
    FRAME = "FRAME"
    XHR = "XHR"
    OTHER = "OTHER"


class CaptureOutcome(str, Enum):
    OK = "OK"
    ERROR = "ERROR"


class BackendKind(str, Enum):
    BROWSER = "BROWSER"
    STATIC = "STATIC"


@dataclass(frozen=True)
class CapturedRequest:
    request_url: str
    resource_hint: ResourceHint
    observed_at: datetime


@dataclass(frozen=True)
class CaptureResult:
    target_url: str
    outcome: CaptureOutcome
    requests: list[CapturedRequest]
    error_message: str | None
    backend: BackendKind
    duration_ms: int


@dataclass(frozen=True)
class SessionEvent:
    """One observation from an interactive capture session."""

    kind: str  # "page" or "request"
    page_url: str
    request: CapturedRequest | None = None


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


_CSS_URL_RE = re.compile(r"""url\(\s*['"]?([^'")\s]+)['"]?\s*\)""", re.IGNORECASE)
_SKIP_SCHEMES = ("data:", "javascript:", "about:", "blob:", "mailto:", "#")


class _ResourceCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.found: list[tuple[str, ResourceHint]] = []
        self._in_style = False
        self._style_text: list[str] = []

    def _add(self, value: str | None, hint: ResourceHint):
        if value:
            self.found.append((value.strip(), hint))

    def handle_starttag(self, tag, attrs):
        a = dict(attrs)
        if tag == "script":
            self._add(a.get("src"), ResourceHint.SCRIPT)
        elif tag == "link":
            rel = (a.get("rel") or "").lower()
            hint = ResourceHint.STYLESHEET if "stylesheet" in rel.split() else ResourceHint.OTHER
            self._add(a.get("href"), hint)
        elif tag == "img":
            self._add(a.get("src"), ResourceHint.IMAGE)
            for candidate in _parse_srcset(a.get("srcset") or ""):
                self._add(candidate, ResourceHint.IMAGE)
        elif tag in ("iframe", "frame"):
            self._add(a.get("src"), ResourceHint.FRAME)
        elif tag in ("source", "audio", "video"):
            self._add(a.get("src"), ResourceHint.MEDIA)
        elif tag == "style":
            self._in_style = True
        style_attr = a.get("style")
        if style_attr:
            for ref in _CSS_URL_RE.findall(style_attr):
                self._add(ref, ResourceHint.OTHER)

    def handle_data(self, data):
        if self._in_style:
            self._style_text.append(data)

    def handle_endtag(self, tag):
        if tag == "style" and self._in_style:
            self._in_style = False
            for ref in _CSS_URL_RE.findall("".join(self._style_text)):
                self._add(ref, ResourceHint.OTHER)
            self._style_text.clear()


def _parse_srcset(srcset: str) -> list[str]:
    out = []
    for entry in srcset.split(","):
        entry = entry.strip()
        if entry:
            out.append(entry.split()[0])
    return out


def extract_static_resources(html: str, base_url: str) -> list[tuple[str, ResourceHint]]:
    """Enumerate (absolute url, hint) for resources statically embedded in HTML.

    Best effort: malformed markup is parsed leniently and never raises. Relative
    and protocol-relative references are resolved against base_url; duplicates
    keep their first occurrence.
    """
    collector = _ResourceCollector()
    try:
        collector.feed(html)
        collector.close()
    except Exception:  # lenient by contract: keep whatever was collected
        pass

    results: list[tuple[str, ResourceHint]] = []
    seen: set[str] = set()
    for raw, hint in collector.found:
        if raw.lower().startswith(_SKIP_SCHEMES):
            continue
        absolute = urljoin(base_url, raw)
        try:
            if urlsplit(absolute).scheme not in ("http", "https"):
                continue
        except ValueError:
            continue
        if absolute in seen:
            continue
        seen.add(absolute)
        results.append((absolute, hint))
    return results


@dataclass
class StaticBackend:
    """Backend that fetches the document only and reads resources out of the HTML."""

    user_agent: str = DEFAULT_USER_AGENT
    max_redirects: int = MAX_REDIRECTS
    kind: BackendKind = field(default=BackendKind.STATIC, init=False)

    def capture_page(
        self,
        url: str,
        nav_timeout_ms: int = DEFAULT_NAV_TIMEOUT_MS,
        settle_timeout_ms: int = DEFAULT_SETTLE_TIMEOUT_MS,
    ) -> CaptureResult:
        started = time.monotonic()

        def done(outcome, reqs, error=None):
            return CaptureResult(
                target_url=url,
                outcome=outcome,
                requests=reqs,
                error_message=error,
                backend=BackendKind.STATIC,
                duration_ms=int((time.monotonic() - started) * 1000),
            )

        session = requests.Session()
        session.max_redirects = self.max_redirects
        try:
            response = session.get(
                url,
                timeout=nav_timeout_ms / 1000.0,
                headers={"User-Agent": self.user_agent},
                allow_redirects=True,
            )
        except Exception as exc:  # DNS, TLS, refused, timeout, redirect loop, ...
            return done(CaptureOutcome.ERROR, [], str(exc))
        finally:
            session.close()

        captured = [
            CapturedRequest(hop.url, ResourceHint.DOCUMENT, utc_now())
            for hop in [*response.history, response]
        ]
        content_type = response.headers.get("Content-Type", "")
        if "html" in content_type.lower() or not content_type:
            for resource_url, hint in extract_static_resources(response.text, response.url):
                captured.append(CapturedRequest(resource_url, hint, utc_now()))
        return done(CaptureOutcome.OK, captured)

    def close(self):
        pass


def capture_page(
    url: str,
    backend,
    nav_timeout_ms: int = DEFAULT_NAV_TIMEOUT_MS,
    settle_timeout_ms: int = DEFAULT_SETTLE_TIMEOUT_MS,
) -> CaptureResult:
    """Capture one page load with whichever backend is configured."""
    return backend.capture_page(url, nav_timeout_ms=nav_timeout_ms, settle_timeout_ms=settle_timeout_ms)
