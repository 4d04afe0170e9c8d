"""Shared fixtures: the 20-site local corpus, its registry, and loaded blacklists.

The corpus is constructed so that, scanned in registry order, it yields exactly
5 bad entities (9 flagged requests), 13 clean entities, and 2 unreachable ones.
The golden file in fixtures/golden-bad-requests.csv is hand-derived from the
HTML below; change one only together with the other.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from egressaudit.blacklist import load_attribution, load_blacklist
from egressaudit.registry import EnrichedEntity

FIXTURES = Path(__file__).parent / "fixtures"

CATEGORY_NAMES = {"L6": "Municipalities", "L33": "Universities", "C7": "Health Agencies"}


def _page(title: str, body: str) -> str:
    return (
        "<!doctype html>\n<html><head><title>{title}</title>\n"
        '<link rel="stylesheet" href="/assets/shared.css">\n'
        "</head><body>\n<h1>{title}</h1>\n{body}\n</body></html>\n"
    ).format(title=title, body=body)


BAD_SITE_BODIES = {
    "site-01": (
        '<img src="logo.png" alt="stemma">\n'
        '<script src="https://www.youtube.com/iframe_api"></script>\n'
        '<img src="https://i.ytimg.com/vi/abc123/default.jpg" alt="anteprima">'
    ),
    "site-02": (
        '<link rel="stylesheet" href="https://use.fontawesome.com/releases/v5.15.4/css/all.css">\n'
        "<p>Albo pretorio</p>"
    ),
    "site-03": (
        '<script src="https://sdk.amazonaws.com/js/aws-sdk-2.1450.0.min.js"></script>\n'
        '<img src="https://d1.awsstatic.com/logos/aws-logo.png" alt="">'
    ),
    "site-04": (
        '<script src="https://cdnjs.cloudflare.com/ajax/libs/jquery/3.6.0/jquery.min.js"></script>\n'
        '<script src="https://cdn.jsdelivr.net/npm/bootstrap@5.1.3/dist/js/bootstrap.min.js"></script>'
    ),
    "site-05": (
        '<link href="https://fonts.googleapis.com/css2?family=Titillium+Web" rel="stylesheet">\n'
        '<iframe src="https://www.youtube-nocookie.com/embed/xyz789" title="video"></iframe>'
    ),
}

CLEAN_SITE_BODIES = {
    # near-miss hostnames and a blacklisted name hidden in a query string: all no-match
    "site-06": (
        '<script src="https://youtube.com.phish.example/pixel.js"></script>\n'
        '<img src="https://eu-host.example/embed?src=youtube.com" alt="">'
    ),
    "site-07": '<script src="https://notyoutube.com/x.js"></script>',
    "site-08": '<img src="/assets/banner.jpg" alt=""><script src="app.js"></script>',
    "site-09": "FIRST_PARTY_ABSOLUTE",  # filled in once the port is known
    "site-10": '<link rel="icon" href="favicon.ico"><p>Orari degli uffici</p>',
    "site-11": '<img srcset="/img/s.png 1x, /img/l.png 2x" src="/img/s.png" alt="">',
    "site-12": '<video src="/media/consiglio.mp4"></video>',
    "site-13": '<div style="background: url(/assets/bg.png)">Bandi di gara</div>',
    "site-14": "<p>Prenotazioni online</p>",
    "site-15": '<script src="/js/prenota.js"></script>',
    "site-16": "<p>Referti e pagamenti</p>",
    "site-17": '<iframe src="/mappa.html"></iframe>',
    "site-18": '<img src="stemma.png" alt="stemma comunale">',
}

# (ipa_code, name, category_code, site or None for unreachable)
CORPUS_ENTITIES = [
    ("c_a001", "Comune di Arezzo Nord", "L6", "site-01"),
    ("c_b001", "Comune di Rivafredda", "L6", "site-06"),
    ("c_a002", "Comune di Belmonte", "L6", "site-02"),
    ("c_b002", "Comune di Poggiosole", "L6", "site-07"),
    ("c_a003", "Comune di Castelnuovo", "L6", "site-03"),
    ("c_b003", "Comune di Fontanelle", "L6", "site-08"),
    ("c_b004", "Comune di Serravalle", "L6", "site-09"),
    ("c_b005", "Comune di Montechiaro", "L6", "site-10"),
    ("c_b006", "Comune di Pianarsa", "L6", "site-11"),
    ("un_001", "Universita di Collina", "L33", "site-04"),
    ("un_003", "Universita di Roccalta", "L33", "site-12"),
    ("un_002", "Universita del Borgo", "L33", "site-05"),
    ("c_b007", "Comune di Valdipietra", "L6", "site-13"),
    ("asl_01", "Azienda Sanitaria Collina", "C7", "site-14"),
    ("asl_02", "Azienda Sanitaria Borgo", "C7", "site-15"),
    ("c_b008", "Comune di Campolungo", "L6", "site-16"),
    ("c_b009", "Comune di Sassofino", "L6", "site-17"),
    ("asl_03", "Azienda Sanitaria Pianarsa", "C7", "site-18"),
    ("c_x001", "Comune di Vallescura", "L6", None),
    ("c_x002", "Comune di Pratofondo", "L6", None),
]

EXPECTED_SUMMARY = {"processed": 20, "good": 13, "bad": 5, "error": 2}

# entity -> blacklisted hostnames its page embeds (for backend agreement checks)
EXPECTED_FLAGGED_HOSTS = {
    "c_a001": {"www.youtube.com", "i.ytimg.com"},
    "c_a002": {"use.fontawesome.com"},
    "c_a003": {"sdk.amazonaws.com", "d1.awsstatic.com"},
    "un_001": {"cdnjs.cloudflare.com", "cdn.jsdelivr.net"},
    "un_002": {"fonts.googleapis.com", "www.youtube-nocookie.com"},
}


class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        server: CorpusServer = self.server  # type: ignore[assignment]
        if server.delay:
            import time

            time.sleep(server.delay)
        target = server.redirects.get(self.path)
        if target is not None:
            self.send_response(302)
            self.send_header("Location", target)
            self.end_headers()
            return
        body = server.pages.get(self.path)
        if body is None:
            self.send_response(404)
            self.send_header("Content-Type", "text/plain")
            self.end_headers()
            self.wfile.write(b"not found")
            return
        self.send_response(200)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        try:
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client (e.g. a killed scan) went away mid-response

    def log_message(self, *args):
        pass


class CorpusServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self):
        super().__init__(("127.0.0.1", 0), _Handler)
        self.pages: dict[str, bytes] = {}
        self.redirects: dict[str, str] = {}
        self.delay: float = 0.0

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"


@dataclass
class Corpus:
    server: CorpusServer
    entities: list[EnrichedEntity]
    blacklist_path: Path = FIXTURES / "hosts.json"
    attribution_path: Path = FIXTURES / "attribution.csv"
    expected_summary: dict = field(default_factory=lambda: dict(EXPECTED_SUMMARY))
    expected_flagged_hosts: dict = field(default_factory=lambda: dict(EXPECTED_FLAGGED_HOSTS))

    @property
    def base_url(self) -> str:
        return self.server.base_url

    def write_registry(self, directory: Path) -> tuple[Path, Path]:
        """Write entity/category CSVs matching this corpus (for CLI-driven tests)."""
        entities_csv = directory / "enti.csv"
        categories_csv = directory / "categorie.csv"
        with open(entities_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["ipa_code", "name", "category_code", "website_url"])
            for e in self.entities:
                writer.writerow([e.ipa_code, e.name, e.category_code, e.website_url])
        with open(categories_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["category_code", "category_name"])
            for code, name in CATEGORY_NAMES.items():
                writer.writerow([code, name])
        return entities_csv, categories_csv


def build_corpus(server: CorpusServer) -> Corpus:
    base = server.base_url
    bodies = dict(BAD_SITE_BODIES)
    bodies.update(CLEAN_SITE_BODIES)
    bodies["site-09"] = f'<script src="{base}/assets/site.js"></script>'

    entities = []
    for code, name, category, site in CORPUS_ENTITIES:
        if site is None:
            url = f"http://unreachable-{code.replace('_', '-')}.invalid/"
        else:
            url = f"{base}/{site}/"
            server.pages[f"/{site}/"] = _page(name, bodies[site]).encode("utf-8")
        entities.append(EnrichedEntity(code, name, category, CATEGORY_NAMES[category], url))
    return Corpus(server=server, entities=entities)


@pytest.fixture(scope="session")
def corpus():
    server = CorpusServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield build_corpus(server)
    finally:
        server.shutdown()
        server.server_close()


@pytest.fixture(scope="session")
def fixture_blacklist():
    with open(FIXTURES / "hosts.json", encoding="utf-8") as fh:
        return load_blacklist(fh)


@pytest.fixture(scope="session")
def fixture_attribution():
    with open(FIXTURES / "attribution.csv", encoding="utf-8") as fh:
        return load_attribution(fh)
