"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
Criterion 4 needs a real Chromium-family browser and is skipped where none
exists; criterion 7 then runs against the in-process debug-endpoint emulator,
which produces the same wire protocol and error strings.
"""

import csv
import io
import json
import os
import random
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest

from cdp_emulator import CdpEmulator
from egressaudit.analytics import compute_report
from egressaudit.blacklist import Blacklist, load_attribution, load_blacklist, match_url
from egressaudit.browser import BrowserBackend, browser_available
from egressaudit.capture import CaptureOutcome, StaticBackend
from egressaudit.orchestrator import (
    BAD_REQUESTS_FILE,
    DONE_FILE,
    ScanConfig,
    run_scan,
)
from egressaudit.registry import EnrichedEntity
from conftest import FIXTURES
from hostgen import make_hostnames, make_pattern_pool
from oracles import brute_force_match


def announce(number: int, name: str, verdict: str = "PASS"):
    print(f"\n[criterion {number}] {name}: {verdict}")


def masked_csv_bytes(path) -> bytes:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    column = rows[0].index("observed_at")
    for row in rows[1:]:
        row[column] = ""
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    return buffer.getvalue().encode("utf-8")


def test_criterion_1_matching_oracle_equivalence():
    patterns = make_pattern_pool(200, seed=7)
    blacklist = Blacklist(
        {group: {p for p, g in patterns.items() if g == group} for group in set(patterns.values())}
    )
    hostnames = make_hostnames(patterns, n=10_000, seed=11)
    assert "notyoutube.com" in hostnames

    started = time.monotonic()
    discrepancies = []
    for host in hostnames:
        url = f"http://{host}/"
        expected = brute_force_match(url, patterns)
        actual = match_url(url, blacklist)
        actual_pair = (actual.matched_pattern, actual.group_name) if actual else None
        if expected != actual_pair:
            discrepancies.append((host, expected, actual_pair))
    elapsed = time.monotonic() - started

    assert discrepancies == []
    assert elapsed < 5.0, f"10k-hostname check took {elapsed:.2f}s (budget 5s)"
    announce(1, f"matching oracle equivalence (10000 hostnames, {elapsed:.2f}s)")


def test_criterion_2_canonical_match_example():
    blacklist = load_blacklist(io.StringIO(json.dumps({"youtube": ["youtube.co", "youtube.com"]})))
    result = match_url("https://www.youtube.com/", blacklist)
    assert result is not None
    assert result.matched_pattern == "youtube.com"
    announce(2, 'canonical example: "https://www.youtube.com/" matches youtube.com')


def load_fixture_pair():
    with open(FIXTURES / "hosts.json", encoding="utf-8") as fh:
        blacklist = load_blacklist(fh)
    with open(FIXTURES / "attribution.csv", encoding="utf-8") as fh:
        attribution = load_attribution(fh)
    return blacklist, attribution


def test_criterion_3_fixture_corpus_end_to_end(corpus, tmp_path):
    blacklist, attribution = load_fixture_pair()
    out_dir = tmp_path / "out"
    started = time.monotonic()
    summary = run_scan(
        corpus.entities,
        ScanConfig(backend="static", concurrency=1, out_dir=out_dir),
        blacklist,
        attribution,
    )
    report = compute_report(out_dir / BAD_REQUESTS_FILE, out_dir / DONE_FILE, attribution)
    elapsed = time.monotonic() - started

    assert (summary.bad, summary.good, summary.error) == (5, 13, 2)
    assert summary.processed == 20
    assert masked_csv_bytes(out_dir / BAD_REQUESTS_FILE) == masked_csv_bytes(
        FIXTURES / "golden-bad-requests.csv"
    )
    assert report.bad_fraction == 5 / 18
    assert report.unreachable_fraction == 0.10
    assert elapsed < 60.0, f"corpus scan took {elapsed:.1f}s (budget 60s)"
    announce(3, f"fixture-corpus end-to-end with STATIC backend ({elapsed:.1f}s)")


@pytest.mark.skipif(
    not browser_available(), reason="no Chromium-family browser on this host"
)
def test_criterion_4_backend_agreement(corpus):
    blacklist, _ = load_fixture_pair()
    static = StaticBackend()
    browser = BrowserBackend()
    try:
        static_pairs, browser_pairs = set(), set()
        for entity in corpus.entities:
            if not entity.website_url.startswith(corpus.base_url):
                continue
            for backend, pairs in ((static, static_pairs), (browser, browser_pairs)):
                result = backend.capture_page(entity.website_url, settle_timeout_ms=1000)
                assert result.outcome is CaptureOutcome.OK
                for request in result.requests:
                    match = match_url(request.request_url, blacklist)
                    if match:
                        from egressaudit.blacklist import hostname_of

                        pairs.add((entity.ipa_code, hostname_of(request.request_url)))
        assert static_pairs == browser_pairs
    finally:
        browser.close()
    announce(4, "BROWSER and STATIC backends flag identical (site, hostname) pairs")


def test_criterion_5_resume_idempotence(corpus, tmp_path):
    entities_csv, categories_csv = corpus.write_registry(tmp_path)
    out_dir = tmp_path / "out"
    argv = [
        sys.executable, "-m", "egressaudit", "scan",
        "--entities", str(entities_csv),
        "--categories", str(categories_csv),
        "--blacklist", str(corpus.blacklist_path),
        "--attribution", str(corpus.attribution_path),
        "--out", str(out_dir),
        "--backend", "static",
        "--concurrency", "2",
    ]

    corpus.server.delay = 0.3
    try:
        process = subprocess.Popen(argv, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        done_path = out_dir / DONE_FILE
        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            if process.poll() is not None:
                pytest.fail("scan finished before it could be killed; increase server delay")
            if done_path.exists():
                with open(done_path, newline="", encoding="utf-8") as fh:
                    if len(fh.readlines()) >= 11:  # header + 10 entities
                        break
            time.sleep(0.02)
        os.kill(process.pid, signal.SIGKILL)
        process.wait(timeout=10)
    finally:
        corpus.server.delay = 0.0

    from egressaudit.cli import main

    assert main([
        "scan",
        "--entities", str(entities_csv),
        "--categories", str(categories_csv),
        "--blacklist", str(corpus.blacklist_path),
        "--attribution", str(corpus.attribution_path),
        "--out", str(out_dir),
        "--backend", "static",
        "--resume",
    ]) == 0

    with open(out_dir / DONE_FILE, newline="", encoding="utf-8") as fh:
        done_rows = list(csv.reader(fh))[1:]
    codes = [row[0] for row in done_rows]
    assert len(codes) == 20
    assert len(set(codes)) == 20

    with open(out_dir / BAD_REQUESTS_FILE, newline="", encoding="utf-8") as fh:
        bad_rows = list(csv.reader(fh))[1:]
    pairs = [(row[0], row[3]) for row in bad_rows]
    assert len(pairs) == len(set(pairs)), "duplicated (ipa_code, request_url) evidence"

    golden_pairs = []
    with open(FIXTURES / "golden-bad-requests.csv", newline="", encoding="utf-8") as fh:
        for row in list(csv.reader(fh))[1:]:
            golden_pairs.append((row[0], row[3]))
    assert sorted(pairs) == sorted(golden_pairs)
    announce(5, "resume after SIGKILL: 20 unique done records, no duplicated evidence")


def test_criterion_6_analytics_conservation(tmp_path):
    rng = random.Random(1234)
    with open(FIXTURES / "attribution.csv", encoding="utf-8") as fh:
        attribution = load_attribution(fh)
    groups = sorted(attribution)
    n = 1000
    ts = "2026-03-01T10:00:00.000+00:00"

    codes = [f"e{i % 211}" for i in range(n)]
    bad_path = tmp_path / BAD_REQUESTS_FILE
    done_path = tmp_path / DONE_FILE
    with open(bad_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["ipa_code", "entity_name", "category_name", "request_url", "matched_pattern",
             "group_name", "company", "country", "service_type", "resource_hint", "observed_at"]
        )
        for i in range(n):
            group = rng.choice(groups)
            attr = attribution[group]
            writer.writerow(
                [codes[i], f"Ente {codes[i]}", "Municipalities",
                 f"https://cdn.{group}.example/{i}", f"{group}.example", group,
                 attr.company, attr.country, attr.service_type.value, "SCRIPT", ts]
            )
    with open(done_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ipa_code", "disposition", "error_message", "finished_at"])
        for code in sorted(set(codes)):
            writer.writerow([code, "DONE_OK", "", ts])

    report = compute_report(bad_path, done_path, attribution)
    for table in (
        report.requests_by_group,
        report.requests_by_company,
        report.requests_by_service,
    ):
        assert sum(count for _, count in table) == n
        assert table == sorted(table, key=lambda item: (-item[1], item[0]))
    announce(6, "analytics conservation on 1000 generated rows, rankings ordered")


def test_criterion_7_error_message_fidelity(tmp_path):
    if browser_available():
        backend = BrowserBackend()
        flavor = "local browser"
        emulator = None
    else:
        emulator = CdpEmulator().start()
        backend = BrowserBackend(attach=emulator.endpoint)
        flavor = "emulated debug endpoint"

    entity = EnrichedEntity(
        "c_err1", "Comune Irraggiungibile", "L6", "Municipalities",
        "http://unresolvable-egressaudit-acceptance.invalid/",
    )
    blacklist, attribution = load_fixture_pair()
    out_dir = tmp_path / "out"
    try:
        summary = run_scan(
            [entity],
            ScanConfig(backend="browser", concurrency=1, out_dir=out_dir),
            blacklist,
            attribution,
            backend=backend,
        )
    finally:
        backend.close()
        if emulator is not None:
            emulator.stop()

    assert summary.error == 1
    with open(out_dir / DONE_FILE, newline="", encoding="utf-8") as fh:
        [row] = list(csv.reader(fh))[1:]
    assert row[0] == "c_err1"
    assert row[1] == "DONE_ERROR"
    assert "net::ERR_NAME_NOT_RESOLVED" in row[2]
    announce(7, f"verbatim net::ERR_NAME_NOT_RESOLVED recorded in done.csv ({flavor})")
