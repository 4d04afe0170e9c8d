"""Command-line interface: scan, join, report, watch, match."""

from __future__ import annotations

import argparse
import logging
import queue
import sys
from pathlib import Path

from . import analytics, orchestrator, registry
from .blacklist import (
    BlacklistError,
    check_attribution_coverage,
    load_attribution,
    load_blacklist,
    match_url,
)
from .browser import BrowserBackend, BrowserError
from .events import DEFAULT_STREAM_PORT, EventStreamServer, stream_events
from .registry import UrlVerdict, validate_url

log = logging.getLogger(__name__)


def _add_registry_args(parser):
    parser.add_argument("--entities", required=True, help="entity registry CSV")
    parser.add_argument("--categories", required=True, help="category registry CSV")
    parser.add_argument("--header-map", help="key=value file mapping field names to CSV headers")


def _add_browser_args(parser):
    parser.add_argument("--browser-binary", help="Chromium-family browser executable")
    parser.add_argument(
        "--browser-attach",
        metavar="HOST:PORT",
        help="attach to an already-running browser debug endpoint",
    )
    parser.add_argument(
        "--debug-port",
        type=int,
        help="fixed remote-debugging port for the launched browser (default: auto)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egressaudit",
        description="Detect HTTP requests from public-administration websites to "
        "blacklisted non-EEA third-party domains.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)

    scan = commands.add_parser("scan", help="batch-scan every entity in the registry")
    _add_registry_args(scan)
    scan.add_argument("--blacklist", required=True, help="grouped domain blacklist JSON")
    scan.add_argument("--attribution", required=True, help="group attribution CSV")
    scan.add_argument("--out", required=True, help="output directory")
    scan.add_argument("--backend", choices=("browser", "static"), default="static")
    scan.add_argument("--concurrency", type=int, default=orchestrator.DEFAULT_CONCURRENCY)
    scan.add_argument("--nav-timeout", type=int, default=orchestrator.DEFAULT_NAV_TIMEOUT_MS,
                      metavar="MS")
    scan.add_argument("--settle-timeout", type=int, default=orchestrator.DEFAULT_SETTLE_TIMEOUT_MS,
                      metavar="MS")
    scan.add_argument("--resume", action="store_true", help="skip entities already in done.csv")
    scan.add_argument("--user-agent", help="User-Agent for the static backend")
    _add_browser_args(scan)

    join = commands.add_parser("join", help="join the two registry CSVs into the scan input")
    _add_registry_args(join)
    join.add_argument("--out", help="output CSV path (default: stdout)")

    report = commands.add_parser("report", help="compute aggregate statistics from a scan")
    report.add_argument("--out", required=True, help="scan output directory (report written here)")
    report.add_argument("--attribution", help="group attribution CSV (enables cross-checks)")
    report.add_argument(
        "--formats",
        default="csv,json",
        help="comma-separated subset of csv,json,svg (default: csv,json)",
    )

    watch = commands.add_parser("watch", help="interactive browsing session with live event stream")
    watch.add_argument("--blacklist", required=True)
    watch.add_argument("--attribution", required=True)
    watch.add_argument("--port", type=int, default=DEFAULT_STREAM_PORT)
    watch.add_argument("--headless", action="store_true", help="run the browser headless")
    _add_browser_args(watch)

    match = commands.add_parser("match", help="match one URL against the blacklist")
    match.add_argument("--url", required=True)
    match.add_argument("--blacklist", required=True)
    return parser


def _load_entities(args) -> list[registry.EnrichedEntity]:
    header_map = registry.load_header_map(args.header_map) if args.header_map else None
    with open(args.entities, "rb") as fh:
        entities = registry.parse_entities(fh, header_map)
    with open(args.categories, "rb") as fh:
        categories = registry.parse_categories(fh, header_map)
    return registry.join_entities(entities, categories)


def _load_blacklist_pair(blacklist_path, attribution_path):
    with open(blacklist_path, encoding="utf-8") as fh:
        blacklist = load_blacklist(fh)
    with open(attribution_path, encoding="utf-8") as fh:
        attribution = load_attribution(fh)
    check_attribution_coverage(blacklist, attribution)
    return blacklist, attribution


def cmd_scan(args) -> int:
    enriched = _load_entities(args)
    blacklist, attribution = _load_blacklist_pair(args.blacklist, args.attribution)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "entities.csv", "w", encoding="utf-8", newline="") as fh:
        registry.write_scan_input(enriched, fh)

    config = orchestrator.ScanConfig(
        backend=args.backend,
        concurrency=args.concurrency,
        nav_timeout_ms=args.nav_timeout,
        settle_timeout_ms=args.settle_timeout,
        out_dir=out_dir,
        resume=args.resume,
        browser_binary=args.browser_binary,
        browser_attach=args.browser_attach,
        browser_debug_port=args.debug_port,
        user_agent=args.user_agent,
    )
    summary = orchestrator.run_scan(enriched, config, blacklist, attribution)
    print(
        f"processed={summary.processed} good={summary.good} bad={summary.bad} "
        f"error={summary.error} skipped={summary.skipped}"
    )
    return 0


def cmd_join(args) -> int:
    enriched = _load_entities(args)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            registry.write_scan_input(enriched, fh)
    else:
        registry.write_scan_input(enriched, sys.stdout)
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    attribution = {}
    if args.attribution:
        with open(args.attribution, encoding="utf-8") as fh:
            attribution = load_attribution(fh)
    report = analytics.compute_report(
        out_dir / orchestrator.BAD_REQUESTS_FILE,
        out_dir / orchestrator.DONE_FILE,
        attribution,
    )
    formats = tuple(part.strip() for part in args.formats.split(",") if part.strip())
    written = analytics.emit_report(report, out_dir, formats)
    for path in written:
        print(path)
    return 0


def cmd_watch(args) -> int:
    blacklist, attribution = _load_blacklist_pair(args.blacklist, args.attribution)
    server = EventStreamServer(port=args.port).start()
    print(f"event stream listening on {server.url}", file=sys.stderr)

    backend = BrowserBackend(
        binary=args.browser_binary,
        attach=args.browser_attach,
        headless=args.headless,
        debug_port=args.debug_port,
    )
    events: queue.Queue = queue.Queue()
    handle = backend.open_interactive_session(events.put)
    print("browser session open; navigate freely, Ctrl-C to stop", file=sys.stderr)
    try:
        counts = stream_events(iter(events.get, None), server, blacklist, attribution)
    except KeyboardInterrupt:
        counts = None
    finally:
        handle.close()
        backend.close()
        server.stop()
    if counts is not None:
        print(f"session: {counts.requests} requests, {counts.bad_requests} flagged")
    return 0


def cmd_match(args) -> int:
    with open(args.blacklist, encoding="utf-8") as fh:
        blacklist = load_blacklist(fh)
    validation = validate_url(args.url)
    url = validation.normalized_url if validation.verdict is UrlVerdict.VALID else args.url
    result = match_url(url, blacklist)
    if result is None:
        print("no-match")
        return 1
    print(
        f"matched_pattern={result.matched_pattern} group_name={result.group_name} "
        f"match_length={result.match_length}"
    )
    return 0


_COMMANDS = {
    "scan": cmd_scan,
    "join": cmd_join,
    "report": cmd_report,
    "watch": cmd_watch,
    "match": cmd_match,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (
        registry.IngestError,
        analytics.AnalyticsError,
        BlacklistError,
        BrowserError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
