"""Drive a full scan: schedule captures, stream results to disk, support resume."""

from __future__ import annotations

import csv
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .blacklist import Attribution, Blacklist
from .capture import (
    DEFAULT_NAV_TIMEOUT_MS,
    DEFAULT_SETTLE_TIMEOUT_MS,
    StaticBackend,
    utc_now,
)
from .classify import BadRequest, EntityStatus, EntityVerdict, classify_requests
from .registry import EnrichedEntity, UrlVerdict, validate_url

log = logging.getLogger(__name__)

BAD_REQUESTS_FILE = "bad-requests.csv"
DONE_FILE = "done.csv"

BAD_REQUESTS_COLUMNS = [
    "ipa_code",
    "entity_name",
    "category_name",
    "request_url",
    "matched_pattern",
    "group_name",
    "company",
    "country",
    "service_type",
    "resource_hint",
    "observed_at",
]
DONE_COLUMNS = ["ipa_code", "disposition", "error_message", "finished_at"]

DEFAULT_CONCURRENCY = 8
DEFAULT_LAUNCH_RAMP_PER_SECOND = 4.0


class Disposition(str, Enum):
    DONE_OK = "DONE_OK"
    DONE_ERROR = "DONE_ERROR"


@dataclass
class ScanConfig:
    backend: str = "static"  # "static" or "browser"
    concurrency: int = DEFAULT_CONCURRENCY
    nav_timeout_ms: int = DEFAULT_NAV_TIMEOUT_MS
    settle_timeout_ms: int = DEFAULT_SETTLE_TIMEOUT_MS
    out_dir: Path = field(default_factory=lambda: Path("scan-out"))
    resume: bool = False
    launch_ramp_per_second: float = DEFAULT_LAUNCH_RAMP_PER_SECOND
    browser_binary: str | None = None
    browser_attach: str | None = None  # host:port of an already-running debug endpoint
    browser_debug_port: int | None = None  # fixed port for the launched browser
    user_agent: str | None = None

    def __post_init__(self):
        if self.concurrency < 1:
            raise ValueError("concurrency limit must be >= 1")
        if self.nav_timeout_ms <= 0 or self.settle_timeout_ms <= 0:
            raise ValueError("timeouts must be > 0")
        self.out_dir = Path(self.out_dir)


@dataclass
class ScanSummary:
    processed: int = 0
    good: int = 0
    bad: int = 0
    error: int = 0
    skipped: int = 0


def _timestamp(dt) -> str:
    return dt.isoformat(timespec="milliseconds")


class OutputWriter:
    """Owns the two output files; appends are serialized and crash-ordered.

    For each entity the bad-request rows are durably appended (flush+fsync)
    before its done record, so a done record always implies complete evidence.
    """

    def __init__(self, out_dir: Path, resume: bool):
        out_dir.mkdir(parents=True, exist_ok=True)
        self.bad_path = out_dir / BAD_REQUESTS_FILE
        self.done_path = out_dir / DONE_FILE
        self._lock = threading.Lock()

        self.done_codes: set[str] = set()
        if resume:
            self.done_codes = self._load_done_codes()
            self._prune_orphans()
        else:
            self.bad_path.write_text("", encoding="utf-8")
            self.done_path.write_text("", encoding="utf-8")

        self._bad_fh = open(self.bad_path, "a", encoding="utf-8", newline="")
        self._done_fh = open(self.done_path, "a", encoding="utf-8", newline="")
        self._bad_csv = csv.writer(self._bad_fh, lineterminator="\n")
        self._done_csv = csv.writer(self._done_fh, lineterminator="\n")
        if self._bad_fh.tell() == 0:
            self._bad_csv.writerow(BAD_REQUESTS_COLUMNS)
            self._flush(self._bad_fh)
        if self._done_fh.tell() == 0:
            self._done_csv.writerow(DONE_COLUMNS)
            self._flush(self._done_fh)

    def _load_done_codes(self) -> set[str]:
        codes: set[str] = set()
        if not self.done_path.exists():
            return codes
        with open(self.done_path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
        for row in rows[1:]:
            # a SIGKILL mid-append can leave a short final row: not done
            if len(row) == len(DONE_COLUMNS) and row[0] and row[3]:
                codes.add(row[0])
        return codes

    def _prune_orphans(self):
        """Drop bad-request rows whose entity never got a done record.

        Those entities will be rescanned; keeping the rows would duplicate
        their evidence.
        """
        if not self.bad_path.exists():
            return
        with open(self.bad_path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            return
        kept = [row for row in rows[1:] if row and row[0] in self.done_codes]
        if len(kept) == len(rows) - 1:
            return
        tmp = self.bad_path.with_suffix(".csv.tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(BAD_REQUESTS_COLUMNS)
            writer.writerows(kept)
            self._flush(fh)
        os.replace(tmp, self.bad_path)
        log.warning("resume: pruned %d orphaned bad-request row(s)", len(rows) - 1 - len(kept))

    @staticmethod
    def _flush(fh):
        fh.flush()
        os.fsync(fh.fileno())

    def record(self, status: EntityStatus, flagged: list[BadRequest]):
        """Append one entity's evidence and its done record, atomically wrt crash."""
        with self._lock:
            for bad in flagged:
                self._bad_csv.writerow(
                    [
                        bad.ipa_code,
                        bad.entity_name,
                        bad.category_name,
                        bad.request_url,
                        bad.matched_pattern,
                        bad.group_name,
                        bad.company,
                        bad.country,
                        bad.service_type.value,
                        bad.resource_hint.value,
                        _timestamp(bad.observed_at),
                    ]
                )
            if flagged:
                self._flush(self._bad_fh)
            disposition = (
                Disposition.DONE_ERROR if status.status is EntityVerdict.ERROR else Disposition.DONE_OK
            )
            self._done_csv.writerow(
                [status.ipa_code, disposition.value, status.error_message or "", _timestamp(utc_now())]
            )
            self._flush(self._done_fh)

    def close(self):
        self._bad_fh.close()
        self._done_fh.close()


class LaunchRamp:
    """Global pacing of new capture sessions (politeness, not per-host limits)."""

    def __init__(self, per_second: float):
        self._interval = 1.0 / per_second if per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next)
            self._next = slot + self._interval
        if slot > now:
            time.sleep(slot - now)


def make_backend(config: ScanConfig):
    if config.backend == "static":
        if config.user_agent:
            return StaticBackend(user_agent=config.user_agent)
        return StaticBackend()
    if config.backend == "browser":
        from .browser import BrowserBackend

        return BrowserBackend(
            binary=config.browser_binary,
            attach=config.browser_attach,
            debug_port=config.browser_debug_port,
        )
    raise ValueError(f"unknown backend {config.backend!r}")


def run_scan(
    entities: list[EnrichedEntity],
    config: ScanConfig,
    blacklist: Blacklist,
    attribution: dict[str, Attribution],
    backend=None,
) -> ScanSummary:
    """Scan every entity not already done, appending evidence as it completes."""
    writer = OutputWriter(config.out_dir, resume=config.resume)
    summary = ScanSummary()
    ramp = LaunchRamp(config.launch_ramp_per_second)
    own_backend = backend is None
    if own_backend:
        backend = make_backend(config)

    pending = []
    for entity in entities:
        if entity.ipa_code in writer.done_codes:
            summary.skipped += 1
        else:
            pending.append(entity)

    def process(entity: EnrichedEntity) -> EntityVerdict:
        validation = validate_url(entity.website_url)
        if validation.verdict is not UrlVerdict.VALID:
            status = EntityStatus(
                entity.ipa_code,
                EntityVerdict.ERROR,
                0,
                f"{validation.verdict.value}: {validation.reason}",
            )
            writer.record(status, [])
            return EntityVerdict.ERROR
        ramp.wait()
        capture = backend.capture_page(
            validation.normalized_url,
            nav_timeout_ms=config.nav_timeout_ms,
            settle_timeout_ms=config.settle_timeout_ms,
        )
        status, flagged = classify_requests(entity, capture, blacklist, attribution)
        writer.record(status, flagged)
        return status.status

    try:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            for verdict in pool.map(process, pending):
                summary.processed += 1
                if verdict is EntityVerdict.GOOD:
                    summary.good += 1
                elif verdict is EntityVerdict.BAD:
                    summary.bad += 1
                else:
                    summary.error += 1
    finally:
        writer.close()
        if own_backend:
            backend.close()

    log.info(
        "scan finished: processed=%d good=%d bad=%d error=%d skipped=%d",
        summary.processed,
        summary.good,
        summary.bad,
        summary.error,
        summary.skipped,
    )
    return summary
