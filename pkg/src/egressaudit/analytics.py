"""Aggregate statistics over the scan output files, plus table/chart emission."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .blacklist import Attribution, ServiceType
from .capture import ResourceHint
from .classify import BadRequest
from .orchestrator import BAD_REQUESTS_COLUMNS, DONE_COLUMNS, Disposition

log = logging.getLogger(__name__)

SESSION_EXPORT_COLUMNS = BAD_REQUESTS_COLUMNS[3:]  # request_url .. observed_at

TABLE_FILES = {
    "bad_by_category": ("category_name", "bad_entities"),
    "requests_by_group": ("group_name", "bad_requests"),
    "requests_by_company": ("company", "bad_requests"),
    "requests_by_service": ("service_type", "bad_requests"),
}

CHART_TOP_N = 10


class AnalyticsError(Exception):
    """Fatal inconsistency or unreadable input in the scan output files."""


@dataclass(frozen=True)
class DoneRecord:
    ipa_code: str
    disposition: Disposition
    error_message: str | None
    finished_at: datetime


@dataclass
class Report:
    total_entities: int
    reachable: int
    unreachable_fraction: float
    good: int
    bad: int
    bad_fraction: float  # bad / (good + bad), i.e. among analyzable entities
    bad_fraction_of_total: float
    bad_by_category: list[tuple[str, int]]
    requests_by_group: list[tuple[str, int]]
    requests_by_company: list[tuple[str, int]]
    requests_by_service: list[tuple[str, int]]
    within_service_breakdown: dict[str, list[tuple[str, float]]]
    top1_company_share: float
    top3_company_share: float

    def to_dict(self) -> dict:
        return {
            "total_entities": self.total_entities,
            "reachable": self.reachable,
            "unreachable_fraction": self.unreachable_fraction,
            "good": self.good,
            "bad": self.bad,
            "bad_fraction": {
                "of_analyzable": self.bad_fraction,
                "of_total": self.bad_fraction_of_total,
            },
            "bad_by_category": [list(item) for item in self.bad_by_category],
            "requests_by_group": [list(item) for item in self.requests_by_group],
            "requests_by_company": [list(item) for item in self.requests_by_company],
            "requests_by_service": [list(item) for item in self.requests_by_service],
            "within_service_breakdown": {
                service: [list(item) for item in shares]
                for service, shares in self.within_service_breakdown.items()
            },
            "top_company_shares": {
                "top1": self.top1_company_share,
                "top3": self.top3_company_share,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(
            total_entities=data["total_entities"],
            reachable=data["reachable"],
            unreachable_fraction=data["unreachable_fraction"],
            good=data["good"],
            bad=data["bad"],
            bad_fraction=data["bad_fraction"]["of_analyzable"],
            bad_fraction_of_total=data["bad_fraction"]["of_total"],
            bad_by_category=[(name, count) for name, count in data["bad_by_category"]],
            requests_by_group=[(name, count) for name, count in data["requests_by_group"]],
            requests_by_company=[(name, count) for name, count in data["requests_by_company"]],
            requests_by_service=[(name, count) for name, count in data["requests_by_service"]],
            within_service_breakdown={
                service: [(name, share) for name, share in shares]
                for service, shares in data["within_service_breakdown"].items()
            },
            top1_company_share=data["top_company_shares"]["top1"],
            top3_company_share=data["top_company_shares"]["top3"],
        )


def _read_table(path, expected_columns) -> list[dict[str, str]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise AnalyticsError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise AnalyticsError(f"{path}: empty file, expected a header row")
    header = [cell.strip() for cell in rows[0]]
    if header != list(expected_columns):
        raise AnalyticsError(f"{path}: unexpected header {header}, expected {list(expected_columns)}")
    out = []
    for i, row in enumerate(rows[1:], 2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise AnalyticsError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        out.append(dict(zip(header, row)))
    return out


def _parse_timestamp(value: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(value)
    except ValueError as exc:
        raise AnalyticsError(f"{where}: bad timestamp {value!r}") from exc


def read_done(path) -> list[DoneRecord]:
    records = []
    for i, row in enumerate(_read_table(path, DONE_COLUMNS), 1):
        try:
            disposition = Disposition(row["disposition"])
        except ValueError as exc:
            raise AnalyticsError(f"{path}: row {i}: bad disposition {row['disposition']!r}") from exc
        records.append(
            DoneRecord(
                ipa_code=row["ipa_code"],
                disposition=disposition,
                error_message=row["error_message"] or None,
                finished_at=_parse_timestamp(row["finished_at"], f"{path} row {i}"),
            )
        )
    return records


def _parse_bad_row(row: dict[str, str], where: str) -> BadRequest:
    try:
        service = ServiceType(row["service_type"])
        hint = ResourceHint(row["resource_hint"])
    except ValueError as exc:
        raise AnalyticsError(f"{where}: {exc}") from exc
    return BadRequest(
        ipa_code=row.get("ipa_code", ""),
        entity_name=row.get("entity_name", ""),
        category_name=row.get("category_name", ""),
        request_url=row["request_url"],
        matched_pattern=row["matched_pattern"],
        group_name=row["group_name"],
        company=row["company"],
        country=row["country"],
        service_type=service,
        resource_hint=hint,
        observed_at=_parse_timestamp(row["observed_at"], where),
    )


def read_bad_requests(path) -> list[BadRequest]:
    return [
        _parse_bad_row(row, f"{path} row {i}")
        for i, row in enumerate(_read_table(path, BAD_REQUESTS_COLUMNS), 1)
    ]


def read_session_export(path) -> list[BadRequest]:
    """Read a live-session export: the bad-requests schema minus the entity columns."""
    return [
        _parse_bad_row(row, f"{path} row {i}")
        for i, row in enumerate(_read_table(path, SESSION_EXPORT_COLUMNS), 1)
    ]


def _ranked(counter: Counter) -> list[tuple[str, int]]:
    return sorted(counter.items(), key=lambda item: (-item[1], item[0]))


def compute_report(bad_requests_file, done_file, attribution: dict[str, Attribution]) -> Report:
    """Aggregate the two output files into the Report behind the summary figures."""
    done = read_done(done_file)
    flagged = read_bad_requests(bad_requests_file)

    done_codes = {record.ipa_code for record in done}
    for bad in flagged:
        if bad.ipa_code not in done_codes:
            raise AnalyticsError(
                f"bad-requests row references ipa_code {bad.ipa_code!r} absent from done file"
            )

    total = len(done)
    errors = sum(1 for record in done if record.disposition is Disposition.DONE_ERROR)
    reachable = total - errors

    bad_codes = {bad.ipa_code for bad in flagged}
    bad_count = len(bad_codes)
    good_count = reachable - bad_count

    category_of: dict[str, str] = {}
    for bad in flagged:
        category_of.setdefault(bad.ipa_code, bad.category_name)
    by_category = Counter(category_of.values())

    by_group = Counter(bad.group_name for bad in flagged)
    by_company = Counter(bad.company for bad in flagged)
    by_service = Counter(bad.service_type.value for bad in flagged)

    for group, count in by_group.items():
        attr = attribution.get(group)
        if attr is None:
            log.warning("group %r in bad-requests has no attribution row", group)
            continue
        row_companies = {bad.company for bad in flagged if bad.group_name == group}
        if row_companies - {attr.company}:
            log.warning("group %r: rows disagree with attribution table on company", group)

    breakdown: dict[str, list[tuple[str, float]]] = {}
    for service, service_total in by_service.items():
        groups = Counter(bad.group_name for bad in flagged if bad.service_type.value == service)
        breakdown[service] = [
            (group, count / service_total) for group, count in _ranked(groups)
        ]

    total_requests = len(flagged)
    company_ranking = _ranked(by_company)
    top1 = company_ranking[0][1] / total_requests if total_requests else 0.0
    top3 = sum(count for _, count in company_ranking[:3]) / total_requests if total_requests else 0.0

    return Report(
        total_entities=total,
        reachable=reachable,
        unreachable_fraction=errors / total if total else 0.0,
        good=good_count,
        bad=bad_count,
        bad_fraction=bad_count / reachable if reachable else 0.0,
        bad_fraction_of_total=bad_count / total if total else 0.0,
        bad_by_category=_ranked(by_category),
        requests_by_group=_ranked(by_group),
        requests_by_company=company_ranking,
        requests_by_service=_ranked(by_service),
        within_service_breakdown=breakdown,
        top1_company_share=top1,
        top3_company_share=top3,
    )


def _report_tables(report: Report) -> dict[str, list[tuple[str, int]]]:
    return {
        "bad_by_category": report.bad_by_category,
        "requests_by_group": report.requests_by_group,
        "requests_by_company": report.requests_by_company,
        "requests_by_service": report.requests_by_service,
    }


def truncate_for_chart(items: list[tuple[str, int]], top_n: int = CHART_TOP_N):
    """Top-N rows plus an 'others' bucket summing the tail (when there is one)."""
    if len(items) <= top_n:
        return list(items)
    head = list(items[:top_n])
    head.append(("others", sum(count for _, count in items[top_n:])))
    return head


def _write_chart(path: Path, title: str, items: list[tuple[str, int]]):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = truncate_for_chart(items)
    labels = [name for name, _ in rows][::-1]
    values = [count for _, count in rows][::-1]
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.4 * len(rows) + 1)))
    ax.barh(labels, values, color="#23527c")
    ax.set_title(title)
    ax.set_xlabel("count")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_report(report: Report, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write report.json, one CSV per count table, and optional SVG bar charts."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise AnalyticsError(f"output directory not writable: {exc}") from exc

    written: list[Path] = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", "utf-8")
        written.append(path)
    if "csv" in formats:
        for table, items in _report_tables(report).items():
            path = out_dir / f"{table}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(TABLE_FILES[table])
                writer.writerows(items)
            written.append(path)
    if "svg" in formats:
        for table, items in _report_tables(report).items():
            path = out_dir / f"{table}.svg"
            _write_chart(path, table.replace("_", " "), items)
            written.append(path)
    return written


def load_report(path) -> Report:
    with open(path, encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))
