"""Ingest the public-administration registry CSVs and normalize entity URLs."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable
from urllib.parse import urlsplit, urlunsplit

log = logging.getLogger(__name__)

SCAN_INPUT_COLUMNS = ["ipa_code", "name", "category_code", "category_name", "website_url"]

# Canonical field name -> header aliases accepted out of the box. The public
# registry ships Italian headers; a --header-map file can extend/override these.
DEFAULT_HEADER_ALIASES: dict[str, tuple[str, ...]] = {
    "ipa_code": ("ipa_code", "codice_ipa", "cod_amm"),
    "name": ("name", "entity_name", "denominazione_ente", "des_amm"),
    "category_code": ("category_code", "codice_categoria", "cod_categoria", "tipologia"),
    "website_url": ("website_url", "institutional_website", "sito_istituzionale", "sito_web"),
    "category_name": ("category_name", "nome_categoria", "des_categoria"),
}


class IngestError(Exception):
    """Fatal problem reading a registry file (unreadable stream, missing column)."""


class UrlVerdict(str, Enum):
    VALID = "VALID"
    EMPTY = "EMPTY"
    INVALID_SCHEME = "INVALID_SCHEME"
    MALFORMED = "MALFORMED"


@dataclass(frozen=True)
class Entity:
    ipa_code: str
    name: str
    category_code: str
    website_url: str


@dataclass(frozen=True)
class Category:
    category_code: str
    category_name: str


@dataclass(frozen=True)
class EnrichedEntity:
    ipa_code: str
    name: str
    category_code: str
    category_name: str
    website_url: str


@dataclass(frozen=True)
class UrlValidation:
    verdict: UrlVerdict
    normalized_url: str | None
    reason: str


def load_header_map(path: str) -> dict[str, str]:
    """Read a key=value file mapping canonical field names to source headers."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise IngestError(f"{path}:{lineno}: expected 'field = header', got {line!r}")
            field, header = (part.strip() for part in line.split("=", 1))
            if field not in DEFAULT_HEADER_ALIASES:
                raise IngestError(f"{path}:{lineno}: unknown field {field!r}")
            mapping[field] = header
    return mapping


def _read_text(stream: IO) -> str:
    try:
        data = stream.read()
    except OSError as exc:
        raise IngestError(f"unreadable stream: {exc}") from exc
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    return data.lstrip("﻿")


def _sniff_delimiter(header_line: str) -> str:
    # The public dataset has shipped both comma- and semicolon-delimited files.
    return ";" if header_line.count(";") > header_line.count(",") else ","


def _open_table(stream: IO, required: Iterable[str], header_map: dict[str, str] | None):
    """Return (rows, column index per canonical field) or raise IngestError."""
    text = _read_text(stream)
    first_line = text.split("\n", 1)[0]
    reader = csv.reader(io.StringIO(text), delimiter=_sniff_delimiter(first_line))
    rows = list(reader)
    if not rows:
        raise IngestError("empty stream: no header row")
    header = [cell.strip().lstrip("﻿") for cell in rows[0]]
    lowered = [cell.lower() for cell in header]

    index: dict[str, int] = {}
    for field in required:
        wanted = [header_map[field].lower()] if header_map and field in header_map else []
        wanted += [alias for alias in DEFAULT_HEADER_ALIASES[field]]
        for candidate in wanted:
            if candidate in lowered:
                index[field] = lowered.index(candidate)
                break
        else:
            raise IngestError(f"missing required header column: {field}")
    return rows[1:], index


def parse_entities(csv_stream: IO, header_map: dict[str, str] | None = None) -> list[Entity]:
    """Parse the entity registry; drops rows without an ipa_code, keeps first duplicate."""
    rows, idx = _open_table(
        csv_stream, ("ipa_code", "name", "category_code", "website_url"), header_map
    )
    entities: list[Entity] = []
    seen: set[str] = set()
    dropped_missing = 0
    dropped_duplicate = 0
    for row in rows:
        if not any(cell.strip() for cell in row):
            continue

        def cell(field: str) -> str:
            i = idx[field]
            return row[i].strip() if i < len(row) else ""

        code = cell("ipa_code")
        if not code:
            dropped_missing += 1
            continue
        if code in seen:
            dropped_duplicate += 1
            log.warning("duplicate ipa_code %r: keeping first occurrence", code)
            continue
        seen.add(code)
        entities.append(Entity(code, cell("name"), cell("category_code"), cell("website_url")))
    if dropped_missing:
        log.warning("dropped %d row(s) missing ipa_code", dropped_missing)
    if dropped_duplicate:
        log.warning("dropped %d duplicate ipa_code row(s)", dropped_duplicate)
    return entities


def parse_categories(csv_stream: IO, header_map: dict[str, str] | None = None) -> list[Category]:
    """Parse the category registry; on duplicate codes the last occurrence wins."""
    rows, idx = _open_table(csv_stream, ("category_code", "category_name"), header_map)
    by_code: dict[str, Category] = {}
    for row in rows:
        if not any(cell.strip() for cell in row):
            continue
        code = row[idx["category_code"]].strip() if idx["category_code"] < len(row) else ""
        name = row[idx["category_name"]].strip() if idx["category_name"] < len(row) else ""
        if not code:
            continue
        if code in by_code:
            log.warning("duplicate category_code %r: last occurrence wins", code)
        by_code[code] = Category(code, name)
    return list(by_code.values())


def join_entities(entities: list[Entity], categories: list[Category]) -> list[EnrichedEntity]:
    """Left join of entities onto categories; unresolved codes become UNKNOWN."""
    names = {c.category_code: c.category_name for c in categories}
    joined: list[EnrichedEntity] = []
    for e in entities:
        name = names.get(e.category_code)
        if name is None:
            log.warning("entity %s: category code %r not in category file", e.ipa_code, e.category_code)
            name = "UNKNOWN"
        joined.append(EnrichedEntity(e.ipa_code, e.name, e.category_code, name, e.website_url))
    return joined


_WEB_SCHEMES = ("http", "https")
_HOST_OK_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789.-_")


def _host_acceptable(host: str) -> bool:
    if not host or host != host.strip("."):
        return False
    if all(ch in _HOST_OK_CHARS for ch in host):
        return ".." not in host
    try:
        host.encode("idna")
    except UnicodeError:
        return False
    return True


def _normalize(scheme: str, parsed) -> str | None:
    host = parsed.hostname
    if host is not None:
        host = host.rstrip(".")
    if not host or not _host_acceptable(host):
        return None
    netloc = host
    if parsed.port is not None:
        netloc = f"{host}:{parsed.port}"
    if parsed.username is not None:
        userinfo = parsed.username if parsed.password is None else f"{parsed.username}:{parsed.password}"
        netloc = f"{userinfo}@{netloc}"
    return urlunsplit((scheme, netloc, parsed.path, parsed.query, parsed.fragment))


def validate_url(raw: str) -> UrlValidation:
    """Classify a raw registry URL and, when usable, return its normalized form.

    Normalization lowercases scheme and host and prefixes "http://" onto
    scheme-less strings that still parse as host[/path].
    """
    text = raw.strip()
    if not text:
        return UrlValidation(UrlVerdict.EMPTY, None, "blank or whitespace-only URL")
    if any(ch.isspace() for ch in text):
        return UrlValidation(UrlVerdict.MALFORMED, None, "whitespace inside URL")

    try:
        parsed = urlsplit(text)
        scheme = parsed.scheme
    except ValueError as exc:
        return UrlValidation(UrlVerdict.MALFORMED, None, f"unparseable: {exc}")

    # "comune.example.it:8080/x" parses with scheme "comune.example.it"; a dot in
    # the scheme position means this is really a scheme-less host.
    if scheme and "." in scheme:
        scheme = ""

    if scheme in _WEB_SCHEMES:
        try:
            if not parsed.netloc and parsed.path:
                # tolerate "http:/host/x" and "http:host" typos
                parsed = urlsplit(f"{scheme}://{parsed.path.lstrip('/')}")
            normalized = _normalize(scheme, parsed)
        except ValueError as exc:
            return UrlValidation(UrlVerdict.MALFORMED, None, f"unparseable: {exc}")
        if normalized is None:
            return UrlValidation(UrlVerdict.MALFORMED, None, "no usable hostname")
        return UrlValidation(UrlVerdict.VALID, normalized, "")

    if scheme:
        return UrlValidation(UrlVerdict.INVALID_SCHEME, None, f"unsupported scheme {scheme!r}")

    # No scheme: default to http:// when the string parses as host[/path].
    candidate = text[2:] if text.startswith("//") else text
    try:
        reparsed = urlsplit(f"http://{candidate}")
        normalized = _normalize("http", reparsed)
    except ValueError as exc:
        return UrlValidation(UrlVerdict.MALFORMED, None, f"unparseable: {exc}")
    if normalized is None:
        return UrlValidation(UrlVerdict.MALFORMED, None, "no usable hostname")
    return UrlValidation(UrlVerdict.VALID, normalized, "")


def write_scan_input(entities: list[EnrichedEntity], out: IO) -> None:
    """Serialize joined entities as the scan-input CSV (fixed column order)."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCAN_INPUT_COLUMNS)
    for e in entities:
        writer.writerow([e.ipa_code, e.name, e.category_code, e.category_name, e.website_url])


def read_scan_input(stream: IO) -> list[EnrichedEntity]:
    """Read a scan-input CSV produced by write_scan_input (or an equivalent join)."""
    rows, idx = _open_table(
        stream, ("ipa_code", "name", "category_code", "category_name", "website_url"), None
    )
    out: list[EnrichedEntity] = []
    for row in rows:
        if not any(cell.strip() for cell in row):
            continue
        values = {f: (row[i].strip() if i < len(row) else "") for f, i in idx.items()}
        if not values["ipa_code"]:
            continue
        out.append(EnrichedEntity(**values))
    return out
