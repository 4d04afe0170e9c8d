"""Grouped non-EEA domain blacklist: loading, attribution, longest-match queries."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import IO
from urllib.parse import urlsplit

log = logging.getLogger(__name__)


class BlacklistError(Exception):
    """Fatal problem loading the blacklist or attribution table."""


class ServiceType(str, Enum):
    CLOUD = "CLOUD"
    CDN = "CDN"
    SOCIAL_MULTIMEDIA = "SOCIAL_MULTIMEDIA"
    OTHER = "OTHER"


@dataclass(frozen=True)
class Attribution:
    group_name: str
    company: str
    country: str
    service_type: ServiceType


@dataclass(frozen=True)
class MatchResult:
    matched_pattern: str
    group_name: str
    match_length: int


class _Node:
    __slots__ = ("children", "pattern", "group")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.pattern: str | None = None
        self.group: str | None = None


class Blacklist:
    """Domain groups indexed by a reversed-label trie for longest-match lookups."""

    def __init__(self, groups: dict[str, set[str]]):
        self.groups = groups
        self._root = _Node()
        self._group_of: dict[str, str] = {}
        for group, patterns in groups.items():
            for pattern in patterns:
                self._group_of[pattern] = group
                node = self._root
                for label in reversed(pattern.split(".")):
                    node = node.children.setdefault(label, _Node())
                node.pattern = pattern
                node.group = group

    def __len__(self) -> int:
        return len(self._group_of)

    @property
    def patterns(self) -> dict[str, str]:
        """pattern -> group_name for every pattern in the blacklist."""
        return dict(self._group_of)

    def match_hostname(self, hostname: str) -> MatchResult | None:
        """Longest pattern that equals the hostname or is a label-boundary suffix of it."""
        node = self._root
        best: _Node | None = None
        for label in reversed(hostname.split(".")):
            node = node.children.get(label)
            if node is None:
                break
            if node.pattern is not None:
                best = node
        if best is None:
            return None
        return MatchResult(best.pattern, best.group, len(best.pattern))


def _check_pattern(pattern: str, group: str) -> str:
    cleaned = pattern.strip().lower().rstrip(".")
    if not cleaned:
        raise BlacklistError(f"group {group!r}: empty domain pattern")
    if "/" in cleaned or ":" in cleaned:
        raise BlacklistError(f"group {group!r}: pattern {pattern!r} must be a bare domain")
    if "." not in cleaned:
        raise BlacklistError(f"group {group!r}: pattern {pattern!r} has no dot")
    return cleaned


def load_blacklist(json_stream: IO) -> Blacklist:
    """Load the group -> [domains] JSON object into an indexed Blacklist."""
    try:
        data = json.load(json_stream)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BlacklistError(f"malformed blacklist JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise BlacklistError("blacklist must be a JSON object of group -> [domains]")
    if not data:
        log.warning("blacklist is empty: every scan will come back clean")

    groups: dict[str, set[str]] = {}
    owner: dict[str, str] = {}
    for group, patterns in data.items():
        if not group:
            raise BlacklistError("blacklist contains an empty group name")
        if not isinstance(patterns, list) or not all(isinstance(p, str) for p in patterns):
            raise BlacklistError(f"group {group!r}: expected an array of domain strings")
        bucket = groups.setdefault(group, set())
        for raw in patterns:
            pattern = _check_pattern(raw, group)
            if pattern in owner and owner[pattern] != group:
                raise BlacklistError(
                    f"pattern {pattern!r} appears in groups {owner[pattern]!r} and {group!r}"
                )
            owner[pattern] = group
            bucket.add(pattern)
    return Blacklist(groups)


_ATTRIBUTION_COLUMNS = ["group_name", "company", "country", "service_type"]


def load_attribution(table_stream: IO) -> dict[str, Attribution]:
    """Load the group -> company/country/service CSV into an attribution map."""
    data = table_stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    reader = csv.DictReader(io.StringIO(data.lstrip("﻿")))
    header = [h.strip().lower() for h in (reader.fieldnames or [])]
    for column in _ATTRIBUTION_COLUMNS:
        if column not in header:
            raise BlacklistError(f"attribution table: missing column {column!r}")

    out: dict[str, Attribution] = {}
    for row in reader:
        cells = {(k or "").strip().lower(): (v or "").strip() for k, v in row.items()}
        group = cells["group_name"]
        if not group:
            continue
        if group in out:
            raise BlacklistError(f"attribution table: duplicate group_name {group!r}")
        country = cells["country"].upper()
        if len(country) != 2 or not country.isalpha():
            raise BlacklistError(
                f"attribution table: group {group!r} has invalid country code {cells['country']!r}"
            )
        raw_service = cells["service_type"].upper()
        try:
            service = ServiceType(raw_service)
        except ValueError:
            log.warning("group %r: unknown service_type %r, using OTHER", group, raw_service)
            service = ServiceType.OTHER
        out[group] = Attribution(group, cells["company"], country, service)
    return out


def check_attribution_coverage(blacklist: Blacklist, attribution: dict[str, Attribution]) -> None:
    """Warn about groups without attribution and attributions without groups."""
    for group in sorted(set(blacklist.groups) - set(attribution)):
        log.warning("blacklist group %r has no attribution row", group)
    for group in sorted(set(attribution) - set(blacklist.groups)):
        log.warning("attribution row %r does not match any blacklist group", group)


def hostname_of(request_url: str) -> str | None:
    """Extract the lowercase hostname of a URL; None when there is none to extract."""
    try:
        host = urlsplit(request_url).hostname
    except ValueError:
        return None
    if not host:
        return None
    host = host.rstrip(".")
    if not host:
        return None
    try:
        host = host.encode("idna").decode("ascii")
    except UnicodeError:
        pass
    return host


def match_url(request_url: str, blacklist: Blacklist) -> MatchResult | None:
    """Match a request URL's hostname against the blacklist (longest wins)."""
    host = hostname_of(request_url)
    if host is None:
        return None
    return blacklist.match_hostname(host)
