"""Turn captured requests into attributed bad requests and entity statuses."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from .blacklist import Attribution, Blacklist, MatchResult, ServiceType, match_url
from .capture import CaptureOutcome, CaptureResult, CapturedRequest, ResourceHint
from .registry import EnrichedEntity

log = logging.getLogger(__name__)

UNKNOWN_COMPANY = "UNKNOWN"
UNKNOWN_COUNTRY = "??"


class EntityVerdict(str, Enum):
    GOOD = "GOOD"
    BAD = "BAD"
    ERROR = "ERROR"


@dataclass(frozen=True)
class BadRequest:
    ipa_code: str
    entity_name: str
    category_name: str
    request_url: str
    matched_pattern: str
    group_name: str
    company: str
    country: str
    service_type: ServiceType
    resource_hint: ResourceHint
    observed_at: datetime


@dataclass(frozen=True)
class EntityStatus:
    ipa_code: str
    status: EntityVerdict
    bad_request_count: int
    error_message: str | None


def resolve_attribution(group_name: str, attribution: dict[str, Attribution]) -> Attribution:
    """Attribution for a group; evidence is never dropped for a missing row."""
    found = attribution.get(group_name)
    if found is not None:
        return found
    log.warning("no attribution for blacklist group %r; recording as UNKNOWN", group_name)
    return Attribution(group_name, UNKNOWN_COMPANY, UNKNOWN_COUNTRY, ServiceType.OTHER)


def flag_request(
    request: CapturedRequest,
    match: MatchResult,
    attribution: dict[str, Attribution],
    entity: EnrichedEntity | None = None,
) -> BadRequest:
    """Build the fully attributed record for one matched request."""
    attr = resolve_attribution(match.group_name, attribution)
    return BadRequest(
        ipa_code=entity.ipa_code if entity else "",
        entity_name=entity.name if entity else "",
        category_name=entity.category_name if entity else "",
        request_url=request.request_url,
        matched_pattern=match.matched_pattern,
        group_name=match.group_name,
        company=attr.company,
        country=attr.country,
        service_type=attr.service_type,
        resource_hint=request.resource_hint,
        observed_at=request.observed_at,
    )


def classify_requests(
    entity: EnrichedEntity,
    capture: CaptureResult,
    blacklist: Blacklist,
    attribution: dict[str, Attribution],
) -> tuple[EntityStatus, list[BadRequest]]:
    """Classify one entity's capture into a status and its attributed bad requests."""
    if capture.outcome is CaptureOutcome.ERROR:
        status = EntityStatus(entity.ipa_code, EntityVerdict.ERROR, 0, capture.error_message)
        return status, []

    flagged: list[BadRequest] = []
    for request in capture.requests:
        match = match_url(request.request_url, blacklist)
        if match is not None:
            flagged.append(flag_request(request, match, attribution, entity))

    verdict = EntityVerdict.BAD if flagged else EntityVerdict.GOOD
    return EntityStatus(entity.ipa_code, verdict, len(flagged), None), flagged
