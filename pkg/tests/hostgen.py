"""Deterministic generators for matcher stress tests: pattern pools and
adversarial hostnames (near-misses, case noise, trailing dots)."""

from __future__ import annotations

import random

_WORDS = [
    "youtube", "stream", "cdn", "fonts", "static", "cloud", "pixel", "track",
    "media", "video", "api", "edge", "cache", "img", "ads", "social", "maps",
    "tag", "metrics", "assets", "widget", "embed", "analytics", "login",
]
_TLDS = ["com", "net", "org", "io", "co", "us", "tv", "example"]


def make_pattern_pool(n: int = 200, seed: int = 7) -> dict[str, str]:
    """pattern -> group_name; includes subdomain-of-another-pattern entries."""
    rng = random.Random(seed)
    patterns: dict[str, str] = {}
    while len(patterns) < n:
        word = rng.choice(_WORDS)
        base = f"{word}{rng.randrange(100)}.{rng.choice(_TLDS)}"
        group = f"group-{word}"
        if base not in patterns:
            patterns[base] = group
            # sometimes a longer pattern under the same registrable domain,
            # sometimes under a different group: longest-match bait either way
            if rng.random() < 0.3 and len(patterns) < n:
                deeper = f"{rng.choice(_WORDS)}.{base}"
                patterns.setdefault(deeper, group if rng.random() < 0.5 else f"{group}-sub")
    patterns["youtube.com"] = "group-youtube"
    patterns["youtube.co"] = "group-youtube"
    return patterns


def _mutate_case(host: str, rng: random.Random) -> str:
    return "".join(ch.upper() if rng.random() < 0.3 else ch for ch in host)


def make_hostnames(patterns: dict[str, str], n: int = 10_000, seed: int = 11) -> list[str]:
    rng = random.Random(seed)
    pool = sorted(patterns)
    hosts = ["notyoutube.com", "youtube.com.", "WWW.YOUTUBE.COM", "youtube.com.evil.example"]
    while len(hosts) < n:
        pattern = rng.choice(pool)
        mode = rng.randrange(8)
        if mode == 0:
            host = pattern
        elif mode == 1:
            host = f"{rng.choice(_WORDS)}.{pattern}"
        elif mode == 2:
            host = f"{rng.choice(_WORDS)}.{rng.choice(_WORDS)}{rng.randrange(50)}.{pattern}"
        elif mode == 3:
            host = "not" + pattern  # raw string suffix, not a label-boundary one
        elif mode == 4:
            head, _, _ = pattern.rpartition(".")
            host = f"{head}.{rng.choice(_TLDS)}"  # same name, different TLD
        elif mode == 5:
            host = f"{pattern}.{rng.choice(_WORDS)}.example"  # pattern buried mid-host
        elif mode == 6:
            host = f"{rng.choice(_WORDS)}{rng.randrange(1000)}.{rng.choice(_TLDS)}"
        else:
            host = f"{rng.choice(_WORDS)}.{rng.choice(_WORDS)}.{rng.choice(_TLDS)}"
        if rng.random() < 0.15:
            host = _mutate_case(host, rng)
        if rng.random() < 0.1:
            host += "."
        hosts.append(host)
    return hosts
