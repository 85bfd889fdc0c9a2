"""Offline reputation and geolocation lookups from user-supplied CSV maps.

Each file is UTF-8, comma-separated, without a header:

* alexa: ``domain,rank`` (rank a positive integer)
* vt: ``key,count`` where key is a domain or an IPv4 address
* geo: ``ip,region``

Lookups are total: unknown keys fall back to documented defaults.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import ParseError

log = logging.getLogger(__name__)

UNKNOWN_REGION = "UNK"


@dataclass(frozen=True)
class IntelMaps:
    alexa_rank: Mapping[str, int] = field(default_factory=dict)
    vt_detections: Mapping[str, int] = field(default_factory=dict)
    region: Mapping[str, str] = field(default_factory=dict)
    warnings: int = 0

    def regions(self) -> list[str]:
        """Sorted region vocabulary, always including the unknown code."""
        return sorted(set(self.region.values()) | {UNKNOWN_REGION})


def registered_domain(name: str) -> str:
    """Last two labels of ``name``.

    No public-suffix list is consulted, so ``a.b.co.uk`` maps to ``co.uk``.
    """
    labels = name.rstrip(".").split(".")
    return ".".join(labels[-2:])


def _read_csv(path, convert, what: str) -> tuple[dict, int]:
    out: dict = {}
    dupes = 0
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(lineno, f"{what}: expected 2 fields, got {len(row)}")
            key = row[0].strip().lower()
            if not key:
                raise ParseError(lineno, f"{what}: empty key")
            try:
                value = convert(row[1].strip())
            except ValueError as exc:
                raise ParseError(lineno, f"{what}: {exc}") from None
            if key in out:
                dupes += 1
                log.warning("%s:%d duplicate key %r, keeping the later value", path, lineno, key)
            out[key] = value
    return out, dupes


def _rank(text: str) -> int:
    r = int(text)
    if r < 1:
        raise ValueError(f"rank must be positive, got {r}")
    return r


def _count(text: str) -> int:
    c = int(text)
    if c < 0:
        raise ValueError(f"detection count must be non-negative, got {c}")
    return c


def _region(text: str) -> str:
    if not text:
        raise ValueError("empty region code")
    return text


def load_maps(alexa_path: str | Path | None = None, vt_path: str | Path | None = None,
              geo_path: str | Path | None = None) -> IntelMaps:
    """Load the three intel maps; an absent path yields an empty map."""
    alexa, vt, geo = {}, {}, {}
    warnings = 0
    if alexa_path:
        alexa, n = _read_csv(alexa_path, _rank, "alexa")
        warnings += n
    if vt_path:
        vt, n = _read_csv(vt_path, _count, "vt")
        warnings += n
    if geo_path:
        geo, n = _read_csv(geo_path, _region, "geo")
        warnings += n
    return IntelMaps(MappingProxyType(alexa), MappingProxyType(vt),
                     MappingProxyType(geo), warnings)


def _lookup(table: Mapping, name: str):
    if name in table:
        return table[name]
    reg = registered_domain(name)
    return table.get(reg)


def alexa_score(maps: IntelMaps, domain: str | None) -> float:
    """``1/(1+log10(rank))``; unranked or missing domains score 0."""
    if not domain:
        return 0.0
    rank = _lookup(maps.alexa_rank, domain.lower())
    if rank is None:
        return 0.0
    return 1.0 / (1.0 + math.log10(rank))


def vt_score(maps: IntelMaps, key: str | None) -> float:
    """Detection count for a domain (or its registered domain) or an IP; default 0."""
    if not key:
        return 0.0
    key = key.lower()
    hit = maps.vt_detections.get(key)
    if hit is None and not _looks_like_ip(key):
        hit = maps.vt_detections.get(registered_domain(key))
    return float(hit or 0)


def region_code(maps: IntelMaps, ip: str | None) -> str:
    if not ip:
        return UNKNOWN_REGION
    return maps.region.get(ip, UNKNOWN_REGION)


def _looks_like_ip(key: str) -> bool:
    parts = key.split(".")
    return len(parts) == 4 and all(p.isdigit() for p in parts)
