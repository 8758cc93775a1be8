"""Canonical metadata record model shared by every provider.

All harvested XML is normalized into :class:`MetadataRecord`. The JSON
serialization produced by :func:`record_to_json` is the wire form used by
both the durable journal and the HTTP API, so field names and instant
formatting here are load-bearing.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional

PROVIDER_KEY_RE = re.compile(r"^[a-z0-9_-]+$")

# Bytes that survive record-id encoding verbatim.
_ID_SAFE = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789._-")


class ValidationError(ValueError):
    """Raised for malformed inputs to constructors/normalizers."""


# ---------------------------------------------------------------------------
# Instants
# ---------------------------------------------------------------------------

def parse_instant(text: str) -> datetime:
    """Parse an RFC 3339 UTC instant or a bare date into an aware datetime.

    "YYYY-MM-DD" is read as midnight UTC. Fractional seconds are accepted
    and truncated; only UTC ("Z" or +00:00) offsets are allowed.
    """
    if not isinstance(text, str) or not text:
        raise ValidationError(f"not an instant: {text!r}")
    value = text.strip()
    if re.fullmatch(r"\d{4}-\d{2}-\d{2}", value):
        date_part, time_part = value, "00:00:00"
    else:
        m = re.fullmatch(
            r"(\d{4}-\d{2}-\d{2})[T ](\d{2}:\d{2}:\d{2})(?:\.(\d+))?(Z|\+00:00)", value
        )
        if not m:
            raise ValidationError(f"not an instant: {text!r}")
        date_part, time_part = m.group(1), m.group(2)
    try:
        dt = datetime.strptime(date_part + "T" + time_part, "%Y-%m-%dT%H:%M:%S")
    except ValueError as exc:  # shape matched but values out of range
        raise ValidationError(f"not an instant: {text!r}") from exc
    return dt.replace(tzinfo=timezone.utc)


def format_instant(dt: datetime) -> str:
    """Format an aware datetime as an RFC 3339 UTC string with seconds."""
    if dt.tzinfo is None:
        raise ValidationError("naive datetime cannot be formatted as UTC instant")
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def day_start(date_text: str) -> datetime:
    return parse_instant(date_text)


def day_end(date_text: str) -> datetime:
    dt = parse_instant(date_text)
    return dt.replace(hour=23, minute=59, second=59)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialExtent:
    """Lat/lon bounding box in degrees; west > east crosses the antimeridian."""

    west: float
    east: float
    south: float
    north: float

    @property
    def crosses_antimeridian(self) -> bool:
        return self.west > self.east


@dataclass(frozen=True)
class TemporalExtent:
    start: datetime
    end: datetime


@dataclass(frozen=True)
class Attribute:
    """A measured attribute: its name, unit, and stated precision/accuracy."""

    name: str
    unit: str = ""
    precision: Optional[str] = None
    accuracy: Optional[str] = None


@dataclass(frozen=True)
class MetadataRecord:
    record_id: str
    provider_key: str
    local_identifier: str
    title: str = ""
    abstract: str = ""
    keywords: tuple[str, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    lineage: str = ""
    spatial: Optional[SpatialExtent] = None
    temporal: Optional[TemporalExtent] = None
    source_url: Optional[str] = None
    datestamp: datetime = field(default_factory=lambda: datetime(1970, 1, 1, tzinfo=timezone.utc))
    deleted: bool = False


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def make_record_id(provider_key: str, local_identifier: str) -> str:
    """Derive the globally unique, URL/file-safe record id.

    Every byte of the UTF-8 identifier outside [A-Za-z0-9._-] is replaced
    with %XX (uppercase hex), so the encoding is injective and stable.
    """
    if not PROVIDER_KEY_RE.fullmatch(provider_key or ""):
        raise ValidationError(f"malformed provider_key: {provider_key!r}")
    if not local_identifier:
        raise ValidationError("empty local_identifier")
    encoded = []
    for byte in local_identifier.encode("utf-8"):
        if byte in _ID_SAFE:
            encoded.append(chr(byte))
        else:
            encoded.append("%%%02X" % byte)
    return provider_key + ":" + "".join(encoded)


def validate_record(record: MetadataRecord) -> list[str]:
    """Check every record invariant; returns all violations (empty = valid).

    Violations are data, not exceptions: callers decide whether to skip,
    warn, or abort.
    """
    violations: list[str] = []

    if not PROVIDER_KEY_RE.fullmatch(record.provider_key or ""):
        violations.append("provider_key malformed")
    elif not record.local_identifier:
        violations.append("local_identifier empty")
    elif record.record_id != make_record_id(record.provider_key, record.local_identifier):
        violations.append("record_id does not match provider_key + local_identifier")

    if not record.deleted and not record.title.strip():
        violations.append("title empty on non-deleted record")

    seen = set()
    for kw in record.keywords:
        if not kw.strip():
            violations.append("keyword empty")
        if kw in seen:
            violations.append(f"keyword duplicated: {kw!r}")
        seen.add(kw)

    for attr in record.attributes:
        if not attr.name.strip():
            violations.append("attribute name empty")

    if record.spatial is not None:
        s = record.spatial
        for name, value in (("west", s.west), ("east", s.east), ("south", s.south), ("north", s.north)):
            if not math.isfinite(value):
                violations.append(f"spatial {name} not finite")
        if abs(s.south) > 90 or abs(s.north) > 90:
            violations.append("latitude out of [-90, 90]")
        if abs(s.west) > 180 or abs(s.east) > 180:
            violations.append("longitude out of [-180, 180]")
        if s.south > s.north:
            violations.append("south ≤ north")

    if record.temporal is not None and record.temporal.start > record.temporal.end:
        violations.append("temporal start ≤ end")

    if record.datestamp.tzinfo is None:
        violations.append("datestamp not timezone-aware")

    return violations


def normalize_bbox(west: float, south: float, east: float, north: float) -> SpatialExtent:
    """Validate a west/south/east/north box and canonicalize ±180 longitudes.

    A box with west > east legally crosses the antimeridian and is kept
    as-is; ±180 is rewritten to -180 (west) / +180 (east) only for
    non-crossing boxes, so crossing status never changes.
    """
    for name, value in (("west", west), ("south", south), ("east", east), ("north", north)):
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValidationError(f"{name} not finite: {value!r}")
    if abs(south) > 90 or abs(north) > 90:
        raise ValidationError(f"latitude out of range: south={south}, north={north}")
    if abs(west) > 180 or abs(east) > 180:
        raise ValidationError(f"longitude out of range: west={west}, east={east}")
    if south > north:
        raise ValidationError(f"south > north: {south} > {north}")
    if west <= east:
        if abs(west) == 180:
            west = -180.0
        if abs(east) == 180:
            east = 180.0
    return SpatialExtent(west=float(west), east=float(east), south=float(south), north=float(north))


# ---------------------------------------------------------------------------
# Canonical JSON serialization (journal and API wire form)
# ---------------------------------------------------------------------------

def record_to_dict(record: MetadataRecord) -> dict[str, Any]:
    """Canonical dict form: declared field order, optionals omitted."""
    out: dict[str, Any] = {
        "record_id": record.record_id,
        "provider_key": record.provider_key,
        "local_identifier": record.local_identifier,
        "title": record.title,
        "abstract": record.abstract,
        "keywords": list(record.keywords),
        "attributes": [_attribute_to_dict(a) for a in record.attributes],
        "lineage": record.lineage,
    }
    if record.spatial is not None:
        out["spatial"] = spatial_to_dict(record.spatial)
    if record.temporal is not None:
        out["temporal"] = temporal_to_dict(record.temporal)
    if record.source_url is not None:
        out["source_url"] = record.source_url
    out["datestamp"] = format_instant(record.datestamp)
    out["deleted"] = record.deleted
    return out


def _attribute_to_dict(attr: Attribute) -> dict[str, str]:
    out = {"name": attr.name, "unit": attr.unit}
    if attr.precision is not None:
        out["precision"] = attr.precision
    if attr.accuracy is not None:
        out["accuracy"] = attr.accuracy
    return out


def spatial_to_dict(extent: SpatialExtent) -> dict[str, float]:
    return {"west": extent.west, "east": extent.east, "south": extent.south, "north": extent.north}


def temporal_to_dict(extent: TemporalExtent) -> dict[str, str]:
    return {"start": format_instant(extent.start), "end": format_instant(extent.end)}


def record_to_json(record: MetadataRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


def record_from_dict(data: dict[str, Any]) -> MetadataRecord:
    spatial = None
    if "spatial" in data:
        s = data["spatial"]
        spatial = SpatialExtent(west=float(s["west"]), east=float(s["east"]),
                                south=float(s["south"]), north=float(s["north"]))
    temporal = None
    if "temporal" in data:
        t = data["temporal"]
        temporal = TemporalExtent(start=parse_instant(t["start"]), end=parse_instant(t["end"]))
    attributes = tuple(
        Attribute(name=a["name"], unit=a.get("unit", ""),
                  precision=a.get("precision"), accuracy=a.get("accuracy"))
        for a in data.get("attributes", ())
    )
    return MetadataRecord(
        record_id=data["record_id"],
        provider_key=data["provider_key"],
        local_identifier=data["local_identifier"],
        title=data.get("title", ""),
        abstract=data.get("abstract", ""),
        keywords=tuple(data.get("keywords", ())),
        attributes=attributes,
        lineage=data.get("lineage", ""),
        spatial=spatial,
        temporal=temporal,
        source_url=data.get("source_url"),
        datestamp=parse_instant(data["datestamp"]),
        deleted=bool(data.get("deleted", False)),
    )


def record_from_json(text: str) -> MetadataRecord:
    return record_from_dict(json.loads(text))
