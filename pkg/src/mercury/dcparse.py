"""Dublin Core (+ spatiotemporal coverage) payload parsing.

Input profile is unqualified Dublin Core as every OAI-PMH provider can emit
it, plus a small extension namespace for measured attributes and lineage.
Parsing is total over well-formed XML: problems become warnings on the
draft, never fatal errors.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from .model import (
    Attribute,
    SpatialExtent,
    TemporalExtent,
    ValidationError,
    day_end,
    day_start,
    normalize_bbox,
    parse_instant,
)
from .oai import RawRecord

DC_NS = "http://purl.org/dc/elements/1.1/"
OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"

# Extension namespace for attribute/lineage elements; shared bit-exact with
# the mock provider's emitter.
EXTENSION_NS = "urn:mercury-harvest:profile:1"

_LIMIT_NAMES = ("northlimit", "southlimit", "westlimit", "eastlimit")
_DATE_RE = r"\d{4}-\d{2}-\d{2}"
_INSTANT_RE = _DATE_RE + r"T\d{2}:\d{2}:\d{2}Z"
_SINGLE_DAY_RE = re.compile(rf"^{_DATE_RE}$")
_INTERVAL_RE = re.compile(rf"^({_DATE_RE}|{_INSTANT_RE})/({_DATE_RE}|{_INSTANT_RE})$")


class MetadataXmlError(ValueError):
    """The record payload is not well-formed XML."""


class CoverageShapeError(ValueError):
    """A coverage string does not match any accepted shape."""


@dataclass
class DraftRecord:
    """A provider-agnostic record before ids are assigned by the harvester."""

    local_identifier: str
    datestamp: datetime
    deleted: bool = False
    title: str = ""
    abstract: str = ""
    keywords: tuple[str, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    lineage: str = ""
    spatial: Optional[SpatialExtent] = None
    temporal: Optional[TemporalExtent] = None
    source_url: Optional[str] = None
    parse_warnings: list[str] = field(default_factory=list)


def parse_temporal(text: str) -> TemporalExtent:
    """Parse a temporal coverage string.

    Accepted shapes: "YYYY-MM-DD/YYYY-MM-DD" (dates expand to day bounds,
    full instants taken as-is), a single "YYYY-MM-DD", and the name-value
    form "start=...; end=...".
    """
    value = text.strip()
    if _SINGLE_DAY_RE.match(value):
        return TemporalExtent(start=day_start(value), end=day_end(value))
    m = _INTERVAL_RE.match(value)
    if m:
        return _make_interval(m.group(1), m.group(2))
    pairs = _name_value_pairs(value)
    if pairs is not None and "start" in pairs and "end" in pairs:
        return _make_interval(pairs["start"], pairs["end"])
    raise CoverageShapeError(f"unrecognized temporal coverage: {text!r}")


def _make_interval(start_text: str, end_text: str) -> TemporalExtent:
    start = day_start(start_text) if re.fullmatch(_DATE_RE, start_text) else parse_instant(start_text)
    end = day_end(end_text) if re.fullmatch(_DATE_RE, end_text) else parse_instant(end_text)
    if start > end:
        raise ValidationError(f"temporal start > end: {start_text} > {end_text}")
    return TemporalExtent(start=start, end=end)


def parse_spatial(text: str) -> SpatialExtent:
    """Parse a DCMI-Box-style coverage: "northlimit=N; southlimit=S; ...".

    Names are case-insensitive and order-free; extra pairs are ignored.
    """
    pairs = _name_value_pairs(text)
    if pairs is None:
        raise CoverageShapeError(f"unrecognized spatial coverage: {text!r}")
    missing = [name for name in _LIMIT_NAMES if name not in pairs]
    if missing:
        raise CoverageShapeError(f"spatial coverage missing {', '.join(missing)}: {text!r}")
    try:
        west = float(pairs["westlimit"])
        south = float(pairs["southlimit"])
        east = float(pairs["eastlimit"])
        north = float(pairs["northlimit"])
    except ValueError:
        raise CoverageShapeError(f"non-numeric limit in spatial coverage: {text!r}")
    return normalize_bbox(west, south, east, north)


def _name_value_pairs(text: str) -> Optional[dict[str, str]]:
    """Split "name=value; name=value" text; None when nothing matches."""
    pairs: dict[str, str] = {}
    for piece in text.split(";"):
        piece = piece.strip()
        if not piece:
            continue
        if "=" not in piece:
            return None
        name, _, value = piece.partition("=")
        pairs[name.strip().lower()] = value.strip()
    return pairs or None


def parse_record(raw: RawRecord) -> DraftRecord:
    """Map a raw record's DC payload onto a draft record.

    Total over well-formed payloads: anything unrecognized or repeated
    lands in parse_warnings rather than failing.
    """
    if raw.deleted:
        raise ValueError("cannot parse a deleted record (no metadata payload)")
    if raw.metadata_xml is None:
        raise ValueError("raw record has no metadata payload")
    try:
        root = ET.fromstring(raw.metadata_xml)
    except ET.ParseError as exc:
        raise MetadataXmlError(f"malformed metadata payload: {exc}") from exc

    draft = DraftRecord(local_identifier=raw.identifier, datestamp=raw.datestamp,
                        deleted=raw.deleted)
    descriptions: list[str] = []
    keywords: list[str] = []
    attributes: list[Attribute] = []

    for el in root.iter():
        text = (el.text or "").strip()
        if el.tag == f"{{{DC_NS}}}title":
            if not draft.title:
                draft.title = text
            elif text:
                draft.parse_warnings.append(f"extra title ignored: {text!r}")
        elif el.tag == f"{{{DC_NS}}}description":
            if text:
                descriptions.append(text)
        elif el.tag == f"{{{DC_NS}}}subject":
            if text and text not in keywords:
                keywords.append(text)
        elif el.tag == f"{{{DC_NS}}}coverage":
            _dispatch_coverage(text, draft)
        elif el.tag in (f"{{{DC_NS}}}source", f"{{{DC_NS}}}identifier"):
            if draft.source_url is None and _is_url(text):
                draft.source_url = text
        elif el.tag == f"{{{EXTENSION_NS}}}attribute":
            attr = _parse_attribute(el, draft.parse_warnings)
            if attr is not None:
                attributes.append(attr)
        elif el.tag == f"{{{EXTENSION_NS}}}lineage":
            if not draft.lineage:
                draft.lineage = text
            elif text:
                draft.parse_warnings.append("extra lineage ignored")

    draft.abstract = "\n\n".join(descriptions)
    draft.keywords = tuple(keywords)
    draft.attributes = tuple(attributes)
    if not draft.title:
        draft.parse_warnings.append("missing title")
    return draft


def _dispatch_coverage(text: str, draft: DraftRecord) -> None:
    """Route an untyped dc:coverage value to the spatial or temporal field."""
    lowered = text.lower()
    if any(name + "=" in lowered for name in _LIMIT_NAMES):
        try:
            box = parse_spatial(text)
        except (CoverageShapeError, ValidationError) as exc:
            draft.parse_warnings.append(f"bad spatial coverage: {exc}")
            return
        if draft.spatial is None:
            draft.spatial = box
        else:
            draft.parse_warnings.append(f"extra spatial coverage ignored: {text!r}")
        return
    try:
        interval = parse_temporal(text)
    except CoverageShapeError:
        draft.parse_warnings.append(f"unrecognized coverage: {text!r}")
        return
    except ValidationError as exc:
        draft.parse_warnings.append(f"bad temporal coverage: {exc}")
        return
    if draft.temporal is None:
        draft.temporal = interval
    else:
        draft.parse_warnings.append(f"extra temporal coverage ignored: {text!r}")


def _parse_attribute(el: ET.Element, warnings: list[str]) -> Optional[Attribute]:
    fields = {}
    for child in el:
        local = child.tag.rsplit("}", 1)[-1]
        fields[local] = (child.text or "").strip()
    name = fields.get("name", "")
    if not name:
        warnings.append("attribute without a name ignored")
        return None
    return Attribute(
        name=name,
        unit=fields.get("unit", ""),
        precision=fields.get("precision") or None,
        accuracy=fields.get("accuracy") or None,
    )


def _is_url(text: str) -> bool:
    return text.startswith("http://") or text.startswith("https://")
