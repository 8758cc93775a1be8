"""OAI-PMH 2.0 request building and response-envelope parsing.

Pure protocol layer: no I/O. Shared by the harvester (client side) and the
mock provider (server side), which keeps both ends of the wire honest via
round-trip tests.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional
from urllib.parse import quote

from .model import ValidationError, parse_instant

OAI_NS = "http://www.openarchives.org/OAI/2.0/"

ERROR_CODES = frozenset({
    "badArgument", "badResumptionToken", "badVerb", "cannotDisseminateFormat",
    "idDoesNotExist", "noRecordsMatch", "noMetadataFormats", "noSetHierarchy",
})

ARGUMENT_NAMES = frozenset({
    "metadataPrefix", "from", "until", "set", "identifier", "resumptionToken",
})


class Verb(str, Enum):
    IDENTIFY = "Identify"
    LIST_METADATA_FORMATS = "ListMetadataFormats"
    LIST_SETS = "ListSets"
    LIST_IDENTIFIERS = "ListIdentifiers"
    LIST_RECORDS = "ListRecords"
    GET_RECORD = "GetRecord"


# Per-verb argument legality: (required, optional, token allowed).
_VERB_ARGS: dict[Verb, tuple[frozenset, frozenset, bool]] = {
    Verb.IDENTIFY: (frozenset(), frozenset(), False),
    Verb.LIST_METADATA_FORMATS: (frozenset(), frozenset({"identifier"}), False),
    Verb.LIST_SETS: (frozenset(), frozenset(), True),
    Verb.LIST_IDENTIFIERS: (frozenset({"metadataPrefix"}), frozenset({"from", "until", "set"}), True),
    Verb.LIST_RECORDS: (frozenset({"metadataPrefix"}), frozenset({"from", "until", "set"}), True),
    Verb.GET_RECORD: (frozenset({"identifier", "metadataPrefix"}), frozenset(), False),
}

# Verbs whose responses may carry a resumption token.
_LIST_KINDS = frozenset({"sets", "identifiers", "records"})


class ProtocolUsageError(ValueError):
    """Illegal verb/argument combination or misuse of a parsed envelope."""


class EnvelopeParseError(ValueError):
    """Response is not well-formed XML."""

    def __init__(self, message: str, byte_offset: Optional[int] = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class EnvelopeStructureError(ValueError):
    """Well-formed XML that does not match the protocol schema."""

    def __init__(self, message: str, missing: Optional[str] = None):
        super().__init__(message)
        self.missing = missing


@dataclass(frozen=True)
class HarvestRequest:
    base_url: str
    verb: Verb
    arguments: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ResumptionToken:
    token: str
    complete_list_size: Optional[int] = None
    cursor: Optional[int] = None


@dataclass(frozen=True)
class OaiError:
    code: str
    message: str


@dataclass(frozen=True)
class RawRecord:
    identifier: str
    datestamp: datetime
    set_specs: tuple[str, ...] = ()
    deleted: bool = False
    metadata_xml: Optional[str] = None


@dataclass(frozen=True)
class IdentifyInfo:
    repository_name: str = ""
    base_url: str = ""
    protocol_version: str = ""
    earliest_datestamp: str = ""
    deleted_record: str = ""
    granularity: str = ""
    admin_emails: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetadataFormat:
    prefix: str
    schema: str = ""
    namespace: str = ""


@dataclass(frozen=True)
class SetInfo:
    spec: str
    name: str = ""


@dataclass(frozen=True)
class OaiEnvelope:
    response_date: datetime
    request_echo: str
    payload_kind: str  # identify | formats | sets | identifiers | records | record | error
    identify_info: Optional[IdentifyInfo] = None
    format_list: Optional[tuple[MetadataFormat, ...]] = None
    set_list: Optional[tuple[SetInfo, ...]] = None
    record_list: Optional[tuple[RawRecord, ...]] = None
    single_record: Optional[RawRecord] = None
    error: Optional[OaiError] = None
    resumption: Optional[ResumptionToken] = None


# ---------------------------------------------------------------------------
# Request building
# ---------------------------------------------------------------------------

def build_request(request: HarvestRequest) -> str:
    """Build the GET URL for a request, enforcing per-verb argument rules."""
    names = [name for name, _ in request.arguments]
    for name in names:
        if name not in ARGUMENT_NAMES:
            raise ProtocolUsageError(f"unknown argument: {name}")
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise ProtocolUsageError(f"duplicate argument: {sorted(dupes)[0]}")

    required, optional, token_ok = _VERB_ARGS[request.verb]
    if "resumptionToken" in names:
        if not token_ok:
            raise ProtocolUsageError(
                f"resumptionToken not allowed with verb {request.verb.value}")
        if len(names) > 1:
            others = [n for n in names if n != "resumptionToken"]
            raise ProtocolUsageError(
                f"resumptionToken is exclusive; also got: {others[0]}")
    else:
        for name in required:
            if name not in names:
                raise ProtocolUsageError(
                    f"missing required argument {name} for verb {request.verb.value}")
        for name in names:
            if name not in required and name not in optional:
                raise ProtocolUsageError(
                    f"argument {name} not allowed with verb {request.verb.value}")

    parts = [f"verb={request.verb.value}"]
    for name, value in request.arguments:
        parts.append(f"{name}={quote(str(value), safe='')}")
    return request.base_url + "?" + "&".join(parts)


# ---------------------------------------------------------------------------
# Envelope parsing
# ---------------------------------------------------------------------------

def parse_envelope(xml_text: str | bytes) -> OaiEnvelope:
    """Parse a protocol response into an :class:`OaiEnvelope`.

    Raises :class:`EnvelopeParseError` (with a best-effort byte offset) for
    malformed XML and :class:`EnvelopeStructureError` for well-formed XML
    that is missing required protocol elements or uses unknown error codes.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise EnvelopeParseError(
            f"malformed XML at byte {_byte_offset(xml_text, exc)}: {exc}",
            byte_offset=_byte_offset(xml_text, exc),
        ) from exc
    except (ValueError, LookupError) as exc:
        # e.g. str input with an encoding declaration, or an unknown/garbled
        # encoding name in the XML declaration of a bytes input
        raise EnvelopeParseError(f"malformed XML: {exc}", byte_offset=0) from exc

    if root.tag != f"{{{OAI_NS}}}OAI-PMH":
        raise EnvelopeStructureError("missing element: OAI-PMH", missing="OAI-PMH")

    response_date_el = root.find(f"{{{OAI_NS}}}responseDate")
    if response_date_el is None or not (response_date_el.text or "").strip():
        raise EnvelopeStructureError("missing element: responseDate", missing="responseDate")
    try:
        response_date = parse_instant(response_date_el.text.strip())
    except ValidationError:
        raise EnvelopeStructureError("missing element: responseDate", missing="responseDate")

    request_el = root.find(f"{{{OAI_NS}}}request")
    if request_el is None:
        raise EnvelopeStructureError("missing element: request", missing="request")
    request_echo = (request_el.text or "").strip()

    error_el = root.find(f"{{{OAI_NS}}}error")
    if error_el is not None:
        code = error_el.get("code", "")
        if code not in ERROR_CODES:
            raise EnvelopeStructureError(f"unknown error code: {code!r}", missing="error@code")
        return OaiEnvelope(
            response_date=response_date,
            request_echo=request_echo,
            payload_kind="error",
            error=OaiError(code=code, message=(error_el.text or "").strip()),
        )

    for verb, kind in (
        (Verb.IDENTIFY, "identify"),
        (Verb.LIST_METADATA_FORMATS, "formats"),
        (Verb.LIST_SETS, "sets"),
        (Verb.LIST_IDENTIFIERS, "identifiers"),
        (Verb.LIST_RECORDS, "records"),
        (Verb.GET_RECORD, "record"),
    ):
        payload_el = root.find(f"{{{OAI_NS}}}{verb.value}")
        if payload_el is not None:
            return _parse_payload(payload_el, kind, response_date, request_echo)

    expected = request_el.get("verb") or "payload"
    raise EnvelopeStructureError(f"missing element: {expected}", missing=expected)


def next_page(envelope: OaiEnvelope) -> Optional[ResumptionToken]:
    """The paging cursor from a List* envelope, or None when complete."""
    if envelope.payload_kind not in _LIST_KINDS:
        raise ProtocolUsageError(
            f"next_page on non-list payload: {envelope.payload_kind}")
    return envelope.resumption


def _parse_payload(el: ET.Element, kind: str, response_date: datetime,
                   request_echo: str) -> OaiEnvelope:
    resumption = _parse_resumption(el) if kind in _LIST_KINDS else None
    common = dict(response_date=response_date, request_echo=request_echo,
                  payload_kind=kind, resumption=resumption)

    if kind == "identify":
        return OaiEnvelope(identify_info=_parse_identify(el), **common)
    if kind == "formats":
        formats = tuple(
            MetadataFormat(
                prefix=_child_text(f, "metadataPrefix"),
                schema=_child_text(f, "schema"),
                namespace=_child_text(f, "metadataNamespace"),
            )
            for f in el.findall(f"{{{OAI_NS}}}metadataFormat")
        )
        return OaiEnvelope(format_list=formats, **common)
    if kind == "sets":
        sets = tuple(
            SetInfo(spec=_child_text(s, "setSpec"), name=_child_text(s, "setName"))
            for s in el.findall(f"{{{OAI_NS}}}set")
        )
        return OaiEnvelope(set_list=sets, **common)
    if kind == "identifiers":
        records = tuple(
            _parse_header(h, metadata_xml=None)
            for h in el.findall(f"{{{OAI_NS}}}header")
        )
        return OaiEnvelope(record_list=records, **common)
    if kind == "records":
        records = tuple(_parse_record_el(r) for r in el.findall(f"{{{OAI_NS}}}record"))
        return OaiEnvelope(record_list=records, **common)
    if kind == "record":
        record_el = el.find(f"{{{OAI_NS}}}record")
        if record_el is None:
            raise EnvelopeStructureError("missing element: record", missing="record")
        return OaiEnvelope(single_record=_parse_record_el(record_el), **common)
    raise AssertionError(kind)


def _parse_identify(el: ET.Element) -> IdentifyInfo:
    return IdentifyInfo(
        repository_name=_child_text(el, "repositoryName"),
        base_url=_child_text(el, "baseURL"),
        protocol_version=_child_text(el, "protocolVersion"),
        earliest_datestamp=_child_text(el, "earliestDatestamp"),
        deleted_record=_child_text(el, "deletedRecord"),
        granularity=_child_text(el, "granularity"),
        admin_emails=tuple(
            (e.text or "").strip() for e in el.findall(f"{{{OAI_NS}}}adminEmail")
        ),
    )


def _parse_record_el(record_el: ET.Element) -> RawRecord:
    header_el = record_el.find(f"{{{OAI_NS}}}header")
    if header_el is None:
        raise EnvelopeStructureError("missing element: header", missing="header")
    metadata_el = record_el.find(f"{{{OAI_NS}}}metadata")
    deleted = header_el.get("status") == "deleted"
    metadata_xml: Optional[str] = None
    if not deleted:
        if metadata_el is None or len(metadata_el) == 0:
            raise EnvelopeStructureError("missing element: metadata", missing="metadata")
        # Serialize the payload subtree; ET re-declares any namespaces it
        # uses, so the fragment stays independently parseable.
        metadata_xml = ET.tostring(metadata_el[0], encoding="unicode")
    return _parse_header(header_el, metadata_xml=metadata_xml)


def _parse_header(header_el: ET.Element, metadata_xml: Optional[str]) -> RawRecord:
    identifier = _child_text(header_el, "identifier")
    if not identifier:
        raise EnvelopeStructureError("missing element: identifier", missing="identifier")
    datestamp_text = _child_text(header_el, "datestamp")
    if not datestamp_text:
        raise EnvelopeStructureError("missing element: datestamp", missing="datestamp")
    try:
        datestamp = parse_instant(datestamp_text)
    except ValidationError:
        raise EnvelopeStructureError("missing element: datestamp", missing="datestamp")
    return RawRecord(
        identifier=identifier,
        datestamp=datestamp,
        set_specs=tuple(
            (s.text or "").strip() for s in header_el.findall(f"{{{OAI_NS}}}setSpec")
        ),
        deleted=header_el.get("status") == "deleted",
        metadata_xml=metadata_xml,
    )


def _parse_resumption(el: ET.Element) -> Optional[ResumptionToken]:
    token_el = el.find(f"{{{OAI_NS}}}resumptionToken")
    if token_el is None:
        return None
    token = (token_el.text or "").strip()
    if not token:
        return None  # empty element means the list is complete
    return ResumptionToken(
        token=token,
        complete_list_size=_int_attr(token_el, "completeListSize"),
        cursor=_int_attr(token_el, "cursor"),
    )


def _child_text(el: ET.Element, name: str) -> str:
    child = el.find(f"{{{OAI_NS}}}{name}")
    return (child.text or "").strip() if child is not None else ""


def _int_attr(el: ET.Element, name: str) -> Optional[int]:
    raw = el.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


def _byte_offset(xml_text: str | bytes, exc: ET.ParseError) -> int:
    line, column = getattr(exc, "position", (1, 0))
    if isinstance(xml_text, str):
        data = xml_text.encode("utf-8", errors="replace")
    else:
        data = xml_text
    lines = data.split(b"\n")
    prior = sum(len(l) + 1 for l in lines[: line - 1])
    return prior + column
