"""A configurable OAI-PMH 2.0 data provider serving a synthetic corpus.

Test fixture for harvester conformance and the demo data source. Responses
are byte-deterministic for a fixed corpus and request sequence: the
response date is pinned by the corpus and resumption tokens are plain
"offset:filter-hash" text.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from .dcparse import EXTENSION_NS
from .model import ValidationError, format_instant, parse_instant
from .oai import ERROR_CODES, OAI_NS, RawRecord

OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
DC_NS = "http://purl.org/dc/elements/1.1/"
OAI_DC_SCHEMA = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd"

DEFAULT_RESPONSE_DATE = "2026-01-01T00:00:00Z"

_XML_DECL = b'<?xml version="1.0" encoding="UTF-8"?>\n'


@dataclass(frozen=True)
class FaultPlan:
    """Scripted, single-shot faults executed deterministically."""

    fail_page_once: Optional[int] = None     # 1-based page that 503s once
    retry_after: Optional[int] = None        # Retry-After header on that 503
    expire_token_once_after: Optional[int] = None  # token past page k fails once


@dataclass(frozen=True)
class CorpusRecord:
    identifier: str
    datestamp: datetime
    deleted: bool = False
    metadata: Optional[dict] = None  # title/description/subjects/coverage/.../lineage

    def __post_init__(self):
        if not self.deleted and self.metadata is None:
            raise ValidationError(f"live record {self.identifier} needs metadata")


@dataclass(frozen=True)
class MockCorpus:
    records: tuple[CorpusRecord, ...]
    page_size: int = 10
    granularity: str = "day"  # day | seconds
    fault_plan: Optional[FaultPlan] = None
    response_date: str = DEFAULT_RESPONSE_DATE

    def __post_init__(self):
        if self.granularity not in ("day", "seconds"):
            raise ValidationError(f"unknown granularity: {self.granularity!r}")
        if self.page_size < 1:
            raise ValidationError("page_size must be >= 1")
        seen = set()
        for record in self.records:
            if record.identifier in seen:
                raise ValidationError(f"duplicate identifier: {record.identifier}")
            seen.add(record.identifier)
            if self.granularity == "day" and record.datestamp != record.datestamp.replace(
                    hour=0, minute=0, second=0, microsecond=0):
                raise ValidationError(
                    f"day-granularity corpus has sub-day datestamp: {record.identifier}")


def format_datestamp(dt: datetime, granularity: str) -> str:
    if granularity == "seconds":
        return format_instant(dt)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%d")


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------

def corpus_to_dict(corpus: MockCorpus) -> dict:
    out: dict = {
        "page_size": corpus.page_size,
        "granularity": corpus.granularity,
        "response_date": corpus.response_date,
        "records": [],
    }
    if corpus.fault_plan is not None:
        plan = {}
        if corpus.fault_plan.fail_page_once is not None:
            plan["fail_page_once"] = corpus.fault_plan.fail_page_once
        if corpus.fault_plan.retry_after is not None:
            plan["retry_after"] = corpus.fault_plan.retry_after
        if corpus.fault_plan.expire_token_once_after is not None:
            plan["expire_token_once_after"] = corpus.fault_plan.expire_token_once_after
        out["fault_plan"] = plan
    for record in corpus.records:
        item: dict = {
            "identifier": record.identifier,
            "datestamp": format_datestamp(record.datestamp, corpus.granularity),
            "deleted": record.deleted,
        }
        if record.metadata is not None:
            item["metadata"] = record.metadata
        out["records"].append(item)
    return out


def corpus_from_dict(data: dict) -> MockCorpus:
    plan = None
    if data.get("fault_plan"):
        raw = data["fault_plan"]
        plan = FaultPlan(
            fail_page_once=raw.get("fail_page_once"),
            retry_after=raw.get("retry_after"),
            expire_token_once_after=raw.get("expire_token_once_after"),
        )
    records = tuple(
        CorpusRecord(
            identifier=item["identifier"],
            datestamp=parse_instant(item["datestamp"]),
            deleted=bool(item.get("deleted", False)),
            metadata=item.get("metadata"),
        )
        for item in data["records"]
    )
    return MockCorpus(
        records=records,
        page_size=int(data.get("page_size", 10)),
        granularity=data.get("granularity", "day"),
        fault_plan=plan,
        response_date=data.get("response_date", DEFAULT_RESPONSE_DATE),
    )


def load_corpus(path: str | Path) -> MockCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        return corpus_from_dict(json.load(fh))


def save_corpus(corpus: MockCorpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus_to_dict(corpus), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# XML emission
# ---------------------------------------------------------------------------

def metadata_element(metadata: dict) -> ET.Element:
    """Build the oai_dc payload (plus extension elements) for one record."""
    dc = ET.Element("oai_dc:dc", {
        "xmlns:oai_dc": OAI_DC_NS,
        "xmlns:dc": DC_NS,
        "xmlns:mh": EXTENSION_NS,
    })
    if metadata.get("title"):
        ET.SubElement(dc, "dc:title").text = metadata["title"]
    if metadata.get("description"):
        ET.SubElement(dc, "dc:description").text = metadata["description"]
    for subject in metadata.get("subjects", ()):
        ET.SubElement(dc, "dc:subject").text = subject
    if metadata.get("coverage_spatial"):
        ET.SubElement(dc, "dc:coverage").text = metadata["coverage_spatial"]
    if metadata.get("coverage_temporal"):
        ET.SubElement(dc, "dc:coverage").text = metadata["coverage_temporal"]
    if metadata.get("source"):
        ET.SubElement(dc, "dc:identifier").text = metadata["source"]
    for attr in metadata.get("attributes", ()):
        attr_el = ET.SubElement(dc, "mh:attribute")
        ET.SubElement(attr_el, "mh:name").text = attr.get("name", "")
        ET.SubElement(attr_el, "mh:unit").text = attr.get("unit", "")
        if attr.get("precision"):
            ET.SubElement(attr_el, "mh:precision").text = attr["precision"]
        if attr.get("accuracy"):
            ET.SubElement(attr_el, "mh:accuracy").text = attr["accuracy"]
    if metadata.get("lineage"):
        ET.SubElement(dc, "mh:lineage").text = metadata["lineage"]
    return dc


def header_element(identifier: str, datestamp_text: str, deleted: bool,
                   set_specs: tuple[str, ...] = ()) -> ET.Element:
    header = ET.Element("header")
    if deleted:
        header.set("status", "deleted")
    ET.SubElement(header, "identifier").text = identifier
    ET.SubElement(header, "datestamp").text = datestamp_text
    for spec in set_specs:
        ET.SubElement(header, "setSpec").text = spec
    return header


def record_element(identifier: str, datestamp_text: str, deleted: bool,
                   metadata_el: Optional[ET.Element],
                   set_specs: tuple[str, ...] = ()) -> ET.Element:
    record = ET.Element("record")
    record.append(header_element(identifier, datestamp_text, deleted, set_specs))
    if not deleted and metadata_el is not None:
        metadata = ET.SubElement(record, "metadata")
        metadata.append(metadata_el)
    return record


def render_envelope(payload: ET.Element, base_url: str, response_date: str,
                    request_attrs: Optional[dict] = None) -> bytes:
    root = ET.Element("OAI-PMH", {"xmlns": OAI_NS})
    ET.SubElement(root, "responseDate").text = response_date
    request = ET.SubElement(root, "request", request_attrs or {})
    request.text = base_url
    root.append(payload)
    return _XML_DECL + ET.tostring(root, encoding="unicode").encode("utf-8")


def render_error(code: str, message: str, base_url: str, response_date: str) -> bytes:
    if code not in ERROR_CODES:
        raise ValueError(f"unknown error code: {code}")
    error = ET.Element("error", {"code": code})
    error.text = message
    return render_envelope(error, base_url, response_date)


def render_list_records(records: list[RawRecord], granularity: str, base_url: str,
                        response_date: str = DEFAULT_RESPONSE_DATE,
                        resumption: Optional[ET.Element] = None,
                        verb: str = "ListRecords") -> bytes:
    """Re-emit parsed raw records; the round-trip counterpart of parse_envelope."""
    payload = ET.Element(verb)
    for raw in records:
        datestamp_text = format_datestamp(raw.datestamp, granularity)
        if verb == "ListIdentifiers":
            payload.append(header_element(raw.identifier, datestamp_text, raw.deleted,
                                          raw.set_specs))
        else:
            metadata_el = None
            if raw.metadata_xml is not None:
                metadata_el = ET.fromstring(raw.metadata_xml)
            payload.append(record_element(raw.identifier, datestamp_text, raw.deleted,
                                          metadata_el, raw.set_specs))
    if resumption is not None:
        payload.append(resumption)
    return render_envelope(payload, base_url, response_date, {"verb": verb})


# ---------------------------------------------------------------------------
# The provider server
# ---------------------------------------------------------------------------

class MockProviderServer:
    """Threaded HTTP server answering all six verbs over an immutable corpus."""

    def __init__(self, corpus: MockCorpus, host: str = "127.0.0.1", port: int = 0,
                 path: str = "/oai"):
        self._corpus_lock = threading.Lock()
        self._corpus = corpus
        self._path = path
        self._fired_503 = False
        self._fired_expiry = False
        self._filters: dict[str, tuple] = {}
        self.requests_served = 0

        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802 (http.server API)
                parts = urlsplit(self.path)
                if parts.path != server._path:
                    self.send_error(404)
                    return
                status, headers, body = server.handle_query(parts.query)
                self.send_response(status)
                for name, value in headers.items():
                    self.send_header(name, value)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: Optional[threading.Thread] = None
        self.host = host
        self.port = self._httpd.server_address[1]
        self.base_url = f"http://{host}:{self.port}{path}"

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "MockProviderServer":
        # short poll interval keeps shutdown() snappy in test suites
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.02), daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "MockProviderServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def set_corpus(self, corpus: MockCorpus) -> None:
        """Swap the corpus atomically; fault counters and tokens reset."""
        with self._corpus_lock:
            self._corpus = corpus
            self._fired_503 = False
            self._fired_expiry = False
            self._filters = {}

    # -- request handling (separable from the socket layer for tests) ------

    def handle_query(self, query_string: str) -> tuple[int, dict, bytes]:
        with self._corpus_lock:
            corpus = self._corpus
            parsed = parse_qs(query_string, keep_blank_values=True)
            params: dict[str, str] = {}
            for name, values in parsed.items():
                if len(values) > 1:
                    return self._error(corpus, "badArgument", f"repeated argument: {name}")
                params[name] = values[0]
            self.requests_served += 1
            return self._dispatch(corpus, params)

    def _dispatch(self, corpus: MockCorpus, params: dict[str, str]) -> tuple[int, dict, bytes]:
        verb = params.pop("verb", None)
        if verb == "Identify":
            return self._identify(corpus, params)
        if verb == "ListMetadataFormats":
            return self._list_metadata_formats(corpus, params)
        if verb == "ListSets":
            return self._error(corpus, "noSetHierarchy", "this repository has no sets")
        if verb in ("ListRecords", "ListIdentifiers"):
            return self._list(corpus, params, verb)
        if verb == "GetRecord":
            return self._get_record(corpus, params)
        return self._error(corpus, "badVerb", f"unknown verb: {verb!r}")

    def _ok(self, corpus: MockCorpus, payload: ET.Element,
            request_attrs: Optional[dict] = None) -> tuple[int, dict, bytes]:
        body = render_envelope(payload, self.base_url, corpus.response_date, request_attrs)
        return 200, {"Content-Type": "text/xml; charset=UTF-8"}, body

    def _error(self, corpus: MockCorpus, code: str, message: str) -> tuple[int, dict, bytes]:
        body = render_error(code, message, self.base_url, corpus.response_date)
        return 200, {"Content-Type": "text/xml; charset=UTF-8"}, body

    def _identify(self, corpus: MockCorpus, params: dict) -> tuple[int, dict, bytes]:
        if params:
            return self._error(corpus, "badArgument",
                               f"Identify takes no arguments: {sorted(params)[0]}")
        payload = ET.Element("Identify")
        ET.SubElement(payload, "repositoryName").text = "Mock Data Provider"
        ET.SubElement(payload, "baseURL").text = self.base_url
        ET.SubElement(payload, "protocolVersion").text = "2.0"
        ET.SubElement(payload, "adminEmail").text = "admin@example.org"
        earliest = min((r.datestamp for r in corpus.records),
                       default=datetime(1970, 1, 1, tzinfo=timezone.utc))
        ET.SubElement(payload, "earliestDatestamp").text = format_datestamp(
            earliest, corpus.granularity)
        ET.SubElement(payload, "deletedRecord").text = "persistent"
        granularity_text = ("YYYY-MM-DDThh:mm:ssZ" if corpus.granularity == "seconds"
                            else "YYYY-MM-DD")
        ET.SubElement(payload, "granularity").text = granularity_text
        return self._ok(corpus, payload, {"verb": "Identify"})

    def _list_metadata_formats(self, corpus: MockCorpus, params: dict) -> tuple[int, dict, bytes]:
        identifier = params.pop("identifier", None)
        if params:
            return self._error(corpus, "badArgument", f"unexpected: {sorted(params)[0]}")
        if identifier is not None and self._find(corpus, identifier) is None:
            return self._error(corpus, "idDoesNotExist", identifier)
        payload = ET.Element("ListMetadataFormats")
        fmt = ET.SubElement(payload, "metadataFormat")
        ET.SubElement(fmt, "metadataPrefix").text = "oai_dc"
        ET.SubElement(fmt, "schema").text = OAI_DC_SCHEMA
        ET.SubElement(fmt, "metadataNamespace").text = OAI_DC_NS
        return self._ok(corpus, payload, {"verb": "ListMetadataFormats"})

    def _get_record(self, corpus: MockCorpus, params: dict) -> tuple[int, dict, bytes]:
        identifier = params.pop("identifier", None)
        prefix = params.pop("metadataPrefix", None)
        if identifier is None:
            return self._error(corpus, "badArgument", "missing identifier")
        if prefix is None:
            return self._error(corpus, "badArgument", "missing metadataPrefix")
        if params:
            return self._error(corpus, "badArgument", f"unexpected: {sorted(params)[0]}")
        if prefix != "oai_dc":
            return self._error(corpus, "cannotDisseminateFormat", prefix)
        record = self._find(corpus, identifier)
        if record is None:
            return self._error(corpus, "idDoesNotExist", identifier)
        payload = ET.Element("GetRecord")
        payload.append(self._record_el(corpus, record))
        return self._ok(corpus, payload, {"verb": "GetRecord"})

    def _list(self, corpus: MockCorpus, params: dict, verb: str) -> tuple[int, dict, bytes]:
        token_text = params.pop("resumptionToken", None)
        if token_text is not None:
            if params:
                return self._error(corpus, "badArgument",
                                   "resumptionToken is an exclusive argument")
            return self._list_from_token(corpus, token_text, verb)

        prefix = params.pop("metadataPrefix", None)
        if prefix is None:
            return self._error(corpus, "badArgument", "missing metadataPrefix")
        if prefix != "oai_dc":
            return self._error(corpus, "cannotDisseminateFormat", prefix)
        from_text = params.pop("from", None)
        until_text = params.pop("until", None)
        if params.pop("set", None) is not None:
            return self._error(corpus, "noSetHierarchy", "this repository has no sets")
        if params:
            return self._error(corpus, "badArgument", f"unexpected: {sorted(params)[0]}")
        try:
            window = _parse_window(from_text, until_text)
        except ValidationError as exc:
            return self._error(corpus, "badArgument", str(exc))
        return self._list_page(corpus, verb, (verb, from_text, until_text), window, 0)

    def _list_from_token(self, corpus: MockCorpus, token_text: str,
                         verb: str) -> tuple[int, dict, bytes]:
        offset_text, _, filter_hash = token_text.partition(":")
        stored = self._filters.get(filter_hash)
        if stored is None or not offset_text.isdigit():
            return self._error(corpus, "badResumptionToken", token_text)
        stored_verb, from_text, until_text = stored
        if stored_verb != verb:
            return self._error(corpus, "badResumptionToken", token_text)
        offset = int(offset_text)
        plan = corpus.fault_plan
        if (plan and plan.expire_token_once_after is not None and not self._fired_expiry
                and offset // corpus.page_size + 1 > plan.expire_token_once_after):
            self._fired_expiry = True
            return self._error(corpus, "badResumptionToken", f"expired: {token_text}")
        window = _parse_window(from_text, until_text)
        return self._list_page(corpus, verb, stored, window, offset)

    def _list_page(self, corpus: MockCorpus, verb: str, filter_key: tuple,
                   window: tuple[datetime, datetime], offset: int) -> tuple[int, dict, bytes]:
        lo, hi = window
        matches = [r for r in corpus.records if lo <= r.datestamp <= hi]
        if not matches:
            return self._error(corpus, "noRecordsMatch", "no records in range")

        page_number = offset // corpus.page_size + 1
        plan = corpus.fault_plan
        if plan and plan.fail_page_once == page_number and not self._fired_503:
            self._fired_503 = True
            headers = {"Content-Type": "text/plain; charset=UTF-8"}
            if plan.retry_after is not None:
                headers["Retry-After"] = str(plan.retry_after)
            return 503, headers, b"scripted transient failure\n"

        page = matches[offset:offset + corpus.page_size]
        payload = ET.Element(verb)
        for record in page:
            if verb == "ListIdentifiers":
                payload.append(header_element(
                    record.identifier,
                    format_datestamp(record.datestamp, corpus.granularity),
                    record.deleted))
            else:
                payload.append(self._record_el(corpus, record))

        next_offset = offset + corpus.page_size
        chunked = len(matches) > corpus.page_size
        if chunked:
            token_el = ET.Element("resumptionToken", {
                "completeListSize": str(len(matches)),
                "cursor": str(offset),
            })
            if next_offset < len(matches):
                filter_hash = _filter_hash(filter_key)
                self._filters[filter_hash] = filter_key
                token_el.text = f"{next_offset}:{filter_hash}"
            payload.append(token_el)
        return self._ok(corpus, payload, {"verb": verb})

    def _record_el(self, corpus: MockCorpus, record: CorpusRecord) -> ET.Element:
        metadata_el = None
        if not record.deleted:
            metadata_el = metadata_element(record.metadata)
        return record_element(
            record.identifier,
            format_datestamp(record.datestamp, corpus.granularity),
            record.deleted,
            metadata_el,
        )

    @staticmethod
    def _find(corpus: MockCorpus, identifier: str) -> Optional[CorpusRecord]:
        for record in corpus.records:
            if record.identifier == identifier:
                return record
        return None


def serve(corpus: MockCorpus, listen_addr: str = "127.0.0.1:0") -> MockProviderServer:
    """Start a provider on host:port (port 0 picks a free one)."""
    host, _, port_text = listen_addr.partition(":")
    server = MockProviderServer(corpus, host=host or "127.0.0.1",
                                port=int(port_text or 0))
    return server.start()


def _filter_hash(filter_key: tuple) -> str:
    material = "|".join("" if part is None else str(part) for part in filter_key)
    return hashlib.sha1(material.encode("utf-8")).hexdigest()[:8]


def _parse_window(from_text: Optional[str],
                  until_text: Optional[str]) -> tuple[datetime, datetime]:
    lo = datetime(1, 1, 1, tzinfo=timezone.utc)
    hi = datetime(9999, 12, 31, 23, 59, 59, tzinfo=timezone.utc)
    if from_text is not None:
        lo = parse_instant(from_text)
    if until_text is not None:
        hi = parse_instant(until_text)
        if len(until_text) == 10:  # bare date: inclusive through end of day
            hi = hi.replace(hour=23, minute=59, second=59)
    if lo > hi:
        raise ValidationError("from is later than until")
    return lo, hi


# ---------------------------------------------------------------------------
# Corpus generation for tests and demos
# ---------------------------------------------------------------------------

_WORDS = (
    "soil carbon flux respiration forest tundra biomass nitrogen methane wetland "
    "canopy albedo snow permafrost phenology drought precipitation temperature "
    "evapotranspiration runoff lidar radiance reflectance chlorophyll plankton "
    "sediment watershed aerosol ozone humidity radiation productivity litterfall"
).split()

_PLACES = (
    "harvard-forest", "barrow", "duke-forest", "cascades", "amazonia", "sahel",
    "mongolia", "patagonia", "svalbard", "okavango",
)

_ATTRIBUTE_POOL = (
    ("air_temperature", "degC"),
    ("soil_moisture", "m3/m3"),
    ("co2_flux", "umol/m2/s"),
    ("precipitation", "mm"),
    ("net_radiation", "W/m2"),
    ("leaf_area_index", ""),
    ("snow_depth", "cm"),
)

_LINEAGE_TEMPLATES = (
    "Measured at {place} with calibrated field sensors and manual QA review.",
    "Derived from satellite retrievals, gridded, then aggregated to site level.",
    "Computed from model reanalysis output blended with in-situ observations.",
    "Acquired during repeated field campaigns at {place}; gap-filled afterwards.",
)


def generate_corpus(seed: int, size: int, *, page_size: int = 10,
                    granularity: str = "day", n_deleted: int = 0,
                    fault_plan: Optional[FaultPlan] = None) -> MockCorpus:
    """Deterministic synthetic corpus; the seed fully determines the bytes.

    Datestamps increase strictly with record index, and the final record is
    never deleted, so the corpus maximum always sits on a live record.
    """
    rng = random.Random(seed)
    base = datetime(2020, 1, 1, tzinfo=timezone.utc)
    deleted_indices = set(rng.sample(range(max(size - 1, 1)), n_deleted)) if n_deleted else set()
    records = []
    for i in range(size):
        if granularity == "day":
            datestamp = base + timedelta(days=i)
        else:
            datestamp = base + timedelta(seconds=i * 3671)
        deleted = i in deleted_indices
        metadata = None if deleted else _random_metadata(rng, i)
        records.append(CorpusRecord(
            identifier=f"oai:example.org:rec-{i:04d}",
            datestamp=datestamp,
            deleted=deleted,
            metadata=metadata,
        ))
    return MockCorpus(records=tuple(records), page_size=page_size,
                      granularity=granularity, fault_plan=fault_plan)


def _random_metadata(rng: random.Random, index: int) -> dict:
    place = rng.choice(_PLACES)
    title_words = rng.sample(_WORDS, rng.randint(2, 4))
    metadata: dict = {
        "title": " ".join(title_words).capitalize() + f" at {place}",
        "description": " ".join(rng.choices(_WORDS, k=rng.randint(8, 18))) + ".",
        "subjects": sorted(set(rng.sample(_WORDS, rng.randint(1, 4)))),
    }
    if rng.random() < 0.75:
        metadata["coverage_spatial"] = _random_box(rng)
    if rng.random() < 0.75:
        year = rng.randint(1990, 2018)
        span = rng.randint(0, 3)
        metadata["coverage_temporal"] = f"{year}-01-01/{year + span}-12-31"
    if rng.random() < 0.8:
        metadata["source"] = f"https://data.example.org/datasets/{index}"
    attributes = []
    for name, unit in rng.sample(_ATTRIBUTE_POOL, rng.randint(0, 3)):
        attr = {"name": name, "unit": unit}
        if rng.random() < 0.5:
            attr["precision"] = f"0.{rng.randint(1, 9)}"
        if rng.random() < 0.5:
            attr["accuracy"] = f"{rng.randint(1, 10)}%"
        attributes.append(attr)
    if attributes:
        metadata["attributes"] = attributes
    if rng.random() < 0.6:
        metadata["lineage"] = rng.choice(_LINEAGE_TEMPLATES).format(place=place)
    return metadata


def _random_box(rng: random.Random) -> str:
    south = round(rng.uniform(-85, 80), 2)
    north = round(min(south + rng.uniform(0.1, 20), 90), 2)
    if rng.random() < 0.15:
        west = round(rng.uniform(150, 179), 2)
        east = round(rng.uniform(-179, -150), 2)
    else:
        west = round(rng.uniform(-180, 160), 2)
        east = round(min(west + rng.uniform(0.1, 30), 180), 2)
    return f"northlimit={north}; southlimit={south}; westlimit={west}; eastlimit={east}"


def mutate_corpus(corpus: MockCorpus, seed: int, *, updates: int = 0,
                  deletions: int = 0, additions: int = 0) -> MockCorpus:
    """Apply randomized corpus mutations with strictly advancing datestamps.

    Updates and deletions target currently-live records; additions mint
    fresh identifiers. Every mutation gets a distinct datestamp greater
    than the current corpus maximum.
    """
    rng = random.Random(seed)
    records = list(corpus.records)
    max_ds = max((r.datestamp for r in records),
                 default=datetime(2020, 1, 1, tzinfo=timezone.utc))
    step = timedelta(days=1) if corpus.granularity == "day" else timedelta(seconds=61)

    def next_ds() -> datetime:
        nonlocal max_ds
        max_ds = max_ds + step
        return max_ds

    live_indices = [i for i, r in enumerate(records) if not r.deleted]
    if updates + deletions > len(live_indices):
        raise ValidationError("not enough live records to mutate")
    chosen = rng.sample(live_indices, updates + deletions)
    to_update, to_delete = chosen[:updates], chosen[updates:]

    for i in to_update:
        record = records[i]
        metadata = dict(record.metadata)
        metadata["title"] = metadata.get("title", "") + " (revised)"
        records[i] = replace(record, datestamp=next_ds(), metadata=metadata)
    for i in to_delete:
        records[i] = replace(records[i], datestamp=next_ds(), deleted=True, metadata=None)

    existing = {r.identifier for r in records}
    serial = len(records)
    for _ in range(additions):
        while f"oai:example.org:rec-{serial:04d}" in existing:
            serial += 1
        identifier = f"oai:example.org:rec-{serial:04d}"
        existing.add(identifier)
        records.append(CorpusRecord(
            identifier=identifier,
            datestamp=next_ds(),
            deleted=False,
            metadata=_random_metadata(rng, serial),
        ))
    return replace(corpus, records=tuple(records))
