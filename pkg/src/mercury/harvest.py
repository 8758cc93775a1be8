"""Full and incremental harvest driver.

Pages through ListRecords, converts drafts to canonical records, applies
upserts/tombstones to store+index, and advances the per-provider datestamp
cursor. The `from` cursor is inclusive: boundary records are re-fetched and
classified unchanged, which closes the same-second lost-update window at
the cost of free idempotent overlap.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, Optional

import requests

from .dcparse import DraftRecord, MetadataXmlError, parse_record
from .index import SearchIndex
from .model import (
    MetadataRecord,
    PROVIDER_KEY_RE,
    ValidationError,
    format_instant,
    make_record_id,
    parse_instant,
    validate_record,
)
from .oai import (
    HarvestRequest,
    OaiEnvelope,
    RawRecord,
    Verb,
    build_request,
    next_page,
    parse_envelope,
)
from .store import Store, StoreError

MAX_ATTEMPTS = 5
RETRY_AFTER_CAP = 300.0
BACKOFF_CAP = 60.0


class HarvestError(Exception):
    """Harvest cannot proceed (network, protocol, or store failure)."""


class HarvestInProgress(Exception):
    """A harvest for this provider is already running."""


@dataclass(frozen=True)
class ProviderConfig:
    provider_key: str
    base_url: str
    metadata_prefix: str = "oai_dc"
    set: Optional[str] = None
    page_timeout: float = 30.0


@dataclass(frozen=True)
class HarvestState:
    provider_key: str
    last_success_datestamp: Optional[datetime] = None
    last_run_at: Optional[datetime] = None
    last_run_outcome: str = "never_run"  # never_run | success | failed


@dataclass
class HarvestReport:
    provider_key: str
    mode: str  # full | incremental
    pages: int = 0
    new: int = 0
    updated: int = 0
    unchanged: int = 0
    deleted: int = 0
    warnings: int = 0
    error: Optional[str] = None


@dataclass
class PageStats:
    new: int = 0
    updated: int = 0
    unchanged: int = 0
    deleted: int = 0
    warnings: int = 0


def backoff_schedule(attempt: int) -> float:
    """Delay before retrying after failed attempt number `attempt` (>= 1)."""
    if attempt < 1:
        raise ValueError("attempt must be >= 1")
    return min(2.0 ** (attempt - 1), BACKOFF_CAP)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


# ---------------------------------------------------------------------------
# Config / state (de)serialization; field names are the file format
# ---------------------------------------------------------------------------

def provider_from_dict(data: dict) -> ProviderConfig:
    key = data.get("provider_key", "")
    if not PROVIDER_KEY_RE.fullmatch(key or ""):
        raise ValidationError(f"malformed provider_key: {key!r}")
    base_url = data.get("base_url", "")
    if not (base_url.startswith("http://") or base_url.startswith("https://")):
        raise ValidationError(f"base_url must be http(s): {base_url!r}")
    prefix = data.get("metadata_prefix", "oai_dc")
    if not prefix:
        raise ValidationError("metadata_prefix must be nonempty")
    timeout = data.get("page_timeout", 30)
    if not isinstance(timeout, (int, float)) or timeout <= 0:
        raise ValidationError(f"page_timeout must be positive: {timeout!r}")
    return ProviderConfig(provider_key=key, base_url=base_url, metadata_prefix=prefix,
                          set=data.get("set"), page_timeout=float(timeout))


def provider_to_dict(provider: ProviderConfig) -> dict:
    out = {
        "provider_key": provider.provider_key,
        "base_url": provider.base_url,
        "metadata_prefix": provider.metadata_prefix,
    }
    if provider.set is not None:
        out["set"] = provider.set
    out["page_timeout"] = provider.page_timeout
    return out


def state_to_dict(state: HarvestState) -> dict:
    out: dict = {"provider_key": state.provider_key}
    if state.last_success_datestamp is not None:
        out["last_success_datestamp"] = format_instant(state.last_success_datestamp)
    if state.last_run_at is not None:
        out["last_run_at"] = format_instant(state.last_run_at)
    out["last_run_outcome"] = state.last_run_outcome
    return out


def report_to_dict(report: HarvestReport) -> dict:
    out = {
        "provider_key": report.provider_key,
        "mode": report.mode,
        "pages": report.pages,
        "new": report.new,
        "updated": report.updated,
        "unchanged": report.unchanged,
        "deleted": report.deleted,
        "warnings": report.warnings,
    }
    if report.error is not None:
        out["error"] = report.error
    return out


def state_from_dict(data: dict) -> HarvestState:
    def opt_instant(name):
        return parse_instant(data[name]) if name in data else None
    return HarvestState(
        provider_key=data["provider_key"],
        last_success_datestamp=opt_instant("last_success_datestamp"),
        last_run_at=opt_instant("last_run_at"),
        last_run_outcome=data.get("last_run_outcome", "never_run"),
    )


def load_providers(store: Store) -> dict[str, ProviderConfig]:
    raw = store.read_json(store.providers_path, [])
    providers = {}
    for item in raw:
        provider = provider_from_dict(item)
        providers[provider.provider_key] = provider
    return providers


def save_providers(store: Store, providers: dict[str, ProviderConfig]) -> None:
    store.write_json(store.providers_path,
                     [provider_to_dict(providers[k]) for k in sorted(providers)])


def load_states(store: Store) -> dict[str, HarvestState]:
    raw = store.read_json(store.state_path, {})
    return {key: state_from_dict(value) for key, value in raw.items()}


def save_states(store: Store, states: dict[str, HarvestState]) -> None:
    store.write_json(store.state_path,
                     {key: state_to_dict(states[key]) for key in sorted(states)})


# ---------------------------------------------------------------------------
# HTTP fetch with retry/backoff
# ---------------------------------------------------------------------------

def _fetch_envelope(url: str, timeout: float, session, sleep) -> OaiEnvelope:
    """GET and parse one protocol page, retrying transient failures.

    Transient = connection errors and 5xx; a 503 Retry-After header
    overrides the computed backoff (capped). Anything else fails fast.
    """
    last_failure = "unknown"
    for attempt in range(1, MAX_ATTEMPTS + 1):
        delay = backoff_schedule(attempt) if attempt < MAX_ATTEMPTS else None
        try:
            response = session.get(url, timeout=timeout)
        except requests.RequestException as exc:
            last_failure = f"request failed: {exc}"
        else:
            if response.status_code == 200:
                try:
                    return parse_envelope(response.content)
                except ValueError as exc:
                    raise HarvestError(f"unparseable response from {url}: {exc}") from exc
            if response.status_code == 503:
                retry_after = _retry_after_seconds(response)
                if retry_after is not None and delay is not None:
                    delay = min(retry_after, RETRY_AFTER_CAP)
                last_failure = "HTTP 503"
            elif response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}"
            else:
                raise HarvestError(f"HTTP {response.status_code} from {url}")
        if delay is None:
            break
        sleep(delay)
    raise HarvestError(f"retries exhausted for {url}: {last_failure}")


def _retry_after_seconds(response) -> Optional[float]:
    raw = response.headers.get("Retry-After")
    if raw is None:
        return None
    try:
        return max(0.0, float(raw))
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# Harvest driver
# ---------------------------------------------------------------------------

def harvest(provider: ProviderConfig, state: HarvestState, mode: str,
            store: Store, search_index: SearchIndex, *,
            session=None, sleep: Callable[[float], None] = time.sleep,
            now: Callable[[], datetime] = _utcnow) -> tuple[HarvestReport, HarvestState]:
    """Run one harvest; returns the report and the advanced state.

    Pages already applied before a failure stay applied (upserts are
    idempotent); the cursor only advances after a fully successful run.
    """
    if mode not in ("full", "incremental"):
        raise ValueError(f"unknown harvest mode: {mode!r}")
    session = session or requests.Session()

    report = HarvestReport(provider_key=provider.provider_key, mode=mode)
    if mode == "incremental" and state.last_success_datestamp is None:
        report.mode = mode = "full"
        report.warnings += 1  # promoted: no cursor to resume from

    try:
        max_seen = _run_listing(provider, state, mode, store, search_index,
                                report, session, sleep)
    except (HarvestError, StoreError) as exc:
        report.error = str(exc)
        return report, replace(state, last_run_at=now(), last_run_outcome="failed")

    new_cursor = state.last_success_datestamp
    if max_seen is not None:
        if new_cursor is None or max_seen > new_cursor:
            new_cursor = max_seen
    return report, replace(state, last_success_datestamp=new_cursor,
                           last_run_at=now(), last_run_outcome="success")


def _run_listing(provider: ProviderConfig, state: HarvestState, mode: str,
                 store: Store, search_index: SearchIndex, report: HarvestReport,
                 session, sleep) -> Optional[datetime]:
    base_args: list[tuple[str, str]] = [("metadataPrefix", provider.metadata_prefix)]
    if mode == "incremental":
        granularity = _provider_granularity(provider, report, session, sleep)
        base_args.append(("from", _format_cursor(state.last_success_datestamp, granularity)))
    if provider.set is not None:
        base_args.append(("set", provider.set))

    max_seen: Optional[datetime] = None
    token = None
    restarted = False
    while True:
        if token is None:
            args = tuple(base_args)
        else:
            args = (("resumptionToken", token.token),)
        url = build_request(HarvestRequest(base_url=provider.base_url,
                                           verb=Verb.LIST_RECORDS, arguments=args))
        envelope = _fetch_envelope(url, provider.page_timeout, session, sleep)

        if envelope.payload_kind == "error":
            code = envelope.error.code
            if code == "noRecordsMatch":
                return max_seen
            if code == "badResumptionToken" and token is not None and not restarted:
                restarted = True
                token = None
                continue
            raise HarvestError(f"provider error {code}: {envelope.error.message}")
        if envelope.payload_kind != "records":
            raise HarvestError(f"unexpected payload: {envelope.payload_kind}")

        stats = apply_page(envelope.record_list, provider, store, search_index)
        report.pages += 1
        report.new += stats.new
        report.updated += stats.updated
        report.unchanged += stats.unchanged
        report.deleted += stats.deleted
        report.warnings += stats.warnings
        for raw in envelope.record_list:
            if max_seen is None or raw.datestamp > max_seen:
                max_seen = raw.datestamp

        token = next_page(envelope)
        if token is None:
            return max_seen


def apply_page(records: tuple[RawRecord, ...], provider: ProviderConfig,
               store: Store, search_index: SearchIndex) -> PageStats:
    """Apply one page of raw records to store and index.

    Tombstones are written unconditionally; upserts are classified
    new/updated/unchanged against the stored datestamp, and unchanged
    records are skipped entirely so replays don't churn the journal.
    Records failing validation are counted as warnings and skipped.
    """
    stats = PageStats()
    for raw in records:
        if raw.deleted:
            record_id = make_record_id(provider.provider_key, raw.identifier)
            store.append_tombstone(record_id, raw.datestamp)
            search_index.delete_document(record_id)
            stats.deleted += 1
            continue

        try:
            draft = parse_record(raw)
        except (MetadataXmlError, ValueError):
            stats.warnings += 1
            continue
        stats.warnings += len(draft.parse_warnings)

        record = draft_to_record(draft, provider.provider_key)
        if validate_record(record):
            stats.warnings += 1
            continue

        existing = store.get_record(record.record_id)
        if existing is None:
            stats.new += 1
        elif record.datestamp > existing.datestamp:
            stats.updated += 1
        else:
            stats.unchanged += 1
            continue
        store.append_record(record)
        search_index.upsert_document(record)
    return stats


def draft_to_record(draft: DraftRecord, provider_key: str) -> MetadataRecord:
    return MetadataRecord(
        record_id=make_record_id(provider_key, draft.local_identifier),
        provider_key=provider_key,
        local_identifier=draft.local_identifier,
        title=draft.title,
        abstract=draft.abstract,
        keywords=draft.keywords,
        attributes=draft.attributes,
        lineage=draft.lineage,
        spatial=draft.spatial,
        temporal=draft.temporal,
        source_url=draft.source_url,
        datestamp=draft.datestamp,
        deleted=draft.deleted,
    )


def _provider_granularity(provider: ProviderConfig, report: HarvestReport,
                          session, sleep) -> str:
    """Ask Identify for the datestamp granularity; day when unknown.

    Day-form `from` arguments are legal against any provider, so an
    Identify failure degrades to day granularity with a warning instead of
    failing the harvest.
    """
    url = build_request(HarvestRequest(base_url=provider.base_url, verb=Verb.IDENTIFY))
    try:
        envelope = _fetch_envelope(url, provider.page_timeout, session, sleep)
    except HarvestError:
        report.warnings += 1
        return "day"
    if envelope.payload_kind != "identify":
        report.warnings += 1
        return "day"
    if envelope.identify_info.granularity == "YYYY-MM-DDThh:mm:ssZ":
        return "seconds"
    return "day"


def _format_cursor(cursor: datetime, granularity: str) -> str:
    if granularity == "seconds":
        return format_instant(cursor)
    return cursor.astimezone(timezone.utc).strftime("%Y-%m-%d")


# ---------------------------------------------------------------------------
# Run coordination (per-provider mutual exclusion, async triggering)
# ---------------------------------------------------------------------------

@dataclass
class HarvestRun:
    run_id: str
    provider_key: str
    mode: str
    status: str = "running"  # running | done | failed
    report: Optional[HarvestReport] = None


class HarvestManager:
    """Serializes harvests per provider and tracks triggered runs.

    Distinct providers harvest concurrently; a second trigger for the same
    provider is rejected while one is in flight.
    """

    def __init__(self, store: Store, search_index: SearchIndex, *,
                 session_factory=requests.Session,
                 sleep: Callable[[float], None] = time.sleep):
        self._store = store
        self._index = search_index
        self._session_factory = session_factory
        self._sleep = sleep
        self._mutex = threading.Lock()
        self._state_mutex = threading.Lock()  # serializes state-file read-modify-write
        self._active: set[str] = set()
        self._runs: dict[str, HarvestRun] = {}

    def trigger(self, provider: ProviderConfig, mode: str) -> str:
        """Start a harvest in a background thread; returns the run id."""
        with self._mutex:
            if provider.provider_key in self._active:
                raise HarvestInProgress(provider.provider_key)
            self._active.add(provider.provider_key)
            run_id = uuid.uuid4().hex[:12]
            self._runs[run_id] = HarvestRun(run_id=run_id,
                                            provider_key=provider.provider_key, mode=mode)
        thread = threading.Thread(target=self._execute, args=(run_id, provider, mode),
                                  daemon=True)
        thread.start()
        return run_id

    def run_sync(self, provider: ProviderConfig, mode: str) -> HarvestReport:
        """Run a harvest on the calling thread (CLI path)."""
        with self._mutex:
            if provider.provider_key in self._active:
                raise HarvestInProgress(provider.provider_key)
            self._active.add(provider.provider_key)
        try:
            return self._harvest_and_save(provider, mode)
        finally:
            with self._mutex:
                self._active.discard(provider.provider_key)

    def get_run(self, run_id: str) -> Optional[HarvestRun]:
        with self._mutex:
            return self._runs.get(run_id)

    def _execute(self, run_id: str, provider: ProviderConfig, mode: str) -> None:
        try:
            report = self._harvest_and_save(provider, mode)
            status = "failed" if report.error else "done"
        except Exception as exc:  # defensive: a run must always settle
            report = HarvestReport(provider_key=provider.provider_key, mode=mode,
                                   error=f"internal error: {exc}")
            status = "failed"
        with self._mutex:
            run = self._runs[run_id]
            run.status = status
            run.report = report
            self._active.discard(provider.provider_key)

    def _harvest_and_save(self, provider: ProviderConfig, mode: str) -> HarvestReport:
        with self._state_mutex:
            state = load_states(self._store).get(provider.provider_key) \
                or HarvestState(provider.provider_key)
        report, new_state = harvest(provider, state, mode, self._store, self._index,
                                    session=self._session_factory(), sleep=self._sleep)
        with self._state_mutex:
            states = load_states(self._store)
            states[provider.provider_key] = new_state
            save_states(self._store, states)
        return report
