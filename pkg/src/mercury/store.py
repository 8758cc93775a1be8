"""Append-only journal of record upserts/tombstones; source of truth.

One JSON object per line, UTF-8, "\\n"-terminated. Each line carries a
CRC32C of its payload so crash artifacts (torn trailing line: truncate)
can be told apart from bit rot (interior corruption: fatal). The live
index is rebuilt from the journal at startup rather than persisted.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Optional

from .model import (
    MetadataRecord,
    format_instant,
    parse_instant,
    record_from_dict,
    record_to_dict,
)

JOURNAL_NAME = "journal.ndjson"
STATE_NAME = "harvest_state.json"
PROVIDERS_NAME = "providers.json"


class StoreError(Exception):
    pass


class SequenceError(StoreError):
    """Caller supplied a non-consecutive sequence number."""


class IntegrityError(StoreError):
    """Non-trailing journal corruption; carries the offending position."""

    def __init__(self, message: str, seq: int):
        super().__init__(message)
        self.seq = seq


# ---------------------------------------------------------------------------
# CRC32C (Castagnoli). zlib.crc32 is the wrong polynomial, so table it here.
# ---------------------------------------------------------------------------

def _build_crc_table() -> list[int]:
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ 0x82F63B78 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _build_crc_table()


def crc32c(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc = (crc >> 8) ^ _CRC_TABLE[(crc ^ byte) & 0xFF]
    return crc ^ 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Journal entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JournalEntry:
    seq: int
    kind: str  # "upsert" | "tombstone"
    written_at: datetime
    record: Optional[MetadataRecord] = None  # upsert
    record_id: str = ""                      # tombstone
    datestamp: Optional[datetime] = None     # tombstone

    def __post_init__(self):
        if self.kind not in ("upsert", "tombstone"):
            raise StoreError(f"unknown journal entry kind: {self.kind!r}")
        if self.kind == "upsert" and self.record is None:
            raise StoreError("upsert entry requires a record")
        if self.kind == "tombstone" and (not self.record_id or self.datestamp is None):
            raise StoreError("tombstone entry requires record_id and datestamp")


def _entry_payload(entry: JournalEntry) -> dict:
    if entry.kind == "upsert":
        record = record_to_dict(entry.record)
    else:
        record = {"record_id": entry.record_id, "datestamp": format_instant(entry.datestamp)}
    return {
        "seq": entry.seq,
        "kind": entry.kind,
        "record": record,
        "written_at": format_instant(entry.written_at),
    }


def _encode_line(entry: JournalEntry) -> bytes:
    payload = json.dumps(_entry_payload(entry), ensure_ascii=False, separators=(",", ":"))
    crc = crc32c(payload.encode("utf-8"))
    line = payload[:-1] + ',"crc":"%08x"}' % crc
    return line.encode("utf-8") + b"\n"


def _decode_line(line: bytes) -> JournalEntry:
    obj = json.loads(line.decode("utf-8"))
    crc_text = obj.pop("crc", None)
    if crc_text is None:
        raise ValueError("missing crc field")
    payload = json.dumps(obj, ensure_ascii=False, separators=(",", ":"))
    if "%08x" % crc32c(payload.encode("utf-8")) != crc_text:
        raise ValueError("crc mismatch")
    kind = obj["kind"]
    written_at = parse_instant(obj["written_at"])
    if kind == "upsert":
        return JournalEntry(seq=obj["seq"], kind=kind, written_at=written_at,
                            record=record_from_dict(obj["record"]))
    return JournalEntry(seq=obj["seq"], kind=kind, written_at=written_at,
                        record_id=obj["record"]["record_id"],
                        datestamp=parse_instant(obj["record"]["datestamp"]))


class Journal:
    """Single-writer append-only journal file with crash-safe open."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.last_seq = 0
        self._fh = None
        self._open()

    def _open(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists():
            self.path.touch()
        good_end, last_seq = self._scan()
        if good_end < self.path.stat().st_size:
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        self.last_seq = last_seq
        self._fh = open(self.path, "ab")

    def _scan(self) -> tuple[int, int]:
        """Validate the file; returns (durable byte length, last good seq).

        Only the trailing region (a torn final line, or a corrupt final
        complete line with nothing after it) may be bad; anything earlier
        is fatal.
        """
        data = self.path.read_bytes()
        segments = data.split(b"\n")
        complete, trailing = segments[:-1], segments[-1]
        good_end = 0
        last_seq = 0
        for i, line in enumerate(complete):
            try:
                entry = _decode_line(line)
                if entry.seq != last_seq + 1:
                    raise ValueError(f"expected seq {last_seq + 1}, found {entry.seq}")
            except (ValueError, KeyError, TypeError) as exc:
                is_final_region = i == len(complete) - 1 and not trailing
                if is_final_region:
                    return good_end, last_seq
                raise IntegrityError(
                    f"corrupt journal entry at seq {last_seq + 1}: {exc}",
                    seq=last_seq + 1,
                ) from exc
            good_end += len(line) + 1
            last_seq = entry.seq
        return good_end, last_seq

    def append(self, entry: JournalEntry) -> None:
        """Durably write one entry; flushed and fsynced before returning."""
        if entry.seq != self.last_seq + 1:
            raise SequenceError(
                f"non-consecutive seq: expected {self.last_seq + 1}, got {entry.seq}")
        self._fh.write(_encode_line(entry))
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.last_seq = entry.seq

    def entries(self) -> Iterator[JournalEntry]:
        with open(self.path, "rb") as fh:
            data = fh.read()
        for line in data.split(b"\n")[:-1]:
            yield _decode_line(line)

    def replay(self) -> dict[str, MetadataRecord]:
        """Fold all entries into the live record map.

        Upserts replace only when at least as fresh (datestamp); tombstones
        remove unconditionally.
        """
        live: dict[str, MetadataRecord] = {}
        for entry in self.entries():
            apply_entry(live, entry)
        return live

    def compact(self, now: Optional[Callable[[], datetime]] = None) -> int:
        """Rewrite the journal to one upsert per live record.

        Writes a fresh file and atomically renames it over the old one, so
        an IO failure leaves the original untouched. Returns the new entry
        count.
        """
        clock = now or _utcnow
        live = self.replay()
        tmp_path = self.path.with_suffix(".compact.tmp")
        written_at = clock()
        with open(tmp_path, "wb") as fh:
            seq = 0
            for record_id in sorted(live):
                seq += 1
                entry = JournalEntry(seq=seq, kind="upsert", written_at=written_at,
                                     record=live[record_id])
                fh.write(_encode_line(entry))
            fh.flush()
            os.fsync(fh.fileno())
        self._fh.close()
        os.replace(tmp_path, self.path)
        self.last_seq = len(live)
        self._fh = open(self.path, "ab")
        return len(live)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def apply_entry(live: dict[str, MetadataRecord], entry: JournalEntry) -> None:
    """One fold step of replay; shared with incremental live-map updates."""
    if entry.kind == "upsert":
        existing = live.get(entry.record.record_id)
        if existing is None or entry.record.datestamp >= existing.datestamp:
            live[entry.record.record_id] = entry.record
    else:
        live.pop(entry.record_id, None)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


# ---------------------------------------------------------------------------
# Store: journal + sibling config/state files in one directory
# ---------------------------------------------------------------------------

class Store:
    """The single durable directory: journal, harvest state, provider list.

    Keeps the replayed live map in memory and folds appends into it, so
    readers (record lookup, harvest classification) never rescan the file.
    Appends are serialized internally; one logical writer at a time.
    """

    def __init__(self, directory: str | Path, now: Optional[Callable[[], datetime]] = None,
                 providers_path: Optional[str | Path] = None):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._now = now or _utcnow
        self._lock = threading.Lock()
        self._providers_path = Path(providers_path) if providers_path else None
        self.journal = Journal(self.directory / JOURNAL_NAME)
        self._live = self.journal.replay()

    @property
    def state_path(self) -> Path:
        return self.directory / STATE_NAME

    @property
    def providers_path(self) -> Path:
        return self._providers_path or self.directory / PROVIDERS_NAME

    def live_records(self) -> dict[str, MetadataRecord]:
        with self._lock:
            return dict(self._live)

    def get_record(self, record_id: str) -> Optional[MetadataRecord]:
        with self._lock:
            return self._live.get(record_id)

    def live_count(self) -> int:
        with self._lock:
            return len(self._live)

    def append_record(self, record: MetadataRecord) -> JournalEntry:
        with self._lock:
            entry = JournalEntry(seq=self.journal.last_seq + 1, kind="upsert",
                                 written_at=self._now(), record=record)
            self.journal.append(entry)
            apply_entry(self._live, entry)
            return entry

    def append_tombstone(self, record_id: str, datestamp: datetime) -> JournalEntry:
        with self._lock:
            entry = JournalEntry(seq=self.journal.last_seq + 1, kind="tombstone",
                                 written_at=self._now(), record_id=record_id,
                                 datestamp=datestamp)
            self.journal.append(entry)
            apply_entry(self._live, entry)
            return entry

    def compact(self) -> int:
        with self._lock:
            count = self.journal.compact(now=self._now)
            self._live = self.journal.replay()
            return count

    def read_json(self, path: Path, default):
        if not path.exists():
            return default
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def write_json(self, path: Path, obj) -> None:
        # unique tmp name: concurrent writers must not rename each other away
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def close(self) -> None:
        self.journal.close()
