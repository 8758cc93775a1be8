"""In-memory inverted index: TF-IDF ranking, spatiotemporal filters, facets.

Scoring is weighted TF-IDF over five fields (title x3, keywords x2,
abstract/attribute names/lineage x1) with idf = ln(1 + N/df). Query terms
are OR-combined; every ordering tie-breaks by record_id ascending so
results are fully deterministic.
"""

from __future__ import annotations

import math
import re
import threading
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Optional

from .model import MetadataRecord, SpatialExtent, TemporalExtent

INDEXED_FIELDS = ("title", "abstract", "keywords", "attribute_names", "lineage")

FIELD_WEIGHTS = {
    "title": 3,
    "keywords": 2,
    "abstract": 1,
    "attribute_names": 1,
    "lineage": 1,
}

MAX_PAGE_SIZE = 100
KEYWORD_FACET_LIMIT = 20

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-letter/digit; no stemming, no stopwords."""
    return _TOKEN_RE.findall(text.lower())


def distinct_terms(text: str) -> list[str]:
    return list(dict.fromkeys(tokenize(text)))


# ---------------------------------------------------------------------------
# Geometry / time predicates
# ---------------------------------------------------------------------------

def _lon_spans(box: SpatialExtent) -> list[tuple[float, float]]:
    if box.west > box.east:
        return [(box.west, 180.0), (-180.0, box.east)]
    return [(box.west, box.east)]


def bbox_intersects(a: SpatialExtent, b: SpatialExtent) -> bool:
    """Closed-interval intersection; crossing boxes split at the antimeridian."""
    if a.south > b.north or a.north < b.south:
        return False
    for a_west, a_east in _lon_spans(a):
        for b_west, b_east in _lon_spans(b):
            if a_west <= b_east and a_east >= b_west:
                return True
    return False


def temporal_overlaps(a: TemporalExtent, b: TemporalExtent) -> bool:
    """Closed intervals; touching endpoints overlap."""
    return a.start <= b.end and a.end >= b.start


# ---------------------------------------------------------------------------
# Documents, queries, results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexDocument:
    record_id: str
    provider_key: str
    title: str
    field_token_counts: Mapping[str, Mapping[str, int]]
    keywords_raw: tuple[str, ...]
    datestamp: datetime
    spatial: Optional[SpatialExtent] = None
    temporal: Optional[TemporalExtent] = None

    def term_frequency(self, term: str) -> int:
        """Weighted occurrence count of a term across the indexed fields."""
        total = 0
        for name, weight in FIELD_WEIGHTS.items():
            total += weight * self.field_token_counts[name].get(term, 0)
        return total

    def terms(self) -> set[str]:
        out: set[str] = set()
        for counts in self.field_token_counts.values():
            out.update(counts)
        return out


def document_from_record(record: MetadataRecord) -> IndexDocument:
    """Deterministically derive the indexed form of a record."""
    counts = {
        "title": dict(Counter(tokenize(record.title))),
        "abstract": dict(Counter(tokenize(record.abstract))),
        "keywords": dict(Counter(t for kw in record.keywords for t in tokenize(kw))),
        "attribute_names": dict(Counter(t for a in record.attributes for t in tokenize(a.name))),
        "lineage": dict(Counter(tokenize(record.lineage))),
    }
    return IndexDocument(
        record_id=record.record_id,
        provider_key=record.provider_key,
        title=record.title,
        field_token_counts=counts,
        keywords_raw=tuple(record.keywords),
        datestamp=record.datestamp,
        spatial=record.spatial,
        temporal=record.temporal,
    )


@dataclass(frozen=True)
class Query:
    terms_text: str = ""
    bbox: Optional[SpatialExtent] = None
    interval: Optional[TemporalExtent] = None
    provider_filter: Optional[str] = None
    keyword_filter: Optional[str] = None
    page: int = 1
    size: int = 10


@dataclass(frozen=True)
class SearchHit:
    record_id: str
    score: float
    title: str
    provider_key: str
    spatial: Optional[SpatialExtent] = None
    temporal: Optional[TemporalExtent] = None


@dataclass(frozen=True)
class Facets:
    providers: tuple[tuple[str, int], ...]  # sorted by provider_key
    keywords: tuple[tuple[str, int], ...]   # top 20 by (count desc, keyword asc)


@dataclass(frozen=True)
class SearchResult:
    total: int
    hits: tuple[SearchHit, ...]
    facets: Facets


def score_document(doc: IndexDocument, query_terms: Iterable[str],
                   n_docs: int, df: Mapping[str, int]) -> float:
    """Sum of tf x idf over distinct query terms; df=0 terms contribute 0."""
    score = 0.0
    for term in query_terms:
        term_df = df.get(term, 0)
        if term_df == 0:
            continue
        tf = doc.term_frequency(term)
        if tf == 0:
            continue
        score += tf * math.log(1.0 + n_docs / term_df)
    return score


class _RWLock:
    """Single writer, concurrent readers; readers never block readers."""

    def __init__(self):
        self._readers = 0
        self._readers_mutex = threading.Lock()
        self._writer_mutex = threading.Lock()

    @contextmanager
    def read(self):
        with self._readers_mutex:
            self._readers += 1
            if self._readers == 1:
                self._writer_mutex.acquire()
        try:
            yield
        finally:
            with self._readers_mutex:
                self._readers -= 1
                if self._readers == 0:
                    self._writer_mutex.release()

    @contextmanager
    def write(self):
        with self._writer_mutex:
            yield


class SearchIndex:
    """The centralized index; rebuilt from the journal at startup."""

    def __init__(self, records: Optional[Iterable[MetadataRecord]] = None):
        self._docs: dict[str, IndexDocument] = {}
        self._df: Counter = Counter()
        self._lock = _RWLock()
        for record in records or ():
            self.upsert_document(record)

    @property
    def doc_count(self) -> int:
        return len(self._docs)

    def upsert_document(self, record: MetadataRecord) -> None:
        """Index a validated, live record; stale datestamps are ignored."""
        if record.deleted:
            raise ValueError("deleted records go through delete_document")
        with self._lock.write():
            existing = self._docs.get(record.record_id)
            if existing is not None and record.datestamp < existing.datestamp:
                return
            if existing is not None:
                self._df.subtract(existing.terms())
            doc = document_from_record(record)
            self._docs[record.record_id] = doc
            self._df.update(doc.terms())
            self._df += Counter()  # drop zero/negative entries

    def delete_document(self, record_id: str) -> bool:
        with self._lock.write():
            doc = self._docs.pop(record_id, None)
            if doc is None:
                return False
            self._df.subtract(doc.terms())
            self._df += Counter()
            return True

    def search(self, query: Query) -> SearchResult:
        if query.page < 1:
            raise ValueError(f"page out of range: {query.page}")
        if not 1 <= query.size <= MAX_PAGE_SIZE:
            raise ValueError(f"size out of range: {query.size}")

        with self._lock.read():
            candidates = [d for d in self._docs.values() if self._passes_filters(d, query)]
            terms = distinct_terms(query.terms_text)
            n_docs = len(self._docs)
            if terms:
                scored = []
                for doc in candidates:
                    s = score_document(doc, terms, n_docs, self._df)
                    if s > 0.0:
                        scored.append((doc, s))
                scored.sort(key=lambda pair: pair[0].record_id)
                scored.sort(key=lambda pair: pair[1], reverse=True)
                ordered = scored
            else:
                by_id = sorted(candidates, key=lambda d: d.record_id)
                by_id.sort(key=lambda d: d.datestamp, reverse=True)
                ordered = [(doc, 0.0) for doc in by_id]

            facets = _facets([doc for doc, _ in ordered])
            start = (query.page - 1) * query.size
            page = ordered[start:start + query.size]
            hits = tuple(
                SearchHit(record_id=doc.record_id, score=score, title=doc.title,
                          provider_key=doc.provider_key, spatial=doc.spatial,
                          temporal=doc.temporal)
                for doc, score in page
            )
            return SearchResult(total=len(ordered), hits=hits, facets=facets)

    @staticmethod
    def _passes_filters(doc: IndexDocument, query: Query) -> bool:
        if query.provider_filter is not None and doc.provider_key != query.provider_filter:
            return False
        if query.keyword_filter is not None:
            wanted = query.keyword_filter.lower()
            if not any(kw.lower() == wanted for kw in doc.keywords_raw):
                return False
        if query.bbox is not None:
            if doc.spatial is None or not bbox_intersects(doc.spatial, query.bbox):
                return False
        if query.interval is not None:
            if doc.temporal is None or not temporal_overlaps(doc.temporal, query.interval):
                return False
        return True


def _facets(candidates: list[IndexDocument]) -> Facets:
    providers = Counter(doc.provider_key for doc in candidates)
    keywords = Counter(kw for doc in candidates for kw in doc.keywords_raw)
    top_keywords = sorted(keywords.items(), key=lambda item: (-item[1], item[0]))
    return Facets(
        providers=tuple(sorted(providers.items())),
        keywords=tuple(top_keywords[:KEYWORD_FACET_LIMIT]),
    )
