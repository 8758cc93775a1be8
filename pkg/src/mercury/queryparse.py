"""Search parameter parsing and result serialization.

The CLI and the HTTP API share this code path, so their outputs are
structurally identical by construction: same parameters in, same bytes out.
"""

from __future__ import annotations

import json
import re
from datetime import datetime, timezone
from typing import Mapping, Optional

from .index import Query, SearchResult
from .model import (
    SpatialExtent,
    TemporalExtent,
    ValidationError,
    day_end,
    normalize_bbox,
    parse_instant,
    spatial_to_dict,
    temporal_to_dict,
)

DEFAULT_PAGE_SIZE = 10
MIN_INSTANT = datetime(1, 1, 1, tzinfo=timezone.utc)
MAX_INSTANT = datetime(9999, 12, 31, 23, 59, 59, tzinfo=timezone.utc)

_DATE_ONLY = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class ParamError(ValueError):
    """A search parameter failed to parse; carries the ApiError code."""

    def __init__(self, param: str, message: str):
        super().__init__(message)
        self.param = param
        self.code = f"bad_{param}"


def parse_search_params(params: Mapping[str, str]) -> Query:
    """Build a Query from HTTP-style string parameters.

    bbox is "west,south,east,north"; start/end accept RFC 3339 instants or
    bare dates (expanded to day bounds); an open-ended side of the interval
    defaults to the epoch floor/ceiling.
    """
    bbox = _parse_bbox(params.get("bbox"))
    interval = _parse_interval(params.get("start"), params.get("end"))
    return Query(
        terms_text=params.get("q", ""),
        bbox=bbox,
        interval=interval,
        provider_filter=params.get("provider") or None,
        keyword_filter=params.get("keyword") or None,
        page=_parse_count(params.get("page"), "page", default=1, lo=1, hi=None),
        size=_parse_count(params.get("size"), "size", default=DEFAULT_PAGE_SIZE, lo=1, hi=100),
    )


def _parse_bbox(raw: Optional[str]) -> Optional[SpatialExtent]:
    if raw is None or raw == "":
        return None
    pieces = raw.split(",")
    if len(pieces) != 4:
        raise ParamError("bbox", f"bbox needs west,south,east,north; got {raw!r}")
    try:
        west, south, east, north = (float(p) for p in pieces)
    except ValueError:
        raise ParamError("bbox", f"bbox values must be numbers: {raw!r}")
    try:
        return normalize_bbox(west, south, east, north)
    except ValidationError as exc:
        raise ParamError("bbox", str(exc))


def _parse_interval(start_raw: Optional[str],
                    end_raw: Optional[str]) -> Optional[TemporalExtent]:
    if not start_raw and not end_raw:
        return None
    start = MIN_INSTANT
    end = MAX_INSTANT
    if start_raw:
        try:
            start = parse_instant(start_raw)
        except ValidationError:
            raise ParamError("start", f"not a date or instant: {start_raw!r}")
    if end_raw:
        try:
            end = day_end(end_raw) if _DATE_ONLY.match(end_raw) else parse_instant(end_raw)
        except ValidationError:
            raise ParamError("end", f"not a date or instant: {end_raw!r}")
    if start > end:
        raise ParamError("end", "end precedes start")
    return TemporalExtent(start=start, end=end)


def _parse_count(raw: Optional[str], name: str, default: int, lo: int,
                 hi: Optional[int]) -> int:
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ParamError(name, f"{name} must be an integer: {raw!r}")
    if value < lo or (hi is not None and value > hi):
        bound = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
        raise ParamError(name, f"{name} must be {bound}: {value}")
    return value


def search_result_to_dict(result: SearchResult) -> dict:
    hits = []
    for hit in result.hits:
        out: dict = {
            "record_id": hit.record_id,
            "score": hit.score,
            "title": hit.title,
            "provider_key": hit.provider_key,
        }
        if hit.spatial is not None:
            out["spatial"] = spatial_to_dict(hit.spatial)
        if hit.temporal is not None:
            out["temporal"] = temporal_to_dict(hit.temporal)
        hits.append(out)
    return {
        "total": result.total,
        "hits": hits,
        "facets": {
            "providers": {key: count for key, count in result.facets.providers},
            "keywords": [{"keyword": k, "count": c} for k, c in result.facets.keywords],
        },
    }


def search_result_to_json(result: SearchResult) -> str:
    return json.dumps(search_result_to_dict(result), ensure_ascii=False,
                      separators=(",", ":"))
