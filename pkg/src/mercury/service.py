"""HTTP facade: search, record retrieval, provider management, harvesting.

Every non-2xx response body is exactly one ApiError object
({"status", "code", "message"}), and /api/search returns the serialized
engine result byte-for-byte: no re-ranking or filtering happens here.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from urllib.parse import unquote

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import harvest as harvestmod
from .index import SearchIndex
from .model import ValidationError, record_to_json
from .queryparse import ParamError, parse_search_params, search_result_to_json
from .store import Store


@dataclass
class ServiceConfig:
    store_dir: str = "./mercury-store"
    listen: str = "127.0.0.1:8464"
    providers_file: Optional[str] = None
    log_level: str = "info"
    cors_allow_origin: Optional[str] = None
    ui_dir: Optional[str] = None


def load_config(path: Optional[str] = None) -> ServiceConfig:
    """Read config JSON from `path`, $MERCURY_CONFIG, or fall back to defaults."""
    path = path or os.environ.get("MERCURY_CONFIG")
    if not path:
        return ServiceConfig()
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    known = {f for f in ServiceConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return ServiceConfig(**data)


class ApiException(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


def _api_error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"status": status, "code": code, "message": message})


_STATUS_CODES = {404: "not_found", 405: "method_not_allowed"}


def create_app(config: Optional[ServiceConfig] = None, *,
               store: Optional[Store] = None,
               manager: Optional[harvestmod.HarvestManager] = None) -> FastAPI:
    """Build the service: open the store, replay the journal, index, serve.

    `store`/`manager` injection is for tests; production wiring comes from
    the config alone.
    """
    config = config or ServiceConfig()
    app = FastAPI(title="mercury", docs_url=None, redoc_url=None, openapi_url=None)

    if store is None:
        store = Store(config.store_dir, providers_path=config.providers_file)
    search_index = SearchIndex(store.live_records().values())
    if manager is None:
        manager = harvestmod.HarvestManager(store, search_index)

    ready = threading.Event()
    ready.set()  # replay happened synchronously above
    started = time.monotonic()
    providers_lock = threading.Lock()

    app.state.store = store
    app.state.index = search_index
    app.state.manager = manager
    app.state.ready = ready

    if config.cors_allow_origin:
        from fastapi.middleware.cors import CORSMiddleware
        app.add_middleware(CORSMiddleware, allow_origins=[config.cors_allow_origin],
                           allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ApiException)
    async def handle_api_exception(request: Request, exc: ApiException):
        return _api_error(exc.status, exc.code, exc.message)

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_exception(request: Request, exc: StarletteHTTPException):
        code = _STATUS_CODES.get(exc.status_code, "http_error")
        return _api_error(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return _api_error(400, "bad_request", str(exc))

    def require_ready():
        if not ready.is_set():
            raise ApiException(503, "not_ready", "journal replay in progress")

    # -- search ------------------------------------------------------------

    @app.get("/api/search")
    def api_search(request: Request) -> Response:
        require_ready()
        try:
            query = parse_search_params(dict(request.query_params))
        except ParamError as exc:
            raise ApiException(400, exc.code, str(exc))
        result = search_index.search(query)
        return Response(content=search_result_to_json(result),
                        media_type="application/json")

    @app.get("/api/records/{record_id:path}")
    def api_record(request: Request, record_id: str) -> Response:
        require_ready()
        # Decode exactly once from the raw request path: ASGI servers and the
        # test client disagree on how many times scope["path"] was unquoted.
        raw = request.scope.get("raw_path", b"").decode("latin-1")
        prefix = "/api/records/"
        if raw.startswith(prefix):
            record_id = unquote(raw[len(prefix):])
        record = store.get_record(record_id)
        if record is None:
            raise ApiException(404, "not_found", f"no such record: {record_id}")
        return Response(content=record_to_json(record), media_type="application/json")

    # -- providers and harvesting -------------------------------------------

    def provider_listing(provider, states):
        state = states.get(provider.provider_key) or harvestmod.HarvestState(
            provider.provider_key)
        listing = harvestmod.provider_to_dict(provider)
        listing["state"] = harvestmod.state_to_dict(state)
        return listing

    @app.get("/api/providers")
    def api_providers() -> JSONResponse:
        require_ready()
        with providers_lock:
            providers = harvestmod.load_providers(store)
            states = harvestmod.load_states(store)
        return JSONResponse([provider_listing(providers[k], states)
                             for k in sorted(providers)])

    @app.post("/api/providers")
    async def api_add_provider(request: Request) -> JSONResponse:
        require_ready()
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ApiException(400, "invalid_config", f"body is not JSON: {exc}")
        if not isinstance(body, dict):
            raise ApiException(400, "invalid_config", "body must be a JSON object")
        try:
            provider = harvestmod.provider_from_dict(body)
        except ValidationError as exc:
            raise ApiException(400, "invalid_config", str(exc))
        with providers_lock:
            providers = harvestmod.load_providers(store)
            providers[provider.provider_key] = provider
            harvestmod.save_providers(store, providers)
            states = harvestmod.load_states(store)
        return JSONResponse(provider_listing(provider, states), status_code=201)

    @app.post("/api/harvest/{provider_key}")
    def api_trigger_harvest(provider_key: str, mode: str = "incremental") -> JSONResponse:
        require_ready()
        if mode not in ("full", "incremental"):
            raise ApiException(400, "bad_mode", f"mode must be full|incremental: {mode!r}")
        with providers_lock:
            providers = harvestmod.load_providers(store)
        provider = providers.get(provider_key)
        if provider is None:
            raise ApiException(404, "not_found", f"unknown provider: {provider_key}")
        try:
            run_id = manager.trigger(provider, mode)
        except harvestmod.HarvestInProgress:
            raise ApiException(409, "harvest_in_progress",
                               f"harvest already running for {provider_key}")
        return JSONResponse({"run_id": run_id, "provider_key": provider_key,
                             "mode": mode, "status": "running"}, status_code=202)

    @app.get("/api/harvest/runs/{run_id}")
    def api_harvest_run(run_id: str) -> JSONResponse:
        require_ready()
        run = manager.get_run(run_id)
        if run is None:
            raise ApiException(404, "not_found", f"unknown run: {run_id}")
        body = {"run_id": run.run_id, "provider_key": run.provider_key,
                "mode": run.mode, "status": run.status}
        if run.report is not None:
            body["report"] = harvestmod.report_to_dict(run.report)
        return JSONResponse(body)

    # -- health --------------------------------------------------------------

    @app.get("/health")
    def health() -> JSONResponse:
        if not ready.is_set():
            return _api_error(503, "not_ready", "journal replay in progress")
        with providers_lock:
            provider_count = len(harvestmod.load_providers(store))
        return JSONResponse({
            "status": "ok",
            "live_records": store.live_count(),
            "providers": provider_count,
            "uptime_seconds": int(time.monotonic() - started),
        })

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn
    host, _, port_text = config.listen.partition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port_text or 8464),
                log_level=config.log_level)
