"""Operator command line: serve, manage providers, harvest, search, export.

Exit codes: 0 success, 1 operational error, 2 usage error. The search
command reuses the API's parameter parser and result serializer, so
`search --json` output is byte-identical to the corresponding /api/search
response body.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path

from . import harvest as harvestmod
from .index import SearchIndex
from .model import ValidationError, format_instant, record_to_json
from .mockprovider import load_corpus, serve as serve_mock
from .queryparse import ParamError, parse_search_params, search_result_to_json
from .service import ServiceConfig, load_config, run_service
from .store import Store


class CliError(Exception):
    """Operational failure; prints the message and exits 1."""


class UsageError(Exception):
    """Bad arguments; prints the message and exits 2."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mercury",
        description="Harvest scientific metadata over OAI-PMH and search it.")
    parser.add_argument("--store", help="store directory (default from config)")
    parser.add_argument("--config", help="config file path (or $MERCURY_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", help="host:port (default from config)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("provider", help="manage configured providers")
    psub = p.add_subparsers(dest="provider_command", required=True)
    pa = psub.add_parser("add", help="add or update a provider")
    pa.add_argument("--key", required=True, help="provider key (slug)")
    pa.add_argument("--url", required=True, help="OAI-PMH base URL")
    pa.add_argument("--prefix", default="oai_dc", help="metadataPrefix")
    pa.add_argument("--set", dest="set_spec", help="optional set to harvest")
    pa.add_argument("--timeout", type=float, default=30.0, help="page timeout seconds")
    pa.set_defaults(func=cmd_provider_add)
    pl = psub.add_parser("list", help="list providers and harvest state")
    pl.set_defaults(func=cmd_provider_list)
    pr = psub.add_parser("remove", help="remove a provider")
    pr.add_argument("key")
    pr.set_defaults(func=cmd_provider_remove)

    p = sub.add_parser("harvest", help="harvest one provider")
    p.add_argument("key")
    p.add_argument("--full", action="store_true", help="force a full harvest")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("search", help="query the index")
    p.add_argument("query", nargs="?", default="", help="free-text terms")
    p.add_argument("--bbox", help="west,south,east,north")
    p.add_argument("--start", help="RFC 3339 instant or YYYY-MM-DD")
    p.add_argument("--end", help="RFC 3339 instant or YYYY-MM-DD")
    p.add_argument("--provider", help="filter by provider key")
    p.add_argument("--keyword", help="filter by exact keyword")
    p.add_argument("--page", type=int, default=1)
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--json", action="store_true",
                   help="print the raw API response body")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("reindex", help="replay the journal and report live count")
    p.set_defaults(func=cmd_reindex)

    p = sub.add_parser("export", help="write all live records as JSON lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("mock-provider", help="serve a mock OAI-PMH provider")
    p.add_argument("--corpus", required=True, help="corpus JSON file")
    p.add_argument("--listen", default="127.0.0.1:8010", help="host:port")
    p.set_defaults(func=cmd_mock_provider)

    return parser


def _config(args) -> ServiceConfig:
    config = load_config(args.config)
    if args.store:
        config.store_dir = args.store
    return config


def _open_store(args) -> Store:
    config = _config(args)
    return Store(config.store_dir, providers_path=config.providers_file)


def cmd_serve(args) -> int:
    config = _config(args)
    if args.listen:
        config.listen = args.listen
    run_service(config)
    return 0


def cmd_provider_add(args) -> int:
    data = {"provider_key": args.key, "base_url": args.url,
            "metadata_prefix": args.prefix, "page_timeout": args.timeout}
    if args.set_spec:
        data["set"] = args.set_spec
    try:
        provider = harvestmod.provider_from_dict(data)
    except ValidationError as exc:
        raise UsageError(str(exc))
    store = _open_store(args)
    providers = harvestmod.load_providers(store)
    providers[provider.provider_key] = provider
    harvestmod.save_providers(store, providers)
    print(f"provider {provider.provider_key} saved")
    return 0


def cmd_provider_list(args) -> int:
    store = _open_store(args)
    providers = harvestmod.load_providers(store)
    states = harvestmod.load_states(store)
    if not providers:
        print("no providers configured")
        return 0
    for key in sorted(providers):
        provider = providers[key]
        state = states.get(key) or harvestmod.HarvestState(key)
        cursor = (format_instant(state.last_success_datestamp)
                  if state.last_success_datestamp else "-")
        print(f"{key}  {provider.base_url}  prefix={provider.metadata_prefix}  "
              f"outcome={state.last_run_outcome}  cursor={cursor}")
    return 0


def cmd_provider_remove(args) -> int:
    store = _open_store(args)
    providers = harvestmod.load_providers(store)
    if args.key not in providers:
        raise CliError(f"unknown provider: {args.key}")
    del providers[args.key]
    harvestmod.save_providers(store, providers)
    print(f"provider {args.key} removed")
    return 0


def cmd_harvest(args) -> int:
    store = _open_store(args)
    providers = harvestmod.load_providers(store)
    provider = providers.get(args.key)
    if provider is None:
        raise CliError(f"unknown provider: {args.key}")
    index = SearchIndex(store.live_records().values())
    manager = harvestmod.HarvestManager(store, index)
    mode = "full" if args.full else "incremental"
    report = manager.run_sync(provider, mode)
    if args.json:
        sys.stdout.write(json.dumps(harvestmod.report_to_dict(report),
                                    ensure_ascii=False, separators=(",", ":")))
        sys.stdout.write("\n")
    else:
        _print_report(report)
    if report.error:
        return 1
    return 0


def _print_report(report) -> None:
    columns = ("mode", "pages", "new", "updated", "unchanged", "deleted", "warnings")
    values = [str(getattr(report, c)) for c in columns]
    widths = [max(len(c), len(v)) for c, v in zip(columns, values)]
    print(f"provider: {report.provider_key}")
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    print("  ".join(v.ljust(w) for v, w in zip(values, widths)))
    if report.error:
        print(f"error: {report.error}")


def cmd_search(args) -> int:
    params: dict[str, str] = {}
    if args.query:
        params["q"] = args.query
    for name in ("bbox", "start", "end", "provider", "keyword"):
        value = getattr(args, name)
        if value:
            params[name] = value
    params["page"] = str(args.page)
    params["size"] = str(args.size)
    try:
        query = parse_search_params(params)
    except ParamError as exc:
        raise UsageError(str(exc))

    store = _open_store(args)
    index = SearchIndex(store.live_records().values())
    result = index.search(query)
    if args.json:
        sys.stdout.write(search_result_to_json(result))
        return 0
    print(f"total: {result.total}")
    start_rank = (query.page - 1) * query.size
    for i, hit in enumerate(result.hits, start=start_rank + 1):
        print(f"{i:3d}. {hit.title}  [{hit.provider_key}]  "
              f"score={hit.score:.6f}  {hit.record_id}")
    if result.facets.providers:
        facet_text = ", ".join(f"{k}={c}" for k, c in result.facets.providers)
        print(f"providers: {facet_text}")
    return 0


def cmd_reindex(args) -> int:
    store = _open_store(args)
    index = SearchIndex(store.live_records().values())
    print(f"live records: {index.doc_count}")
    return 0


def cmd_export(args) -> int:
    store = _open_store(args)
    live = store.live_records()
    out_path = Path(args.out)
    with open(out_path, "w", encoding="utf-8") as fh:
        for record_id in sorted(live):
            fh.write(record_to_json(live[record_id]))
            fh.write("\n")
    print(f"exported {len(live)} records to {out_path}")
    return 0


def cmd_mock_provider(args) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load corpus {args.corpus}: {exc}")
    server = serve_mock(corpus, args.listen)
    print(f"mock provider serving {len(corpus.records)} records at {server.base_url}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except harvestmod.HarvestInProgress as exc:
        print(f"error: harvest in progress for {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
