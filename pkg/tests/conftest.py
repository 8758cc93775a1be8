"""Shared fixtures: temp stores, running mock providers, demo corpus."""

from __future__ import annotations

import importlib.resources

import pytest

from mercury.harvest import HarvestState, ProviderConfig, harvest
from mercury.index import SearchIndex
from mercury.mockprovider import MockCorpus, MockProviderServer, corpus_from_dict
from mercury.store import Store


@pytest.fixture
def store(tmp_path) -> Store:
    s = Store(tmp_path / "store")
    yield s
    s.close()


@pytest.fixture
def mock_server():
    """Factory that starts mock providers and stops them all afterwards."""
    servers: list[MockProviderServer] = []

    def _start(corpus: MockCorpus) -> MockProviderServer:
        server = MockProviderServer(corpus).start()
        servers.append(server)
        return server

    yield _start
    for server in servers:
        server.stop()


@pytest.fixture
def demo_corpus() -> MockCorpus:
    import json
    text = (importlib.resources.files("mercury") / "data" / "demo_corpus.json").read_text()
    return corpus_from_dict(json.loads(text))


def no_sleep(_seconds: float) -> None:
    pass


def run_harvest(server, store, index=None, *, mode="full", provider_key="demo",
                state=None, sleep=no_sleep, **kwargs):
    """One harvest against a running mock server with sleeping disabled."""
    provider = ProviderConfig(provider_key=provider_key, base_url=server.base_url)
    index = index if index is not None else SearchIndex(store.live_records().values())
    state = state or HarvestState(provider_key)
    report, new_state = harvest(provider, state, mode, store, index,
                                sleep=sleep, **kwargs)
    return report, new_state, index
