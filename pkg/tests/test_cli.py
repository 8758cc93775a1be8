import json

import pytest
from fastapi.testclient import TestClient

from mercury.cli import main
from mercury.model import record_from_json
from mercury.service import create_app
from mercury.store import Store


@pytest.fixture
def store_dir(tmp_path):
    return str(tmp_path / "store")


@pytest.fixture
def harvested_dir(tmp_path, mock_server, demo_corpus, capsys):
    """A store directory already holding the harvested demo corpus plus the
    provider registration pointing at a live mock server."""
    server = mock_server(demo_corpus)
    directory = str(tmp_path / "store")
    assert main(["--store", directory, "provider", "add", "--key", "demo",
                 "--url", server.base_url]) == 0
    assert main(["--store", directory, "harvest", "demo", "--full"]) == 0
    capsys.readouterr()  # swallow setup output
    return directory, server


class TestProviderCommands:
    def test_add_list_remove(self, store_dir, capsys):
        assert main(["--store", store_dir, "provider", "add", "--key", "ornl",
                     "--url", "http://127.0.0.1:9/oai"]) == 0
        assert main(["--store", store_dir, "provider", "list"]) == 0
        out = capsys.readouterr().out
        assert "ornl" in out and "never_run" in out

        assert main(["--store", store_dir, "provider", "remove", "ornl"]) == 0
        assert main(["--store", store_dir, "provider", "list"]) == 0
        assert "no providers" in capsys.readouterr().out

    def test_add_malformed_url_is_usage_error(self, store_dir, capsys):
        assert main(["--store", store_dir, "provider", "add", "--key", "x",
                     "--url", "not-a-url"]) == 2
        assert "usage error" in capsys.readouterr().err

    def test_remove_unknown_is_operational_error(self, store_dir, capsys):
        assert main(["--store", store_dir, "provider", "remove", "ghost"]) == 1
        assert "unknown provider" in capsys.readouterr().err


class TestHarvestCommand:
    def test_full_harvest_prints_table(self, store_dir, mock_server, demo_corpus, capsys):
        server = mock_server(demo_corpus)
        main(["--store", store_dir, "provider", "add", "--key", "demo",
              "--url", server.base_url])
        capsys.readouterr()
        assert main(["--store", store_dir, "harvest", "demo", "--full"]) == 0
        out = capsys.readouterr().out
        assert "provider: demo" in out
        assert "new" in out and "25" in out

    def test_json_report(self, store_dir, mock_server, demo_corpus, capsys):
        server = mock_server(demo_corpus)
        main(["--store", store_dir, "provider", "add", "--key", "demo",
              "--url", server.base_url])
        capsys.readouterr()
        assert main(["--store", store_dir, "harvest", "demo", "--full", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["new"] == 25 and report["pages"] == 3

    def test_unknown_provider_exit_1(self, store_dir, capsys):
        assert main(["--store", store_dir, "harvest", "ghost"]) == 1
        assert "unknown provider" in capsys.readouterr().err

    def test_incremental_after_full(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "harvest", "demo", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["new"] == 0 and report["mode"] == "incremental"


class TestSearchCommand:
    def test_table_output(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "search", "soil"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("total: ")
        assert "score=" in out

    def test_json_matches_api_body(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "search", "soil carbon", "--json"]) == 0
        cli_body = capsys.readouterr().out

        app = create_app(store=Store(directory))
        with TestClient(app) as client:
            api_body = client.get("/api/search", params={"q": "soil carbon"}).text
        assert cli_body == api_body

    def test_bad_bbox_usage_error(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "search", "x", "--bbox", "1,2,3"]) == 2

    def test_filters_and_paging(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "search", "", "--provider", "demo",
                     "--page", "2", "--size", "5", "--json"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["total"] == 25
        assert len(body["hits"]) == 5


class TestReindexExport:
    def test_reindex_reports_live_count(self, harvested_dir, capsys):
        directory, _ = harvested_dir
        assert main(["--store", directory, "reindex"]) == 0
        assert "live records: 25" in capsys.readouterr().out

    def test_export_writes_canonical_lines(self, harvested_dir, tmp_path, capsys):
        directory, _ = harvested_dir
        out_file = tmp_path / "dump.ndjson"
        assert main(["--store", directory, "export", "--out", str(out_file)]) == 0
        lines = out_file.read_text().splitlines()
        assert len(lines) == 25
        store = Store(directory)
        live = store.live_records()
        exported = [record_from_json(line) for line in lines]
        assert {r.record_id for r in exported} == set(live)
        assert [r.record_id for r in exported] == sorted(live)
        store.close()

    def test_export_then_replay_reproduces_search_results(self, harvested_dir,
                                                          tmp_path, capsys):
        directory, _ = harvested_dir
        out_file = tmp_path / "dump.ndjson"
        main(["--store", directory, "export", "--out", str(out_file)])
        capsys.readouterr()

        fresh_dir = str(tmp_path / "fresh")
        fresh = Store(fresh_dir)
        for line in out_file.read_text().splitlines():
            fresh.append_record(record_from_json(line))
        fresh.close()

        main(["--store", directory, "search", "soil carbon flux", "--json"])
        original = capsys.readouterr().out
        main(["--store", fresh_dir, "search", "soil carbon flux", "--json"])
        reimported = capsys.readouterr().out
        assert original == reimported


class TestUsage:
    def test_unknown_flag_exits_2(self, store_dir):
        with pytest.raises(SystemExit) as err:
            main(["--store", store_dir, "search", "--bogus"])
        assert err.value.code == 2

    def test_missing_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_mock_provider_missing_corpus_file(self, store_dir, capsys):
        assert main(["--store", store_dir, "mock-provider",
                     "--corpus", "/nowhere/corpus.json"]) == 1
        assert "cannot load corpus" in capsys.readouterr().err
