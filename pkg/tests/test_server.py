import json
import sys
import threading
from http.client import HTTPConnection

import pytest

from perftrack.analysis import AnalysisParams, annotate_series, point_class_to_obj
from perftrack.server import ServerConfig, compare_runs, make_server
from perftrack.store import RunStore
from perftrack.tree import MeasureTree, aggregate_by_label, node, sunburst

from scenarios import (
    GPFS_CASE,
    ROMIO_CASE,
    ROMIO_SHIFT_INDEX,
    ROMIO_VALUES,
    VECTOR_CASE,
    VECTOR_PATH,
    gpfs_trees,
    romio_trees,
    seed_store,
    vector_after,
    vector_before,
)

DIFF_STUB = f"{sys.executable} -c \"import sys; print('diff', sys.argv[1], sys.argv[2])\" {{from}} {{to}}"


@pytest.fixture(scope="module")
def seeded_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("api") / "store"
    seed_store(root, GPFS_CASE, gpfs_trees())
    seed_store(root, ROMIO_CASE, romio_trees())
    seed_store(
        root, VECTOR_CASE, [vector_before(), vector_after()], commits=["before", "after"]
    )
    return root


@pytest.fixture(scope="module")
def api(seeded_store):
    config = ServerConfig(store_dir=str(seeded_store), diff_command=DIFF_STUB)
    server = make_server(config, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server.server_address
    server.shutdown()
    server.server_close()


def request(api, method, path, body=None):
    conn = HTTPConnection(*api, timeout=10)
    headers = {"Content-Type": "application/json"} if body else {}
    conn.request(method, path, body=body, headers=headers)
    resp = conn.getresponse()
    payload = json.loads(resp.read().decode())
    conn.close()
    return resp.status, payload


def get(api, path):
    return request(api, "GET", path)


class TestEndpoints:
    def test_cases_sorted(self, api):
        status, payload = get(api, "/api/v1/cases")
        assert status == 200
        assert payload["cases"] == sorted([GPFS_CASE, ROMIO_CASE, VECTOR_CASE])

    def test_runs_of_case(self, api):
        status, payload = get(api, f"/api/v1/cases/{ROMIO_CASE}/runs?limit=5")
        assert status == 200
        assert len(payload["runs"]) == 5
        values = [r["root_value"] for r in payload["runs"]]
        assert values == ROMIO_VALUES[-5:]

    def test_unknown_case_404(self, api):
        status, payload = get(api, "/api/v1/cases/nope/runs")
        assert status == 404 and payload["code"] == "unknown-case"

    def test_run_record(self, api, seeded_store):
        run_id = next(RunStore(seeded_store).run_ids())
        status, payload = get(api, f"/api/v1/runs/{run_id}")
        assert status == 200
        assert payload["run_id"] == run_id
        assert payload["measures"]["name"] == "execution"

    def test_series_annotations_match_direct_analysis(self, api, seeded_store):
        status, payload = get(
            api, f"/api/v1/series?case={ROMIO_CASE}&path=simulation"
        )
        assert status == 200
        assert len(payload["points"]) == 30
        assert [p["value"] for p in payload["points"]] == ROMIO_VALUES
        assert [cp["index"] for cp in payload["change_points"]] == [ROMIO_SHIFT_INDEX]
        # oracle: the module called directly on the same series
        series = RunStore(seeded_store).query_series(ROMIO_CASE, "simulation")
        classes, shifts = annotate_series(series, AnalysisParams())
        assert [p["class"] for p in payload["points"]] == [
            point_class_to_obj(c) for c in classes
        ]
        assert payload["params"] == AnalysisParams().to_obj()

    def test_labels_match_direct_aggregation(self, api, seeded_store):
        store = RunStore(seeded_store)
        run_id = store.runs(GPFS_CASE)[5].run_id
        status, payload = get(api, f"/api/v1/runs/{run_id}/labels")
        assert status == 200
        direct = aggregate_by_label(store.get(run_id).tree)
        assert payload["entries"] == pytest.approx(direct.entries)
        assert payload["entries"]["io"] == 50.0

    def test_sunburst_matches_direct(self, api, seeded_store):
        store = RunStore(seeded_store)
        run_id = store.runs(VECTOR_CASE)[0].run_id
        status, payload = get(api, f"/api/v1/runs/{run_id}/sunburst")
        assert status == 200
        direct = sunburst(store.get(run_id).tree)

        def walk(obj, sb):
            assert obj["path"] == sb.path
            assert obj["fraction"] == pytest.approx(sb.fraction)
            assert len(obj["children"]) == len(sb.children)
            for o, s in zip(obj["children"], sb.children):
                walk(o, s)

        walk(payload["sunburst"], direct)

    def test_compare_identity_all_zero(self, api, seeded_store):
        run_id = RunStore(seeded_store).runs(VECTOR_CASE)[0].run_id
        status, payload = get(api, f"/api/v1/compare?a={run_id}&b={run_id}")
        assert status == 200
        assert all(row["delta"] == 0 for row in payload["rows"])

    def test_compare_vectorization_top_row(self, api, seeded_store):
        runs = RunStore(seeded_store).runs(VECTOR_CASE)
        status, payload = get(api, f"/api/v1/compare?a={runs[0].run_id}&b={runs[1].run_id}")
        assert status == 200
        top = payload["rows"][0]
        assert top["path"] == VECTOR_PATH
        assert top["delta"] == pytest.approx(-30.0, abs=1e-9)
        assert payload["commits"] == ["before", "after"]

    def test_diff_stub_echoes_commits(self, api):
        status, payload = get(api, "/api/v1/diff?from=AAAA&to=BBBB")
        assert status == 200
        assert "AAAA" in payload["diff"] and "BBBB" in payload["diff"]

    def test_missing_param_400(self, api):
        status, payload = get(api, "/api/v1/series?case=onlycase")
        assert status == 400 and payload["code"] == "missing-param"

    def test_unknown_run_404(self, api):
        status, payload = get(api, "/api/v1/runs/beef")
        assert status == 404 and payload["code"] == "unknown-run"

    def test_unknown_route_404(self, api):
        status, payload = get(api, "/api/v1/nothing")
        assert status == 404 and payload["code"] == "not-found"

    def test_malformed_path_400(self, api):
        status, payload = get(api, f"/api/v1/series?case={GPFS_CASE}&path=//")
        assert status == 400 and payload["code"] == "bad-path"


class TestIngestEndpoint:
    def body(self, value=10.0):
        return json.dumps(
            {
                "schema_version": 1,
                "case": "posted",
                "iteration": 0,
                "measures": {"name": "execution", "value": value, "unit": "s"},
                "meta": {
                    "commit": "deadbeef",
                    "branch": "main",
                    "job_id": "j1",
                    "started_at": "2022-01-01T00:00:00Z",
                    "finished_at": "2022-01-01T00:10:00Z",
                },
            }
        )

    def test_post_ingest_and_idempotence(self, tmp_path):
        root = tmp_path / "store"
        seed_store(root, "seeded", [MeasureTree(root=node("execution", 1, "s"))])
        config = ServerConfig(store_dir=str(root))
        server = make_server(config, port=0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            addr = server.server_address
            status, payload = request(addr, "POST", "/api/v1/runs", self.body())
            assert status == 201
            run_id = payload["run_id"]
            status, payload = request(addr, "POST", "/api/v1/runs", self.body())
            assert status == 201 and payload["run_id"] == run_id
            assert len(RunStore(root)) == 2  # one seeded + one posted
            # same identity but different content: conflict
            status, payload = request(addr, "POST", "/api/v1/runs", self.body(value=99.0))
            assert status == 409 and payload["code"] == "conflict"
            # reads see the new record immediately
            status, payload = request(addr, "GET", "/api/v1/cases")
            assert payload["cases"] == ["posted", "seeded"]
            status, payload = request(addr, "POST", "/api/v1/runs", "{not json")
            assert status == 400
        finally:
            server.shutdown()
            server.server_close()


class TestCompareRuns:
    def test_absent_paths_marked(self):
        a = MeasureTree(root=node("execution", 10, "s", children=[node("x", 1, "s")]))
        b = MeasureTree(root=node("execution", 10, "s"))
        rows = compare_runs(a, b)
        absent = [row for row in rows if row["path"] == "execution/x"]
        assert absent[0]["absent_in"] == "b"
        assert absent[0]["delta"] is None
        assert rows[-1]["path"] == "execution/x"  # absent rows sort last

    def test_ordering_by_relative_delta(self):
        a = MeasureTree(
            root=node(
                "execution",
                100,
                "s",
                children=[node("big", 50, "s"), node("small", 10, "s")],
            )
        )
        b = MeasureTree(
            root=node(
                "execution",
                104,
                "s",
                children=[node("big", 54, "s"), node("small", 16, "s")],
            )
        )
        rows = compare_runs(a, b)
        # relative deltas: small +0.6, big +0.08, root +0.04
        assert [row["path"] for row in rows] == ["execution/small", "execution/big", "execution"]
