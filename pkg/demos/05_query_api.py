"""The query API: what the dashboard consumes.

Seeds a store with a deliberately noisy history, starts the HTTP service on
a free port, and walks the top-down endpoints: cases -> series with
annotations -> label stack -> sunburst -> run comparison -> commit diff
(through a stub VCS command).
"""

import json
import sys
import tempfile
import threading
from datetime import datetime, timedelta, timezone
from http.client import HTTPConnection

from perftrack import MeasureTree, RunStore, enrich, node
from perftrack.server import ServerConfig, make_server


def run_tree(total: float, correction: float) -> MeasureTree:
    return MeasureTree(
        root=node(
            "execution",
            total,
            "s",
            children=[
                node("velocity_correction", correction, "s", labels=["computation"]),
                node("output", 10.0, "s", labels=["io"]),
            ],
        )
    )


t0 = datetime(2022, 9, 1, tzinfo=timezone.utc)
with tempfile.TemporaryDirectory() as tmp:
    store_dir = f"{tmp}/store"
    with RunStore(store_dir, writer=True, create=True) as store:
        for i in range(16):
            correction = 40.0 if i < 10 else 12.0  # a vectorization lands at run 11
            store.put(
                enrich(
                    run_tree(55.0 + correction, correction),
                    "cough",
                    i,
                    ci={"commit": f"c{i:04d}", "branch": "main", "job_id": f"j{i}"},
                    started_at=t0 + timedelta(hours=i),
                )
            )

    stub_diff = f"{sys.executable} -c \"print('--- a/solver.f90 +++ b/solver.f90 @', end=' '); import sys; print(sys.argv[1], '->', sys.argv[2])\" {{from}} {{to}}"
    server = make_server(ServerConfig(store_dir=store_dir, diff_command=stub_diff), port=0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address

    def get(path):
        conn = HTTPConnection(host, port, timeout=10)
        conn.request("GET", path)
        return json.loads(conn.getresponse().read())

    print("cases:", get("/api/v1/cases")["cases"])

    series = get("/api/v1/series?case=cough&path=execution")
    print(f"\nseries of 'execution' ({len(series['points'])} points):")
    for p in series["points"]:
        print(f"  {p['value']:6.1f}  {p['class']['kind']}")
    for cp in series["change_points"]:
        print(f"change point at index {cp['index']}: {cp['before_median']:.1f} -> {cp['after_median']:.1f}")

    runs = get("/api/v1/cases/cough/runs")["runs"]
    before, after = runs[9], runs[10]
    print("\nlabel stack of the improved run:", get(f"/api/v1/runs/{after['run_id']}/labels")["entries"])

    compare = get(f"/api/v1/compare?a={before['run_id']}&b={after['run_id']}")
    top = compare["rows"][0]
    print(f"\nbiggest mover: {top['path']}  {top['value_a']} -> {top['value_b']} s")

    diff = get(f"/api/v1/diff?from={before['commit']}&to={after['commit']}")
    print(f"commit diff (via stub command): {diff['diff'].strip()}")

    server.shutdown()
    server.server_close()
