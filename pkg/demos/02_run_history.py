"""The run history: every execution lands in an append-only store.

Reports arrive as JSON text (here built in memory), get enriched with the
execution context, and become immutable RunRecords. The per-path series
across runs is the substrate all analysis works on.
"""

import json
import tempfile
from datetime import datetime, timedelta, timezone

from perftrack import RunStore, enrich, parse_report

REPORT_TEMPLATE = {
    "schema_version": 1,
    "case": "cavity-flow",
    "measures": {
        "name": "execution",
        "value": None,
        "unit": "s",
        "children": [
            {"name": "solver", "value": None, "unit": "s", "labels": ["computation"]},
            {"name": "output", "value": 4.0, "unit": "s", "labels": ["io"]},
        ],
    },
}

t0 = datetime(2022, 5, 2, 3, 0, tzinfo=timezone.utc)
durations = [61.2, 60.8, 61.5, 60.9, 74.0, 61.1]  # run 5 hit a slow file system

with tempfile.TemporaryDirectory() as tmp:
    store_dir = f"{tmp}/store"
    with RunStore(store_dir, writer=True, create=True) as store:
        for i, total in enumerate(durations):
            raw = json.loads(json.dumps(REPORT_TEMPLATE))
            raw["measures"]["value"] = total
            raw["measures"]["children"][0]["value"] = total - 8.0
            report = parse_report(json.dumps(raw))
            record = enrich(
                report.tree,
                report.case,
                report.iteration,
                environ={"OMP_NUM_THREADS": "8", "HOME": "/secret/never/stored"},
                ci={"commit": f"{i:07x}", "branch": "main", "job_id": f"job-{i}"},
                started_at=t0 + timedelta(hours=i),
                finished_at=t0 + timedelta(hours=i, seconds=total),
            )
            run_id = store.put(record)
            print(f"ingested run {i}: {run_id[:12]}  ({total:.1f} s)")
            store.put(record)  # a CI retry: idempotent, still one record

    store = RunStore(store_dir)  # read-only reopen, as the API server does
    print(f"\nstore holds {len(store)} runs of cases {store.cases()}")
    rec = store.get(next(store.run_ids()))
    print(f"captured env of run 0: {rec.meta.env}  (allowlist filtered)")

    series = store.query_series("cavity-flow", "execution")
    print(f"\nseries for path 'execution' [{series.unit}]:")
    for point in series.points:
        print(f"  {point.started_at:%Y-%m-%d %H:%M}  {point.value:6.1f}  {point.run_id[:12]}")
