"""Read-mostly HTTP API over a run store.

Everything the dashboard's top-down flow needs, versioned under /api/v1:

    GET  /api/v1/cases
    GET  /api/v1/cases/{case}/runs?limit&branch
    GET  /api/v1/runs/{id}
    GET  /api/v1/runs/{id}/labels
    GET  /api/v1/runs/{id}/sunburst?path
    GET  /api/v1/series?case&path&unit&branch
    GET  /api/v1/compare?a&b
    GET  /api/v1/diff?from&to
    POST /api/v1/runs

All bodies are JSON. Errors carry {"code": ..., "message": ...}; unknown ids
are 404, malformed queries 400. Series responses embed the per-point
classification and offline change points computed with the server's analysis
params, which are echoed back so clients can display the thresholds in
force. Commit diffs are delegated to a configured external command template
({from}/{to} placeholders), keeping the service VCS-agnostic.
"""

from __future__ import annotations

import json
import math
import subprocess
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .analysis import (
    AnalysisParams,
    annotate_series,
    point_class_to_obj,
)
from .campaign import render_command, CampaignError
from .reports import (
    ReportError,
    canonical_json_bytes,
    parse_report,
)
from .store import (
    RunStore,
    StoreConflictError,
    StoreError,
    StoreLockedError,
    UnknownRunError,
    enrich,
    format_ts,
    parse_ts,
    record_to_obj,
)
from .tree import (
    InvalidTreeError,
    MeasureTree,
    SunburstNode,
    UnknownUnitError,
    aggregate_by_label,
    flatten_paths,
    sunburst,
    subtree,
)

API_PREFIX = "/api/v1"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        super().__init__(message)
        self.message = message


def _sunburst_to_obj(n: SunburstNode) -> dict:
    return {
        "path": n.path,
        "name": n.name,
        "value": n.value,
        "fraction": n.fraction,
        "self_value": n.self_value,
        "children": [_sunburst_to_obj(c) for c in n.children],
    }


def _run_summary(rec) -> dict:
    return {
        "run_id": rec.run_id,
        "case": rec.case,
        "iteration": rec.iteration,
        "commit": rec.meta.commit,
        "branch": rec.meta.branch,
        "started_at": format_ts(rec.meta.started_at),
        "root_path": rec.tree.root.name,
        "root_value": rec.tree.root.value,
        "root_unit": rec.tree.root.unit,
    }


def compare_runs(tree_a: MeasureTree, tree_b: MeasureTree) -> list[dict]:
    """Join the flattened paths of two runs; order by |relative delta| desc.

    Paths present in only one run are marked absent rather than zero-filled
    and sort after every row with a computable relative delta.
    """
    a = {p.path: p for p in flatten_paths(tree_a)}
    b = {p.path: p for p in flatten_paths(tree_b)}
    rows = []
    for path in sorted(set(a) | set(b)):
        pa, pb = a.get(path), b.get(path)
        row: dict = {"path": path}
        if pa is None or pb is None:
            row.update(
                value_a=None if pa is None else pa.value,
                value_b=None if pb is None else pb.value,
                unit=(pa or pb).unit,
                absent_in="b" if pb is None else "a",
                delta=None,
                relative=None,
            )
        else:
            delta = pb.value - pa.value
            if pa.value != 0:
                relative = delta / abs(pa.value)
            else:
                relative = math.inf if delta > 0 else (-math.inf if delta < 0 else 0.0)
            row.update(
                value_a=pa.value,
                value_b=pb.value,
                unit=pa.unit if pa.unit == pb.unit else f"{pa.unit}|{pb.unit}",
                delta=delta,
                relative=relative,
            )
        rows.append(row)

    def sort_key(row: dict):
        rel = row["relative"]
        if rel is None:
            return (1, 0.0, row["path"])
        return (0, -abs(rel), row["path"])

    rows.sort(key=sort_key)
    return rows


@dataclass
class ServerConfig:
    store_dir: str
    diff_command: str = ""
    params: AnalysisParams = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.params is None:
            self.params = AnalysisParams()


class _Api:
    """Request-independent logic, separated from the HTTP plumbing."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.store = RunStore(config.store_dir)
        self._lock = threading.Lock()

    def refresh(self) -> None:
        with self._lock:
            self.store.refresh()

    # Each handler returns (status, payload-object).

    def cases(self, q) -> tuple[int, object]:
        return 200, {"cases": self.store.cases()}

    def runs_of_case(self, case: str, q) -> tuple[int, object]:
        limit = _int_param(q, "limit")
        branch = _str_param(q, "branch")
        recs = self.store.runs(case, branch=branch, limit=limit)
        if not recs and case not in self.store.cases():
            raise ApiError(404, "unknown-case", f"case {case!r} has no stored runs")
        return 200, {"case": case, "runs": [_run_summary(r) for r in recs]}

    def run(self, run_id: str, q) -> tuple[int, object]:
        return 200, record_to_obj(self._get_run(run_id))

    def labels(self, run_id: str, q) -> tuple[int, object]:
        rec = self._get_run(run_id)
        unit = _str_param(q, "unit")
        path = _str_param(q, "path")
        tree = rec.tree if path is None else _subtree_or_404(rec.tree, path)
        try:
            agg = aggregate_by_label(tree, unit)
        except UnknownUnitError as e:
            raise ApiError(400, "unknown-unit", str(e)) from None
        return 200, {
            "run_id": run_id,
            "unit": agg.unit,
            "entries": dict(sorted(agg.entries.items())),
        }

    def sunburst(self, run_id: str, q) -> tuple[int, object]:
        rec = self._get_run(run_id)
        unit = _str_param(q, "unit")
        path = _str_param(q, "path")
        tree = rec.tree if path is None else _subtree_or_404(rec.tree, path)
        try:
            sb = sunburst(tree, unit)
        except UnknownUnitError as e:
            raise ApiError(400, "unknown-unit", str(e)) from None
        return 200, {"run_id": run_id, "sunburst": _sunburst_to_obj(sb)}

    def series(self, q) -> tuple[int, object]:
        case = _require(q, "case")
        path = _require(q, "path")
        unit = _str_param(q, "unit")
        branch = _str_param(q, "branch")
        since_raw = _str_param(q, "since")
        since = None
        if since_raw:
            try:
                since = parse_ts(since_raw)
            except ValueError:
                raise ApiError(400, "bad-since", f"cannot parse timestamp {since_raw!r}") from None
        try:
            series = self.store.query_series(
                case, path, unit=unit, branch=branch, since=since
            )
        except ValueError as e:
            raise ApiError(400, "bad-path", str(e)) from None
        classes, shifts = annotate_series(series, self.config.params)
        return 200, {
            "case": case,
            "path": path,
            "unit": series.unit,
            "points": [
                {
                    "run_id": p.run_id,
                    "started_at": format_ts(p.started_at),
                    "value": p.value,
                    "class": point_class_to_obj(c),
                }
                for p, c in zip(series.points, classes)
            ],
            "change_points": [
                {
                    "index": cp.index,
                    "before_median": cp.before_median,
                    "after_median": cp.after_median,
                    "score": cp.score,
                }
                for cp in shifts
            ],
            "params": self.config.params.to_obj(),
        }

    def compare(self, q) -> tuple[int, object]:
        id_a = _require(q, "a")
        id_b = _require(q, "b")
        rec_a = self._get_run(id_a)
        rec_b = self._get_run(id_b)
        return 200, {
            "run_a": _run_summary(rec_a),
            "run_b": _run_summary(rec_b),
            "commits": [rec_a.meta.commit, rec_b.meta.commit],
            "rows": compare_runs(rec_a.tree, rec_b.tree),
        }

    def diff(self, q) -> tuple[int, object]:
        commit_from = _require(q, "from")
        commit_to = _require(q, "to")
        if not self.config.diff_command:
            raise ApiError(501, "no-diff-command", "server started without --diff-cmd")
        try:
            argv = render_command(
                self.config.diff_command, {"from": commit_from, "to": commit_to}
            )
            proc = subprocess.run(
                argv, timeout=60, stdout=subprocess.PIPE, stderr=subprocess.PIPE
            )
        except (CampaignError, OSError, subprocess.TimeoutExpired) as e:
            raise ApiError(502, "vcs-error", str(e)) from None
        if proc.returncode != 0:
            raise ApiError(
                502,
                "vcs-error",
                proc.stderr.decode(errors="replace") or f"diff command exited {proc.returncode}",
            )
        return 200, {
            "from": commit_from,
            "to": commit_to,
            "diff": proc.stdout.decode(errors="replace"),
        }

    def ingest(self, body: bytes) -> tuple[int, object]:
        try:
            obj = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ApiError(400, "bad-json", str(e)) from None
        if not isinstance(obj, dict):
            raise ApiError(400, "bad-json", "body must be one object")
        meta = obj.get("meta", {})
        if not isinstance(meta, dict):
            raise ApiError(400, "bad-meta", "'meta' must be an object")
        try:
            report = parse_report(body)
        except (ReportError, InvalidTreeError) as e:
            raise ApiError(400, "bad-report", str(e)) from None
        started = parse_ts(meta["started_at"]) if "started_at" in meta else None
        finished = parse_ts(meta["finished_at"]) if "finished_at" in meta else None
        rec = enrich(
            report.tree,
            report.case,
            report.iteration,
            environ=dict(meta.get("env", {})),
            ci={k: str(meta.get(k, "")) for k in (
                "commit", "branch", "pipeline_id", "job_id", "node_count", "task_count"
            )},
            started_at=started,
            finished_at=finished,
            build=dict(meta.get("build", {})),
            platform=str(meta.get("platform", "")),
            env_allowlist=None,  # caller-provided env is already explicit
        )
        try:
            with RunStore(self.config.store_dir, writer=True) as wstore:
                run_id = wstore.put(rec)
        except StoreLockedError as e:
            raise ApiError(503, "store-locked", str(e)) from None
        except StoreConflictError as e:
            raise ApiError(409, "conflict", str(e)) from None
        except StoreError as e:
            raise ApiError(500, "store-error", str(e)) from None
        self.refresh()
        return 201, {"run_id": run_id}

    def _get_run(self, run_id: str):
        try:
            return self.store.get(run_id)
        except UnknownRunError:
            raise ApiError(404, "unknown-run", f"unknown run {run_id!r}") from None


def _subtree_or_404(tree: MeasureTree, path: str) -> MeasureTree:
    try:
        return subtree(tree, path)
    except KeyError:
        raise ApiError(404, "unknown-path", f"path {path!r} not present in run") from None


def _require(q: dict, name: str) -> str:
    value = _str_param(q, name)
    if value is None or value == "":
        raise ApiError(400, "missing-param", f"query parameter {name!r} is required")
    return value


def _str_param(q: dict, name: str) -> str | None:
    values = q.get(name)
    return values[-1] if values else None


def _int_param(q: dict, name: str) -> int | None:
    raw = _str_param(q, name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ApiError(400, "bad-param", f"{name!r} must be an integer") from None


class _Handler(BaseHTTPRequestHandler):
    api: _Api  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: object) -> None:
        body = canonical_json_bytes(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        q = parse_qs(url.query)
        parts = [p for p in url.path.split("/") if p]
        try:
            if not url.path.startswith(API_PREFIX):
                raise ApiError(404, "not-found", f"unknown path {url.path!r}")
            rest = parts[2:]  # strip "api", "v1"
            self.api.refresh()
            status, payload = self._route(method, rest, q)
        except ApiError as e:
            status, payload = e.status, {"code": e.code, "message": e.message}
        except Exception as e:  # noqa: BLE001 -- internal errors become 500s
            status, payload = 500, {"code": "internal", "message": str(e)}
        self._send(status, payload)

    def _route(self, method: str, rest: list[str], q: dict) -> tuple[int, object]:
        api = self.api
        if method == "GET":
            if rest == ["cases"]:
                return api.cases(q)
            if len(rest) == 3 and rest[0] == "cases" and rest[2] == "runs":
                return api.runs_of_case(rest[1], q)
            if len(rest) == 2 and rest[0] == "runs":
                return api.run(rest[1], q)
            if len(rest) == 3 and rest[0] == "runs" and rest[2] == "labels":
                return api.labels(rest[1], q)
            if len(rest) == 3 and rest[0] == "runs" and rest[2] == "sunburst":
                return api.sunburst(rest[1], q)
            if rest == ["series"]:
                return api.series(q)
            if rest == ["compare"]:
                return api.compare(q)
            if rest == ["diff"]:
                return api.diff(q)
        elif method == "POST":
            if rest == ["runs"]:
                length = int(self.headers.get("Content-Length") or 0)
                return api.ingest(self.rfile.read(length))
        raise ApiError(404, "not-found", f"no {method} route for {'/'.join(rest)!r}")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def make_server(config: ServerConfig, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build the HTTP server (not yet serving); port 0 picks a free port."""
    api = _Api(config)
    handler = type("Handler", (_Handler,), {"api": api})
    return ThreadingHTTPServer((host, port), handler)


def serve(
    store_dir: str,
    bind: str = "127.0.0.1:8080",
    diff_command: str = "",
    params: AnalysisParams | None = None,
) -> None:
    """Run the API service until interrupted."""
    host, _, port = bind.rpartition(":")
    server = make_server(
        ServerConfig(store_dir=store_dir, diff_command=diff_command, params=params or AnalysisParams()),
        host=host or "127.0.0.1",
        port=int(port),
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
