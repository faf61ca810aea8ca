"""Append-only history store for simulation runs.

Every execution becomes a RunRecord: the validated measure tree plus the
full execution context (commit, job, environment, build, timestamps). The
store is a single directory::

    runs.log   length-prefixed record log (8-byte little-endian length,
               then the canonical JSON record) -- the source of truth
    runs.idx   JSON-lines index (offset/length/case/... per record),
               derivable from the log and rebuilt when stale
    LOCK       present while a writer owns the store

Exactly one writer at a time (lock file); any number of readers, each seeing
a consistent prefix of the log. Records are immutable once appended;
re-storing an identical record is a no-op and storing different content
under an existing run_id is a conflict.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .reports import (
    ReportFormatError,
    canonical_json_bytes,
    node_to_obj,
    _parse_node,
)
from .tree import MeasureTree, require_valid

LOG_NAME = "runs.log"
IDX_NAME = "runs.idx"
LOCK_NAME = "LOCK"
_LEN = struct.Struct("<Q")

#: Environment capture allowlist: entries ending in "_" match as prefixes,
#: anything else matches the exact variable name.
DEFAULT_ENV_ALLOWLIST = ("OMP_", "MPI_", "SLURM_")


class StoreError(Exception):
    pass


class StoreLockedError(StoreError):
    pass


class StoreConflictError(StoreError):
    """Same run_id, different content."""


class UnknownRunError(StoreError, KeyError):
    def __init__(self, run_id: str):
        self.run_id = run_id
        StoreError.__init__(self, f"unknown run {run_id!r}")


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_ts(ts: datetime) -> str:
    """Fixed-width UTC timestamp; the only form that appears on disk."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_ts(text: str) -> datetime:
    base, frac = text, "0"
    if text.endswith("Z"):
        base = text[:-1]
    if "." in base:
        base, frac = base.split(".", 1)
    dt = datetime.strptime(base, "%Y-%m-%dT%H:%M:%S")
    micro = int(float("0." + frac) * 1_000_000) if frac else 0
    return dt.replace(microsecond=micro, tzinfo=timezone.utc)


@dataclass(frozen=True)
class RunMeta:
    """Execution context captured at ingest time."""

    started_at: datetime
    finished_at: datetime
    commit: str = ""
    branch: str = ""
    pipeline_id: str = ""
    job_id: str = ""
    node_count: int = 1
    task_count: int = 1
    env: dict[str, str] = field(default_factory=dict)
    build: dict[str, str] = field(default_factory=dict)
    platform: str = ""

    def __post_init__(self):
        if self.finished_at < self.started_at:
            raise ValueError("finished_at precedes started_at")
        if self.node_count < 1 or self.task_count < 1:
            raise ValueError("node_count and task_count must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    case: str
    iteration: int
    tree: MeasureTree
    meta: RunMeta
    ingested_at: datetime

    def __post_init__(self):
        if self.ingested_at < self.meta.started_at:
            raise ValueError("ingested_at precedes started_at")


@dataclass(frozen=True)
class SeriesPoint:
    run_id: str
    started_at: datetime
    value: float


@dataclass(frozen=True)
class Series:
    """Per-path value history across runs, ordered by (started_at, run_id)."""

    case: str
    path: str
    unit: str
    points: tuple[SeriesPoint, ...] = ()

    def values(self) -> list[float]:
        return [p.value for p in self.points]


def compute_run_id(case: str, commit: str, started_at: datetime, job_id: str) -> str:
    """Content hash identifying one execution; identical inputs, identical id."""
    payload = canonical_json_bytes([case, commit, format_ts(started_at), job_id])
    return hashlib.sha256(payload).hexdigest()


def filter_env(environ: dict[str, str], allowlist=DEFAULT_ENV_ALLOWLIST) -> dict[str, str]:
    """Keep only allowlisted variables; full environments leak secrets.

    ``allowlist=None`` disables filtering (for already-curated mappings).
    """
    if allowlist is None:
        return dict(sorted(environ.items()))
    prefixes = tuple(e for e in allowlist if e.endswith("_"))
    names = {e for e in allowlist if not e.endswith("_")}
    kept = {
        k: v
        for k, v in environ.items()
        if k in names or (prefixes and k.startswith(prefixes))
    }
    return dict(sorted(kept.items()))


def enrich(
    tree: MeasureTree,
    case: str,
    iteration: int,
    environ: dict[str, str] | None = None,
    ci: dict[str, str] | None = None,
    clock=utcnow,
    *,
    started_at: datetime | None = None,
    finished_at: datetime | None = None,
    build: dict[str, str] | None = None,
    platform: str = "",
    env_allowlist=DEFAULT_ENV_ALLOWLIST,
) -> RunRecord:
    """Wrap a validated tree into a RunRecord with full context metadata.

    Missing CI fields become empty strings, recorded as such. The run_id is
    a content hash over (case, commit, started_at, job_id), which makes
    ingest idempotent across CI retries.
    """
    require_valid(tree)
    ci = ci or {}
    now = clock()
    if started_at is None:
        started_at = now
    if finished_at is None:
        finished_at = max(now, started_at)

    def _count(key: str) -> int:
        raw = ci.get(key, "")
        try:
            n = int(raw)
        except (TypeError, ValueError):
            return 1
        return n if n >= 1 else 1

    meta = RunMeta(
        started_at=started_at,
        finished_at=finished_at,
        commit=str(ci.get("commit", "")),
        branch=str(ci.get("branch", "")),
        pipeline_id=str(ci.get("pipeline_id", "")),
        job_id=str(ci.get("job_id", "")),
        node_count=_count("node_count"),
        task_count=_count("task_count"),
        env=filter_env(environ or {}, env_allowlist),
        build=dict(build or {}),
        platform=platform,
    )
    return RunRecord(
        run_id=compute_run_id(case, meta.commit, started_at, meta.job_id),
        case=case,
        iteration=iteration,
        tree=tree,
        meta=meta,
        ingested_at=max(now, started_at),
    )


def record_to_obj(rec: RunRecord) -> dict[str, Any]:
    return {
        "schema_version": rec.tree.schema_version,
        "run_id": rec.run_id,
        "case": rec.case,
        "iteration": rec.iteration,
        "measures": node_to_obj(rec.tree.root),
        "ingested_at": format_ts(rec.ingested_at),
        "meta": {
            "started_at": format_ts(rec.meta.started_at),
            "finished_at": format_ts(rec.meta.finished_at),
            "commit": rec.meta.commit,
            "branch": rec.meta.branch,
            "pipeline_id": rec.meta.pipeline_id,
            "job_id": rec.meta.job_id,
            "node_count": rec.meta.node_count,
            "task_count": rec.meta.task_count,
            "env": dict(sorted(rec.meta.env.items())),
            "build": dict(sorted(rec.meta.build.items())),
            "platform": rec.meta.platform,
        },
    }


def record_from_obj(obj: dict[str, Any]) -> RunRecord:
    try:
        meta_obj = obj["meta"]
        meta = RunMeta(
            started_at=parse_ts(meta_obj["started_at"]),
            finished_at=parse_ts(meta_obj["finished_at"]),
            commit=meta_obj.get("commit", ""),
            branch=meta_obj.get("branch", ""),
            pipeline_id=meta_obj.get("pipeline_id", ""),
            job_id=meta_obj.get("job_id", ""),
            node_count=int(meta_obj.get("node_count", 1)),
            task_count=int(meta_obj.get("task_count", 1)),
            env=dict(meta_obj.get("env", {})),
            build=dict(meta_obj.get("build", {})),
            platform=meta_obj.get("platform", ""),
        )
        root = _parse_node(obj["measures"], "measures")
        tree = MeasureTree(root=root, schema_version=int(obj["schema_version"]))
        return RunRecord(
            run_id=obj["run_id"],
            case=obj["case"],
            iteration=int(obj.get("iteration", 0)),
            tree=tree,
            meta=meta,
            ingested_at=parse_ts(obj["ingested_at"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ReportFormatError(f"malformed stored record: {e}") from e


def canonical_record_bytes(rec: RunRecord) -> bytes:
    return canonical_json_bytes(record_to_obj(rec))


def _identity_bytes(rec: RunRecord) -> bytes:
    """Record content minus ingested_at: what idempotence is judged on.

    Re-ingesting the same report+metadata (a CI retry) differs only in the
    ingest clock; that must not look like a conflict.
    """
    obj = record_to_obj(rec)
    del obj["ingested_at"]
    return canonical_json_bytes(obj)


@dataclass(frozen=True)
class _IndexEntry:
    run_id: str
    offset: int
    length: int
    case: str
    started_at: datetime
    branch: str

    def sort_key(self):
        return (self.started_at, self.run_id)


class RunStore:
    """Embedded single-writer run history.

    Open read-only by default; pass ``writer=True`` to acquire the lock file
    (``create=True`` makes the directory on first use). Use as a context
    manager or call close() to release the lock.
    """

    def __init__(self, root: str | Path, writer: bool = False, create: bool = False):
        self.root = Path(root)
        self.writer = writer
        self._locked = False
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        if not self.root.is_dir():
            raise StoreError(f"store directory {self.root} does not exist")
        self._log_path = self.root / LOG_NAME
        self._idx_path = self.root / IDX_NAME
        self._lock_path = self.root / LOCK_NAME
        if writer:
            self._acquire_lock()
            self._log_path.touch(exist_ok=True)
        self._entries: list[_IndexEntry] = []
        self._by_id: dict[str, _IndexEntry] = {}
        self._indexed_size = 0
        self._record_cache: dict[str, RunRecord] = {}
        self._load_index()

    # -- lifecycle -----------------------------------------------------------

    def __enter__(self) -> "RunStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._locked:
            try:
                self._lock_path.unlink()
            except FileNotFoundError:
                pass
            self._locked = False

    def _acquire_lock(self) -> None:
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLockedError(
                f"store {self.root} is locked by another writer ({self._lock_path})"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")
        self._locked = True

    @staticmethod
    def break_lock(root: str | Path) -> bool:
        """Remove a stale lock after a crashed writer. Use with care."""
        try:
            (Path(root) / LOCK_NAME).unlink()
            return True
        except FileNotFoundError:
            return False

    # -- index ---------------------------------------------------------------

    def _log_size(self) -> int:
        try:
            return self._log_path.stat().st_size
        except FileNotFoundError:
            return 0

    def _load_index(self) -> None:
        entries: list[_IndexEntry] = []
        try:
            with open(self._idx_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    o = json.loads(line)
                    entries.append(
                        _IndexEntry(
                            run_id=o["run_id"],
                            offset=int(o["offset"]),
                            length=int(o["length"]),
                            case=o["case"],
                            started_at=parse_ts(o["started_at"]),
                            branch=o.get("branch", ""),
                        )
                    )
        except (FileNotFoundError, json.JSONDecodeError, KeyError, ValueError):
            entries = []
        covered = entries[-1].offset + _LEN.size + entries[-1].length if entries else 0
        size = self._log_size()
        if covered > size:
            # Index claims more than the log holds: rebuild from scratch.
            entries, covered = [], 0
        self._entries = entries
        self._by_id = {e.run_id: e for e in entries}
        self._indexed_size = covered
        if covered < size:
            self._scan_tail()
        if self.writer:
            self._write_index()

    def _scan_tail(self) -> None:
        """Index records appended past what the index covers.

        Stops at the first incomplete record so concurrent readers only ever
        see a consistent prefix of the log.
        """
        size = self._log_size()
        if size <= self._indexed_size:
            return
        with open(self._log_path, "rb") as fh:
            fh.seek(self._indexed_size)
            offset = self._indexed_size
            while True:
                header = fh.read(_LEN.size)
                if len(header) < _LEN.size:
                    break
                (length,) = _LEN.unpack(header)
                payload = fh.read(length)
                if len(payload) < length:
                    break
                rec = record_from_obj(json.loads(payload.decode("utf-8")))
                entry = _IndexEntry(
                    run_id=rec.run_id,
                    offset=offset,
                    length=length,
                    case=rec.case,
                    started_at=rec.meta.started_at,
                    branch=rec.meta.branch,
                )
                if rec.run_id not in self._by_id:
                    self._entries.append(entry)
                    self._by_id[rec.run_id] = entry
                self._record_cache[rec.run_id] = rec
                offset += _LEN.size + length
            self._indexed_size = offset

    def _write_index(self) -> None:
        tmp = self._idx_path.with_suffix(".idx.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for e in self._entries:
                fh.write(
                    json.dumps(
                        {
                            "run_id": e.run_id,
                            "offset": e.offset,
                            "length": e.length,
                            "case": e.case,
                            "started_at": format_ts(e.started_at),
                            "branch": e.branch,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        os.replace(tmp, self._idx_path)

    def refresh(self) -> None:
        """Pick up records appended by another process since open."""
        self._scan_tail()

    # -- writes --------------------------------------------------------------

    def put(self, rec: RunRecord) -> str:
        """Durably append one record; idempotent for identical content."""
        if not self.writer:
            raise StoreError("store opened read-only")
        payload = canonical_record_bytes(rec)
        existing = self._by_id.get(rec.run_id)
        if existing is not None:
            if _identity_bytes(self.get(rec.run_id)) == _identity_bytes(rec):
                return rec.run_id  # idempotent re-ingest; the original wins
            raise StoreConflictError(
                f"run {rec.run_id} already stored with different content"
            )
        offset = self._log_size()
        with open(self._log_path, "ab") as fh:
            fh.write(_LEN.pack(len(payload)))
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        entry = _IndexEntry(
            run_id=rec.run_id,
            offset=offset,
            length=len(payload),
            case=rec.case,
            started_at=rec.meta.started_at,
            branch=rec.meta.branch,
        )
        self._entries.append(entry)
        self._by_id[rec.run_id] = entry
        self._record_cache[rec.run_id] = rec
        self._indexed_size = offset + _LEN.size + len(payload)
        with open(self._idx_path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "run_id": entry.run_id,
                        "offset": entry.offset,
                        "length": entry.length,
                        "case": entry.case,
                        "started_at": format_ts(entry.started_at),
                        "branch": entry.branch,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        return rec.run_id

    # -- reads ---------------------------------------------------------------

    def _read_payload(self, entry: _IndexEntry) -> bytes:
        with open(self._log_path, "rb") as fh:
            fh.seek(entry.offset)
            header = fh.read(_LEN.size)
            (length,) = _LEN.unpack(header)
            return fh.read(length)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, run_id: str) -> bool:
        return run_id in self._by_id

    def get(self, run_id: str) -> RunRecord:
        if run_id in self._record_cache:
            return self._record_cache[run_id]
        entry = self._by_id.get(run_id)
        if entry is None:
            raise UnknownRunError(run_id)
        rec = record_from_obj(json.loads(self._read_payload(entry).decode("utf-8")))
        self._record_cache[run_id] = rec
        return rec

    def cases(self) -> list[str]:
        return sorted({e.case for e in self._entries})

    def run_ids(self) -> Iterator[str]:
        for e in self._entries:
            yield e.run_id

    def runs(
        self, case: str, branch: str | None = None, limit: int | None = None
    ) -> list[RunRecord]:
        """Records of one case in (started_at, run_id) order.

        ``limit`` keeps the most recent N, still returned oldest first.
        """
        entries = [e for e in self._entries if e.case == case]
        if branch is not None:
            entries = [e for e in entries if e.branch == branch]
        entries.sort(key=_IndexEntry.sort_key)
        if limit is not None and limit >= 0:
            entries = entries[-limit:] if limit else []
        return [self.get(e.run_id) for e in entries]

    def query_series(
        self,
        case: str,
        path: str,
        unit: str | None = None,
        branch: str | None = None,
        since: datetime | None = None,
        limit: int | None = None,
    ) -> Series:
        """Value history of one path across the stored runs of a case.

        Runs lacking the path are skipped, never zero-filled: instrumentation
        evolves across commits and absence is not a measurement. An unknown
        case simply yields an empty series.
        """
        _check_path(path)
        points: list[SeriesPoint] = []
        series_unit = unit
        for rec in self.runs(case, branch=branch):
            if since is not None and rec.meta.started_at < since:
                continue
            value_unit = _path_value(rec.tree, path)
            if value_unit is None:
                continue
            value, node_unit = value_unit
            if series_unit is None:
                series_unit = node_unit
            if node_unit != series_unit:
                continue
            points.append(
                SeriesPoint(run_id=rec.run_id, started_at=rec.meta.started_at, value=value)
            )
        if limit is not None and limit >= 0:
            points = points[-limit:] if limit else []
        return Series(case=case, path=path, unit=series_unit or "", points=tuple(points))


def _check_path(path: str) -> None:
    if not path or path.startswith("/") or path.endswith("/") or "//" in path:
        raise ValueError(f"malformed path {path!r}")


def _path_value(tree: MeasureTree, path: str) -> tuple[float, str] | None:
    from .tree import find_node

    n = find_node(tree, path)
    if n is None:
        return None
    return (n.value, n.unit)


def ingest_report(
    store: RunStore,
    report,
    environ: dict[str, str] | None = None,
    ci: dict[str, str] | None = None,
    clock=utcnow,
    **enrich_kwargs,
) -> str:
    """Parse-side glue: enrich a Report and append it in one step."""
    rec = enrich(
        report.tree,
        report.case,
        report.iteration,
        environ=environ,
        ci=ci,
        clock=clock,
        **enrich_kwargs,
    )
    return store.put(rec)
