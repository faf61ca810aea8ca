"""Report files: the text format instrumented applications emit.

One UTF-8 JSON object per execution::

    { "schema_version": 1, "case": "cough", "iteration": 0, "measures": <node> }
    <node> = { "name": str, "value": number, "unit": str,
               "labels": [str, ...], "children": [<node>, ...] }

"labels" and "children" may be omitted (empty by default), "iteration"
defaults to 0. Unknown keys survive parsing (kept on the Report) but are
dropped by canonical re-serialization. The canonical form is compact JSON
with sorted keys, float-formatted values, sorted label lists, and empty
labels/children omitted; it is the byte representation hashed and stored
by the run store.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .tree import (
    SCHEMA_VERSION,
    InvalidTreeError,
    MeasureNode,
    MeasureTree,
    require_valid,
)

_NODE_KEYS = {"name", "value", "unit", "labels", "children"}
_HEADER_KEYS = {"schema_version", "case", "iteration", "measures"}


class ReportError(Exception):
    """Base class for report parsing failures."""


class ReportSyntaxError(ReportError):
    def __init__(self, message: str, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"{message} (byte offset {byte_offset})")


class ReportFormatError(ReportError):
    """Well-formed JSON that does not follow the report schema."""


class UnsupportedSchemaError(ReportError):
    def __init__(self, version: Any):
        self.version = version
        super().__init__(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")


@dataclass(frozen=True)
class Report:
    """A parsed report: validated tree plus header fields.

    ``extras`` holds unknown top-level keys; ``raw`` keeps the full decoded
    object so nothing read is lost. Neither survives canonical serialization.
    """

    tree: MeasureTree
    case: str
    iteration: int
    extras: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _parse_node(obj: Any, where: str) -> MeasureNode:
    if not isinstance(obj, dict):
        raise ReportFormatError(f"{where}: node must be an object, got {type(obj).__name__}")
    for key in ("name", "value", "unit"):
        if key not in obj:
            raise ReportFormatError(f"{where}: missing required node key {key!r}")
    name = obj["name"]
    if not isinstance(name, str):
        raise ReportFormatError(f"{where}: node name must be a string")
    value = obj["value"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ReportFormatError(f"{where}/{name}: value must be a number")
    unit = obj["unit"]
    if not isinstance(unit, str):
        raise ReportFormatError(f"{where}/{name}: unit must be a string")
    labels_raw = obj.get("labels", [])
    if not isinstance(labels_raw, list) or any(not isinstance(x, str) for x in labels_raw):
        raise ReportFormatError(f"{where}/{name}: labels must be a list of strings")
    children_raw = obj.get("children", [])
    if not isinstance(children_raw, list):
        raise ReportFormatError(f"{where}/{name}: children must be a list")
    children = tuple(_parse_node(c, f"{where}/{name}") for c in children_raw)
    return MeasureNode(
        name=name,
        value=float(value),
        unit=unit,
        labels=frozenset(labels_raw),
        children=children,
    )


def parse_report(data: bytes | str, overrides: dict[str, Any] | None = None) -> Report:
    """Parse and validate one report.

    Raises ReportSyntaxError (with byte offset) for malformed text,
    UnsupportedSchemaError for any schema_version other than the current one,
    ReportFormatError for schema violations, and InvalidTreeError when the
    measure tree breaks an invariant. ``overrides`` may replace header
    fields ("case", "iteration") after parsing, e.g. from CLI flags.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ReportSyntaxError(f"invalid UTF-8: {e.reason}", e.start) from e
    else:
        text = data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportSyntaxError(e.msg, _byte_offset(text, e.pos)) from e
    if not isinstance(obj, dict):
        raise ReportFormatError(f"report must be one object, got {type(obj).__name__}")

    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedSchemaError(version)

    overrides = overrides or {}
    case = overrides.get("case", obj.get("case"))
    if not isinstance(case, str) or not case:
        raise ReportFormatError("missing or empty 'case'")
    iteration = overrides.get("iteration", obj.get("iteration", 0))
    if isinstance(iteration, bool) or not isinstance(iteration, int) or iteration < 0:
        raise ReportFormatError(f"'iteration' must be an integer >= 0, got {iteration!r}")
    if "measures" not in obj:
        raise ReportFormatError("missing 'measures'")

    root = _parse_node(obj["measures"], "measures")
    tree = MeasureTree(root=root, schema_version=version)
    require_valid(tree)
    extras = {k: v for k, v in obj.items() if k not in _HEADER_KEYS}
    return Report(tree=tree, case=case, iteration=iteration, extras=extras, raw=obj)


def node_to_obj(n: MeasureNode) -> dict[str, Any]:
    obj: dict[str, Any] = {"name": n.name, "value": float(n.value), "unit": n.unit}
    if n.labels:
        obj["labels"] = sorted(n.labels)
    if n.children:
        obj["children"] = [node_to_obj(c) for c in n.children]
    return obj


def canonical_json_bytes(obj: Any) -> bytes:
    """The one serialization used for hashing, storage, and round-trips."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )


def report_to_obj(report: Report) -> dict[str, Any]:
    return {
        "schema_version": report.tree.schema_version,
        "case": report.case,
        "iteration": report.iteration,
        "measures": node_to_obj(report.tree.root),
    }


def canonical_report_bytes(report: Report) -> bytes:
    """Canonical byte form of a report; drops unknown keys by construction."""
    return canonical_json_bytes(report_to_obj(report))


def make_report(tree: MeasureTree, case: str, iteration: int = 0) -> Report:
    """Build a Report from in-memory parts, enforcing tree validity."""
    if not math.isfinite(iteration) or iteration < 0:
        raise ValueError("iteration must be >= 0")
    require_valid(tree)
    return Report(tree=tree, case=case, iteration=int(iteration))


__all__ = [
    "Report",
    "ReportError",
    "ReportSyntaxError",
    "ReportFormatError",
    "UnsupportedSchemaError",
    "InvalidTreeError",
    "parse_report",
    "make_report",
    "node_to_obj",
    "report_to_obj",
    "canonical_report_bytes",
    "canonical_json_bytes",
]
