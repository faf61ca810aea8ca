"""Hierarchical, labeled, unit-carrying performance measures.

A measure tree mirrors the phase stack of one instrumented execution: every
node carries a value in some unit ("s", "MiB", ...), an optional set of
operation-type labels ("computation", "communication", "io", or anything
else), and ordered children. The data is deliberately asemantic; this module
only knows how to validate trees, address nodes by slash-joined paths, and
aggregate values per label or as a sunburst.

Parents are inclusive: a node's value covers its children, and the remainder
(value minus the sum of same-unit descendants reachable without crossing
another node of the same unit) is the node's self time. Aggregations are
scoped to a single unit; nodes of other units are transparent pass-throughs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

#: Relative slack for float accumulation in parent/children sum checks.
SUM_SLACK = 1e-9

#: Relative tolerance for conservation checks (label totals vs. root value).
CONSERVATION_RTOL = 1e-6

#: Current schema version of the measure tree / report format.
SCHEMA_VERSION = 1

#: Recommended (not enforced) label vocabulary.
SUGGESTED_LABELS = ("computation", "communication", "io")

#: Reserved label receiving self time of nodes that carry no label.
UNLABELED = "unlabeled"


class TreeError(Exception):
    """Base class for measure-tree failures."""


class InvalidTreeError(TreeError):
    """Raised when an operation requires a valid tree but validation failed."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"invalid measure tree: {lines}{more}")


class UnknownUnitError(TreeError):
    """Raised when an aggregation is requested for a unit no node carries."""


@dataclass(frozen=True)
class MeasureNode:
    """One measure: a named value with a unit, labels, and ordered children."""

    name: str
    value: float
    unit: str = ""
    labels: frozenset[str] = frozenset()
    children: tuple["MeasureNode", ...] = ()


def node(
    name: str,
    value: float,
    unit: str = "",
    labels=(),
    children=(),
) -> MeasureNode:
    """Convenience constructor accepting any iterables for labels/children."""
    return MeasureNode(
        name=name,
        value=float(value),
        unit=unit,
        labels=frozenset(labels),
        children=tuple(children),
    )


@dataclass(frozen=True)
class MeasureTree:
    root: MeasureNode
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class Violation:
    """One validation failure, anchored at the slash-joined path of a node."""

    path: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at '{self.path}': {self.message}"


@dataclass(frozen=True)
class PathValue:
    """Flattened view of one node: canonical path plus value and self time."""

    path: str
    value: float
    unit: str
    labels: frozenset[str]
    self_value: float


@dataclass(frozen=True)
class LabelAggregate:
    """Per-label totals of self time for one unit.

    Entries conserve the total: for the root unit, the sum of all entries
    equals the root value within ``CONSERVATION_RTOL``. Self time of nodes
    without labels is collected under the reserved ``unlabeled`` key; a node
    with k labels contributes ``self_value / k`` to each.
    """

    unit: str
    entries: dict[str, float] = field(default_factory=dict)

    def total(self) -> float:
        return sum(self.entries.values())


@dataclass(frozen=True)
class SunburstNode:
    """One wedge of a sunburst: a node of the unit-restricted hierarchy.

    ``fraction`` is value / parent value (1.0 at the top). ``self_value`` is
    the implicit self wedge; children wedges plus the self wedge fill the
    parent exactly.
    """

    path: str
    name: str
    value: float
    fraction: float
    self_value: float
    children: tuple["SunburstNode", ...] = ()


def _same_unit_children(n: MeasureNode, unit: str) -> list[MeasureNode]:
    """Nearest descendants carrying `unit`, looking through other-unit nodes."""
    out: list[MeasureNode] = []
    for child in n.children:
        if child.unit == unit:
            out.append(child)
        else:
            out.extend(_same_unit_children(child, unit))
    return out


def _self_value(n: MeasureNode) -> float:
    return n.value - sum(c.value for c in _same_unit_children(n, n.unit))


def validate_tree(tree: MeasureTree) -> list[Violation]:
    """Check every invariant of a measure tree.

    Returns the full list of violations in deterministic pre-order; an empty
    list means the tree is valid. Violations are data, not exceptions: a tree
    parsed from any source can be inspected without try/except.
    """
    violations: list[Violation] = []

    if tree.schema_version != SCHEMA_VERSION:
        violations.append(
            Violation(
                path=tree.root.name,
                code="unsupported-schema-version",
                message=f"schema_version {tree.schema_version} != {SCHEMA_VERSION}",
            )
        )

    def visit(n: MeasureNode, path: str) -> None:
        if not n.name:
            violations.append(Violation(path, "empty-name", "node name is empty"))
        if not math.isfinite(n.value):
            violations.append(
                Violation(path, "non-finite-value", f"value {n.value!r} is not finite")
            )
        if n.unit == "s" and n.value < 0:
            violations.append(
                Violation(path, "negative-duration", f"unit 's' value {n.value} < 0")
            )
        if math.isfinite(n.value):
            carriers = _same_unit_children(n, n.unit)
            child_sum = sum(c.value for c in carriers)
            if carriers and child_sum > n.value + abs(n.value) * SUM_SLACK:
                violations.append(
                    Violation(
                        path,
                        "children-exceed-parent",
                        f"same-unit children sum {child_sum} exceeds value {n.value}",
                    )
                )
        seen: set[str] = set()
        for child in n.children:
            child_path = f"{path}/{child.name}"
            if child.name in seen:
                violations.append(
                    Violation(
                        child_path,
                        "duplicate-sibling-name",
                        f"sibling name {child.name!r} is not unique",
                    )
                )
            seen.add(child.name)
            visit(child, child_path)

    visit(tree.root, tree.root.name)
    return violations


def require_valid(tree: MeasureTree) -> None:
    violations = validate_tree(tree)
    if violations:
        raise InvalidTreeError(violations)


def flatten_paths(tree: MeasureTree) -> list[PathValue]:
    """Flatten a valid tree to one PathValue per node, in pre-order.

    ``self_value`` is the node value minus the sum of its same-unit children
    (looking through pass-through nodes of other units); for a leaf it equals
    the value. Rejects invalid trees.
    """
    require_valid(tree)
    out: list[PathValue] = []

    def visit(n: MeasureNode, path: str) -> None:
        out.append(
            PathValue(
                path=path,
                value=n.value,
                unit=n.unit,
                labels=n.labels,
                self_value=_self_value(n),
            )
        )
        for child in n.children:
            visit(child, f"{path}/{child.name}")

    visit(tree.root, tree.root.name)
    return out


def find_node(tree: MeasureTree, path: str) -> MeasureNode | None:
    """Resolve a slash-joined path to its node, or None if absent."""
    parts = path.split("/")
    n = tree.root
    if not parts or parts[0] != n.name:
        return None
    for part in parts[1:]:
        for child in n.children:
            if child.name == part:
                n = child
                break
        else:
            return None
    return n


def tree_from_paths(paths: list[PathValue], schema_version: int = SCHEMA_VERSION) -> MeasureTree:
    """Rebuild a tree from its pre-order flatten_paths output."""
    if not paths:
        raise ValueError("cannot rebuild a tree from an empty path list")
    children_of: dict[str, list[str]] = {p.path: [] for p in paths}
    by_path = {p.path: p for p in paths}
    root_path = paths[0].path
    for p in paths[1:]:
        parent = p.path.rsplit("/", 1)[0]
        if parent not in children_of:
            raise ValueError(f"orphan path {p.path!r}: parent {parent!r} missing")
        children_of[parent].append(p.path)

    def build(path: str) -> MeasureNode:
        pv = by_path[path]
        return MeasureNode(
            name=path.rsplit("/", 1)[-1],
            value=pv.value,
            unit=pv.unit,
            labels=pv.labels,
            children=tuple(build(c) for c in children_of[path]),
        )

    return MeasureTree(root=build(root_path), schema_version=schema_version)


def _unit_roots(n: MeasureNode, unit: str, path: str) -> list[tuple[MeasureNode, str]]:
    """Topmost nodes of `unit`: carriers with no same-unit ancestor."""
    if n.unit == unit:
        return [(n, path)]
    out = []
    for child in n.children:
        out.extend(_unit_roots(child, unit, f"{path}/{child.name}"))
    return out


def aggregate_by_label(tree: MeasureTree, unit: str | None = None) -> LabelAggregate:
    """Attribute each node's self time to its labels, for one unit.

    A node with k >= 2 labels splits its self time equally; unlabeled self
    time goes to the reserved ``unlabeled`` entry. The totals conserve the
    root value for the root unit (and the sum of topmost carriers for any
    other unit).
    """
    require_valid(tree)
    if unit is None:
        unit = tree.root.unit
    entries: dict[str, float] = {}

    found = False

    def visit(n: MeasureNode) -> None:
        nonlocal found
        if n.unit == unit:
            found = True
            sv = max(0.0, _self_value(n))
            if n.labels:
                share = sv / len(n.labels)
                for label in n.labels:
                    entries[label] = entries.get(label, 0.0) + share
            elif sv != 0.0:
                entries[UNLABELED] = entries.get(UNLABELED, 0.0) + sv
        for child in n.children:
            visit(child)

    visit(tree.root)
    if not found:
        raise UnknownUnitError(f"no node carries unit {unit!r}")
    return LabelAggregate(unit=unit, entries=entries)


def sunburst(tree: MeasureTree, unit: str | None = None) -> SunburstNode:
    """Build the radial hierarchy of a valid tree restricted to one unit.

    Nodes of other units are spliced out; their same-unit descendants attach
    to the nearest same-unit ancestor. When the requested unit is not the
    root's and several disjoint subtrees carry it, a synthetic container
    (empty path, value = sum of its children) tops the result.
    """
    require_valid(tree)
    if unit is None:
        unit = tree.root.unit

    def build(n: MeasureNode, path: str, parent_value: float | None) -> SunburstNode:
        kids = []
        for child, child_path in _child_carriers(n, path):
            kids.append(build(child, child_path, n.value))
        if parent_value is None or parent_value == 0:
            fraction = 1.0 if parent_value is None else 0.0
        else:
            fraction = n.value / parent_value
        return SunburstNode(
            path=path,
            name=n.name,
            value=n.value,
            fraction=fraction,
            self_value=_self_value(n),
            children=tuple(kids),
        )

    def _child_carriers(n: MeasureNode, path: str):
        for child in n.children:
            child_path = f"{path}/{child.name}"
            if child.unit == unit:
                yield child, child_path
            else:
                yield from _child_carriers(child, child_path)

    roots = _unit_roots(tree.root, unit, tree.root.name)
    if not roots:
        raise UnknownUnitError(f"no node carries unit {unit!r}")
    if len(roots) == 1:
        n, path = roots[0]
        return build(n, path, None)
    kids = []
    total = sum(n.value for n, _ in roots)
    for n, path in roots:
        kids.append(build(n, path, total if total != 0 else None))
    return SunburstNode(
        path="", name="", value=total, fraction=1.0, self_value=0.0, children=tuple(kids)
    )


def subtree(tree: MeasureTree, path: str) -> MeasureTree:
    """The subtree rooted at `path` as a standalone tree."""
    n = find_node(tree, path)
    if n is None:
        raise KeyError(f"path {path!r} not present in tree")
    return MeasureTree(root=n, schema_version=tree.schema_version)
