"""History-based noise separation and CI gate verdicts.

HPC platforms are not stable: a shared file system collapse or bandwidth
abuse can slow a run down without any code change. This module uses the run
history to tell such transient platform noise apart from persistent,
code-induced performance shifts, and turns the answer into a pass/warn/fail
verdict a CI pipeline can act on.

The machinery, bottom to top:

* robust baselines -- median and scaled MAD over a trailing window, with a
  relative floor so zero-variance histories do not flag float jitter;
* causal point classification -- a point beyond ``k`` effective spreads of
  the baseline is anomalous; anomalous points are excluded from later
  baselines so one platform spike does not inflate the spread. A streak of
  ``persistence`` same-direction anomalies becomes a persistent shift,
  anything shorter stays a transient anomaly;
* offline change-point detection -- recursive binary segmentation with an
  L1 cost around segment medians, for retrospective timelines;
* label attribution -- which operation types (io, computation, ...) explain
  a delta between a run and its baseline runs;
* the gate -- per watched path, classify the latest point and fail only on a
  persistent regression beyond ``fail_ratio``. Persistent improvements pass
  with a note; they are good news, not regressions.

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .store import RunStore, RunRecord, Series
from .tree import (
    LabelAggregate,
    aggregate_by_label,
    find_node,
    subtree,
    UnknownUnitError,
)

#: 1.4826 x MAD estimates the standard deviation for normal data.
MAD_SCALE = 1.4826

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class AnalysisParams:
    """Every tunable of the analysis, in one place and echoed by the API."""

    window: int = 20
    k: float = 4.0
    persistence: int = 3
    rel_floor: float = 0.01
    fail_ratio: float = 0.10
    min_seg: int = 5
    accept: float = 0.15
    max_depth: int = 4
    #: Paths where larger values are better (throughput-like); everywhere
    #: else larger is worse, the right default for durations and byte sizes.
    larger_is_better_paths: frozenset[str] = frozenset()

    def to_obj(self) -> dict:
        return {
            "window": self.window,
            "k": self.k,
            "persistence": self.persistence,
            "rel_floor": self.rel_floor,
            "fail_ratio": self.fail_ratio,
            "min_seg": self.min_seg,
            "accept": self.accept,
            "max_depth": self.max_depth,
            "larger_is_better_paths": sorted(self.larger_is_better_paths),
        }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "AnalysisParams":
        kwargs = {}
        for fname, conv in (
            ("window", int),
            ("k", float),
            ("persistence", int),
            ("rel_floor", float),
            ("fail_ratio", float),
            ("min_seg", int),
            ("accept", float),
            ("max_depth", int),
        ):
            if fname in mapping:
                kwargs[fname] = conv(mapping[fname])
        if "larger_is_better_paths" in mapping:
            raw = mapping["larger_is_better_paths"]
            if isinstance(raw, str):
                raw = [p.strip() for p in raw.split(",") if p.strip()]
            kwargs["larger_is_better_paths"] = frozenset(raw)
        return cls(**kwargs)


def load_analysis_params(path) -> AnalysisParams:
    """Read params from the [analysis] section of a key-value config file."""
    cp = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    if not cp.has_section("analysis"):
        return AnalysisParams()
    return AnalysisParams.from_mapping(dict(cp.items("analysis")))


@dataclass(frozen=True)
class BaselineStats:
    """Robust location/spread of a trailing window.

    ``spread`` is the scaled median absolute deviation; ``floor`` the minimum
    effective spread (rel_floor x |median|), guarding constant histories.
    """

    median: float
    spread: float
    window: int
    floor: float

    @property
    def effective_spread(self) -> float:
        return max(self.spread, self.floor)


def baseline(values: Sequence[float], window: int = 20, rel_floor: float = 0.01) -> BaselineStats:
    """Median and scaled MAD over the trailing `window` values.

    The median shrugs off up to half the window being contaminated; the MAD
    does the same for the spread, which a classical standard deviation would
    let one platform spike inflate.
    """
    if len(values) == 0:
        raise ValueError("baseline requires at least one value")
    tail = np.asarray(values[-window:], dtype=float)
    med = float(np.median(tail))
    spread = MAD_SCALE * float(np.median(np.abs(tail - med)))
    return BaselineStats(
        median=med, spread=spread, window=len(tail), floor=rel_floor * abs(med)
    )


# -- point classification ------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    note: str = ""

    kind = "normal"


@dataclass(frozen=True)
class TransientAnomaly:
    """A deviation that platform noise explains: flagged, not fatal."""

    direction: str
    magnitude: float  # |value - median| in effective spreads

    kind = "transient"


@dataclass(frozen=True)
class PersistentShift:
    """A regime change: `persistence` consecutive same-direction breaches."""

    change_index: int  # first point of the new regime (0-based)
    before_median: float
    after_median: float
    direction: str
    magnitude: float

    kind = "shift"


PointClass = Normal | TransientAnomaly | PersistentShift


def point_class_to_obj(pc: PointClass) -> dict:
    obj: dict = {"kind": pc.kind}
    if isinstance(pc, Normal):
        if pc.note:
            obj["note"] = pc.note
    elif isinstance(pc, TransientAnomaly):
        obj.update(direction=pc.direction, magnitude=pc.magnitude)
    else:
        obj.update(
            direction=pc.direction,
            magnitude=pc.magnitude,
            change_index=pc.change_index,
            before_median=pc.before_median,
            after_median=pc.after_median,
        )
    return obj


def classify_series(values: Sequence[float], params: AnalysisParams = AnalysisParams()) -> list[PointClass]:
    """Classify every point causally, left to right.

    Each point is judged against the baseline of the clean (non-anomalous)
    points before it, so the classification of run N never changes when run
    N+1 arrives, and a transient spike never widens the spread used on later
    points.
    """
    out: list[PointClass] = []
    clean: list[float] = []
    streak: list[int] = []  # indices of the running same-direction anomaly streak
    streak_dir = ""
    for i, v in enumerate(values):
        if not clean:
            out.append(Normal(note="insufficient history"))
            clean.append(v)
            continue
        base = baseline(clean, window=params.window, rel_floor=params.rel_floor)
        dev = v - base.median
        eff = base.effective_spread
        if eff > 0:
            magnitude = abs(dev) / eff
        else:
            magnitude = math.inf if dev != 0 else 0.0
        if magnitude > params.k:
            direction = UP if dev > 0 else DOWN
            if streak and streak_dir == direction and streak[-1] == i - 1:
                streak.append(i)
            else:
                streak = [i]
                streak_dir = direction
            if len(streak) >= params.persistence:
                after = float(np.median([values[j] for j in streak]))
                out.append(
                    PersistentShift(
                        change_index=streak[0],
                        before_median=base.median,
                        after_median=after,
                        direction=direction,
                        magnitude=magnitude,
                    )
                )
            else:
                out.append(TransientAnomaly(direction=direction, magnitude=magnitude))
        else:
            out.append(Normal())
            clean.append(v)
            streak = []
            streak_dir = ""
    return out


def classify_latest(values: Sequence[float], params: AnalysisParams = AnalysisParams()) -> PointClass:
    """Classification of the most recent point given everything before it."""
    if len(values) == 0:
        raise ValueError("classify_latest requires at least one value")
    if len(values) < 2:
        return Normal(note="insufficient history")
    return classify_series(values, params)[-1]


# -- offline change-point detection --------------------------------------------


@dataclass(frozen=True)
class ChangePoint:
    """A detected regime boundary: `index` is the first point after it."""

    index: int
    before_median: float
    after_median: float
    score: float  # relative L1 cost reduction of the split, in [0, 1]


def _l1_cost(arr: np.ndarray) -> float:
    if arr.size == 0:
        return 0.0
    return float(np.abs(arr - np.median(arr)).sum())


def detect_shifts(values: Sequence[float], params: AnalysisParams = AnalysisParams()) -> list[ChangePoint]:
    """Binary segmentation with an L1 cost around segment medians.

    For each candidate split t the cost is the summed absolute deviation of
    both sides around their own medians. The best split is accepted iff both
    segments hold at least ``min_seg`` points and the relative cost reduction
    reaches ``accept``; the search then recurses into both sides, up to
    ``max_depth`` levels. Cost ties break toward the smallest t. A series
    shorter than 2 x min_seg yields no change points.
    """
    arr = np.asarray(values, dtype=float)
    found: list[ChangePoint] = []

    def split(lo: int, hi: int, depth: int) -> None:
        if depth >= params.max_depth or hi - lo < 2 * params.min_seg:
            return
        seg = arr[lo:hi]
        cost0 = _l1_cost(seg)
        if cost0 <= 0.0:
            return
        best_t, best_cost = -1, math.inf
        for t in range(lo + params.min_seg, hi - params.min_seg + 1):
            cost = _l1_cost(arr[lo:t]) + _l1_cost(arr[t:hi])
            if cost < best_cost:
                best_cost, best_t = cost, t
        score = (cost0 - best_cost) / cost0
        if score < params.accept:
            return
        found.append(
            ChangePoint(
                index=best_t,
                before_median=float(np.median(arr[lo:best_t])),
                after_median=float(np.median(arr[best_t:hi])),
                score=score,
            )
        )
        split(lo, best_t, depth + 1)
        split(best_t, hi, depth + 1)

    split(0, len(arr), 0)
    found.sort(key=lambda cp: cp.index)
    return found


# -- label attribution ----------------------------------------------------------


class UnitMismatchError(Exception):
    pass


@dataclass(frozen=True)
class AttributionEntry:
    label: str
    delta: float
    share: float  # delta / total delta; shares sum to 1 but may leave [0, 1]


@dataclass(frozen=True)
class Attribution:
    """Which labels explain a change, largest |delta| first."""

    entries: tuple[AttributionEntry, ...] = ()
    note: str = ""

    def share_of(self, label: str) -> float:
        for e in self.entries:
            if e.label == label:
                return e.share
        return 0.0


def attribute_labels(current: LabelAggregate, baselines: Sequence[LabelAggregate]) -> Attribution:
    """Compare a run's label totals against the median of baseline runs.

    Per label the baseline is the median over the baseline runs (absent
    counted as 0); the share is delta_label / delta_total. With opposing
    deltas individual shares may leave [0, 1]; they always sum to 1.
    """
    if not baselines:
        raise ValueError("attribute_labels requires at least one baseline run")
    for agg in baselines:
        if agg.unit != current.unit:
            raise UnitMismatchError(
                f"baseline unit {agg.unit!r} != current unit {current.unit!r}"
            )
    labels = set(current.entries)
    for agg in baselines:
        labels.update(agg.entries)
    deltas: dict[str, float] = {}
    for label in labels:
        base = float(np.median([agg.entries.get(label, 0.0) for agg in baselines]))
        delta = current.entries.get(label, 0.0) - base
        if abs(delta) >= 1e-12:
            deltas[label] = delta
    total = sum(deltas.values())
    if total == 0.0:
        return Attribution(note="no net change")
    entries = tuple(
        AttributionEntry(label=label, delta=delta, share=delta / total)
        for label, delta in sorted(deltas.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    )
    return Attribution(entries=entries)


# -- the gate -------------------------------------------------------------------


@dataclass(frozen=True)
class GateReason:
    path: str
    point: PointClass
    attribution: Attribution | None
    detail: str


@dataclass(frozen=True)
class GateVerdict:
    """Pass / Warn / Fail plus the evidence, mapped to process exit codes."""

    kind: str  # "pass" | "warn" | "fail"
    reasons: tuple[GateReason, ...] = ()
    notes: tuple[str, ...] = ()
    params: AnalysisParams = field(default_factory=AnalysisParams)

    EXIT_CODES = {"pass": 0, "warn": 10, "fail": 20}

    @property
    def exit_code(self) -> int:
        return self.EXIT_CODES[self.kind]

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "exit_code": self.exit_code,
            "reasons": [
                {
                    "path": r.path,
                    "point": point_class_to_obj(r.point),
                    "attribution": None
                    if r.attribution is None
                    else {
                        "note": r.attribution.note,
                        "entries": [
                            {"label": e.label, "delta": e.delta, "share": e.share}
                            for e in r.attribution.entries
                        ],
                    },
                    "detail": r.detail,
                }
                for r in self.reasons
            ],
            "notes": list(self.notes),
            "params": self.params.to_obj(),
        }


def default_watch_paths(rec: RunRecord) -> list[str]:
    """Root path plus every depth-1 child of the run's tree."""
    root = rec.tree.root
    return [root.name] + [f"{root.name}/{c.name}" for c in root.children]


def series_shift_assessment(
    values: Sequence[float],
    larger_is_worse: bool,
    params: AnalysisParams,
) -> tuple[PointClass, str, float]:
    """Classify the latest point and name the decision it implies.

    Returns (classification, decision, relative_change) where decision is one
    of "ok", "warn_transient", "warn_shift", "fail_shift", "note_improvement".
    Pure, so scale invariance of verdicts is directly testable.
    """
    cls = classify_latest(values, params)
    if isinstance(cls, Normal):
        return cls, "ok", 0.0
    if isinstance(cls, TransientAnomaly):
        return cls, "warn_transient", 0.0
    before, after = cls.before_median, cls.after_median
    if before == 0:
        rel = math.inf if after > 0 else (-math.inf if after < 0 else 0.0)
    else:
        rel = (after - before) / abs(before)
    regression = rel > 0 if larger_is_worse else rel < 0
    if not regression:
        return cls, "note_improvement", rel
    if abs(rel) >= params.fail_ratio:
        return cls, "fail_shift", rel
    return cls, "warn_shift", rel


def gate(
    store: RunStore,
    run_id: str,
    params: AnalysisParams = AnalysisParams(),
    watch_paths: Iterable[str] | None = None,
) -> GateVerdict:
    """Gate one ingested run against its case history.

    Fail only when some watched path shows a persistent shift in the
    regression direction of at least ``fail_ratio``; transient anomalies and
    sub-threshold shifts warn; persistent improvements pass with a note.
    Deterministic given the store contents and the params.
    """
    rec = store.get(run_id)  # raises UnknownRunError
    paths = list(watch_paths) if watch_paths is not None else default_watch_paths(rec)

    fail_reasons: list[GateReason] = []
    warn_reasons: list[GateReason] = []
    notes: list[str] = []
    for path in paths:
        node = find_node(rec.tree, path)
        if node is None:
            notes.append(f"watched path {path!r} absent from run")
            continue
        series = store.query_series(rec.case, path, unit=node.unit)
        points = _truncate_at(series, rec)
        if not points:
            continue
        values = [p.value for p in points]
        larger_is_worse = path not in params.larger_is_better_paths
        cls, decision, rel = series_shift_assessment(values, larger_is_worse, params)
        if decision == "ok":
            continue
        if decision == "note_improvement":
            notes.append(
                f"persistent improvement at {path}: "
                f"{cls.before_median:g} -> {cls.after_median:g} ({rel:+.1%})"
            )
            continue
        attribution = _attribute_for_path(store, rec, path, points, values, params)
        if decision == "warn_transient":
            detail = f"transient anomaly ({cls.direction}, {cls.magnitude:.1f} spreads)"
            warn_reasons.append(GateReason(path, cls, attribution, detail))
        elif decision == "warn_shift":
            detail = (
                f"persistent shift below fail ratio: "
                f"{cls.before_median:g} -> {cls.after_median:g} ({rel:+.1%})"
            )
            warn_reasons.append(GateReason(path, cls, attribution, detail))
        else:
            detail = (
                f"persistent regression: "
                f"{cls.before_median:g} -> {cls.after_median:g} ({rel:+.1%})"
            )
            fail_reasons.append(GateReason(path, cls, attribution, detail))

    if fail_reasons:
        return GateVerdict("fail", tuple(fail_reasons + warn_reasons), tuple(notes), params)
    if warn_reasons:
        return GateVerdict("warn", tuple(warn_reasons), tuple(notes), params)
    return GateVerdict("pass", (), tuple(notes), params)


def _truncate_at(series: Series, rec: RunRecord):
    """Points of the series up to and including the gated run."""
    key = (rec.meta.started_at, rec.run_id)
    return [p for p in series.points if (p.started_at, p.run_id) <= key]


def _attribute_for_path(
    store: RunStore,
    rec: RunRecord,
    path: str,
    points,
    values: Sequence[float],
    params: AnalysisParams,
) -> Attribution | None:
    """Label attribution of the flagged run against its clean baseline runs."""
    flags = classify_series(values, params)
    baseline_ids = [
        p.run_id
        for p, f in zip(points[:-1], flags[:-1])
        if isinstance(f, Normal)
    ][-params.window :]
    if not baseline_ids:
        return None
    try:
        current = aggregate_by_label(subtree(rec.tree, path))
        baseline_aggs = [
            aggregate_by_label(subtree(store.get(rid).tree, path)) for rid in baseline_ids
        ]
        return attribute_labels(current, baseline_aggs)
    except (UnknownUnitError, UnitMismatchError, KeyError):
        return None


def annotate_series(
    series: Series, params: AnalysisParams = AnalysisParams()
) -> tuple[list[PointClass], list[ChangePoint]]:
    """Per-point classification plus offline change points, one call."""
    values = series.values()
    return classify_series(values, params), detect_shifts(values, params)
