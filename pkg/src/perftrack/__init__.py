"""Continuous performance monitoring for HPC simulation campaigns.

The pieces, bottom to top: measure trees (`tree`), the report file format
(`reports`), the append-only run history (`store`), noise-robust analysis
and CI gating (`analysis`), campaign orchestration (`campaign`), and the
HTTP query API (`server`).
"""

from .tree import (
    LabelAggregate,
    MeasureNode,
    MeasureTree,
    PathValue,
    SunburstNode,
    Violation,
    aggregate_by_label,
    flatten_paths,
    node,
    sunburst,
    tree_from_paths,
    validate_tree,
)
from .reports import Report, make_report, parse_report, canonical_report_bytes
from .store import (
    RunMeta,
    RunRecord,
    RunStore,
    Series,
    compute_run_id,
    enrich,
)
from .analysis import (
    AnalysisParams,
    Attribution,
    BaselineStats,
    ChangePoint,
    GateVerdict,
    Normal,
    PersistentShift,
    TransientAnomaly,
    attribute_labels,
    baseline,
    classify_latest,
    classify_series,
    detect_shifts,
    gate,
)
from .campaign import CampaignConfig, CampaignResult, CaseSpec, render_command, run_campaign
from .server import compare_runs, make_server, serve

__version__ = "0.1.0"
