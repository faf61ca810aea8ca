"""Command-line entry points.

    perftrack ingest REPORT [--case X --commit H --store DIR ...]
    perftrack analyze series --case X --path P [--store DIR] [--json]
    perftrack analyze gate --run ID [--store DIR] [--config FILE]
    perftrack campaign run --config FILE [--commit H --branch B --pipeline-id P]
    perftrack serve --store DIR --bind HOST:PORT --diff-cmd TEMPLATE

Gate-style commands exit 0 (pass), 10 (warn), 20 (fail), or 1 on any
internal/infrastructure error, so CI pipelines can branch on the code alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import analysis, campaign, server
from .analysis import AnalysisParams, load_analysis_params
from .reports import ReportError, parse_report
from .store import RunStore, StoreError, enrich, format_ts
from .tree import InvalidTreeError

DEFAULT_STORE = "./perf-store"


def _params_from(args) -> AnalysisParams:
    if getattr(args, "config", None):
        return load_analysis_params(args.config)
    return AnalysisParams()


def cmd_ingest(args) -> int:
    try:
        data = open(args.report, "rb").read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    overrides = {}
    if args.case:
        overrides["case"] = args.case
    try:
        report = parse_report(data, overrides=overrides)
        rec = enrich(
            report.tree,
            report.case,
            report.iteration,
            environ=dict(os.environ),
            ci={
                "commit": args.commit,
                "branch": args.branch,
                "pipeline_id": args.pipeline_id,
                "job_id": args.job_id,
            },
        )
        with RunStore(args.store, writer=True, create=True) as st:
            run_id = st.put(rec)
    except (ReportError, InvalidTreeError, StoreError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(run_id)
    return 0


def cmd_analyze_series(args) -> int:
    try:
        st = RunStore(args.store)
        series = st.query_series(args.case, args.path, unit=args.unit, branch=args.branch)
    except (StoreError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    params = _params_from(args)
    classes, shifts = analysis.annotate_series(series, params)
    if args.json:
        payload = {
            "case": series.case,
            "path": series.path,
            "unit": series.unit,
            "points": [
                {
                    "run_id": p.run_id,
                    "started_at": format_ts(p.started_at),
                    "value": p.value,
                    "class": analysis.point_class_to_obj(c),
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
            "params": params.to_obj(),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print(f"{series.case} {series.path} [{series.unit}]: {len(series.points)} points")
    for p, c in zip(series.points, classes):
        marker = {"normal": " ", "transient": "!", "shift": "^"}[c.kind]
        print(f"  {marker} {format_ts(p.started_at)}  {p.value:<12g} {p.run_id[:12]}")
    for cp in shifts:
        print(
            f"  shift at index {cp.index}: {cp.before_median:g} -> {cp.after_median:g}"
            f" (score {cp.score:.2f})"
        )
    return 0


def cmd_analyze_gate(args) -> int:
    params = _params_from(args)
    try:
        st = RunStore(args.store)
        verdict = analysis.gate(st, args.run, params)
    except StoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(verdict.to_obj(), indent=2, sort_keys=True))
    else:
        print(f"verdict: {verdict.kind}")
        for reason in verdict.reasons:
            print(f"  {reason.path}: {reason.detail}")
        for note in verdict.notes:
            print(f"  note: {note}")
    return verdict.exit_code


def cmd_campaign_run(args) -> int:
    try:
        config = campaign.load_campaign_config(args.config)
    except campaign.ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    context = {
        "commit": args.commit,
        "branch": args.branch,
        "pipeline_id": args.pipeline_id,
        "job_id": args.job_id,
    }
    result = campaign.run_campaign(config, context=context)
    summary = campaign.write_summary(
        result, os.path.join(config.store_dir, "campaign-summary.json")
    )
    if not result.build_ok:
        print(f"build failed: {result.build_error}", file=sys.stderr)
    for case_result in result.case_results:
        status = "ok" if case_result.ok else f"FAILED ({case_result.error})"
        verdict = case_result.verdict.kind if case_result.verdict else "-"
        print(f"case {case_result.name}: {status}, gate: {verdict}")
    print(f"summary: {summary}")
    return result.exit_code


def cmd_serve(args) -> int:
    try:
        server.serve(
            store_dir=args.store,
            bind=args.bind,
            diff_command=args.diff_cmd,
            params=_params_from(args),
        )
    except (OSError, StoreError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perftrack", description="Continuous performance monitoring for simulation campaigns."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a report file and append it to the store")
    p.add_argument("report")
    p.add_argument("--case", default="")
    p.add_argument("--commit", default=os.environ.get("CI_COMMIT_SHA", ""))
    p.add_argument("--branch", default=os.environ.get("CI_COMMIT_BRANCH", ""))
    p.add_argument("--pipeline-id", default=os.environ.get("CI_PIPELINE_ID", ""))
    p.add_argument("--job-id", default=os.environ.get("CI_JOB_ID", ""))
    p.add_argument("--store", default=DEFAULT_STORE)
    p.set_defaults(func=cmd_ingest)

    analyze = sub.add_parser("analyze", help="inspect history or gate a run")
    analyze_sub = analyze.add_subparsers(dest="analyze_command", required=True)

    p = analyze_sub.add_parser("series", help="print one path's history with annotations")
    p.add_argument("--case", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--unit", default=None)
    p.add_argument("--branch", default=None)
    p.add_argument("--store", default=DEFAULT_STORE)
    p.add_argument("--config", default=None, help="key-value file with an [analysis] section")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze_series)

    p = analyze_sub.add_parser("gate", help="gate a stored run (exit 0/10/20)")
    p.add_argument("--run", required=True)
    p.add_argument("--store", default=DEFAULT_STORE)
    p.add_argument("--config", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze_gate)

    camp = sub.add_parser("campaign", help="build, run, harvest, gate")
    camp_sub = camp.add_subparsers(dest="campaign_command", required=True)
    p = camp_sub.add_parser("run", help="execute a campaign config")
    p.add_argument("--config", required=True)
    p.add_argument("--commit", default=os.environ.get("CI_COMMIT_SHA", ""))
    p.add_argument("--branch", default=os.environ.get("CI_COMMIT_BRANCH", ""))
    p.add_argument("--pipeline-id", default=os.environ.get("CI_PIPELINE_ID", ""))
    p.add_argument("--job-id", default=os.environ.get("CI_JOB_ID", ""))
    p.set_defaults(func=cmd_campaign_run)

    p = sub.add_parser("serve", help="serve the HTTP API over a store")
    p.add_argument("--store", default=DEFAULT_STORE)
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--diff-cmd", default="", help="command template with {from} and {to}")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
