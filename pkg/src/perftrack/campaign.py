"""Build, run, harvest, ingest, gate, notify: one CI campaign.

The runner is CI-system agnostic on purpose: it executes arbitrary command
templates (a scheduler submit-and-wait wrapper is just another command),
reads back the report files the cases produce, and folds everything into a
single process exit code any pipeline can branch on:

    0   every case passed its gate
    10  at least one warning (transient anomaly or sub-threshold shift)
    20  at least one persistent regression beyond the fail ratio
    1   infrastructure failure (build, execution, harvest, or storage)

Cases run sequentially, never concurrently: parallel cases would contaminate
each other's measurements with exactly the noise this system exists to
remove. The store writer lock is held for the whole campaign.
"""

from __future__ import annotations

import configparser
import json
import os
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalysisParams, GateVerdict, gate
from .reports import ReportError, parse_report
from .store import (
    DEFAULT_ENV_ALLOWLIST,
    RunStore,
    StoreError,
    enrich,
    utcnow,
)
from .tree import InvalidTreeError

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class CampaignError(Exception):
    pass


class ConfigError(CampaignError):
    pass


class UnknownPlaceholderError(CampaignError):
    def __init__(self, name: str, template: str):
        self.name = name
        super().__init__(f"unknown placeholder {{{name}}} in template {template!r}")


def render_template(template: str, bindings: dict[str, str]) -> str:
    """Substitute {name} placeholders; any unbound placeholder is an error."""

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise UnknownPlaceholderError(name, template)
        return str(bindings[name])

    return _PLACEHOLDER.sub(sub, template)


def render_command(template: str, bindings: dict[str, str]) -> list[str]:
    """Template -> argv, shell-free: substitute, then whitespace-split with
    shell-style quoting honored. No shell ever sees the result."""
    if not template.strip():
        raise CampaignError("empty command template")
    rendered = render_template(template, bindings)
    argv = shlex.split(rendered)
    if not argv:
        raise CampaignError(f"command template {template!r} rendered to nothing")
    return argv


@dataclass(frozen=True)
class BuildStep:
    name: str
    command: str
    workdir: str = "."
    timeout: float = 600.0


@dataclass(frozen=True)
class CaseSpec:
    name: str
    command: str  # placeholders: {case} {workdir} {report} {iteration}
    report: str  # path template, resolved inside workdir
    workdir: str = "."
    timeout: float = 600.0
    iterations: int = 1
    gate_overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CampaignConfig:
    store_dir: str
    build_steps: tuple[BuildStep, ...] = ()
    cases: tuple[CaseSpec, ...] = ()
    notify_command: str = ""
    env_allowlist: tuple[str, ...] = DEFAULT_ENV_ALLOWLIST
    analysis: AnalysisParams = field(default_factory=AnalysisParams)

    def __post_init__(self):
        names = [c.name for c in self.cases]
        if len(names) != len(set(names)):
            raise ConfigError("case names must be unique")
        for step in self.build_steps:
            if step.timeout <= 0:
                raise ConfigError(f"build step {step.name!r}: timeout must be > 0")
        for case in self.cases:
            if case.timeout <= 0:
                raise ConfigError(f"case {case.name!r}: timeout must be > 0")
            if case.iterations < 1:
                raise ConfigError(f"case {case.name!r}: iterations must be >= 1")


def load_campaign_config(path: str | Path) -> CampaignConfig:
    """Parse the INI campaign file (grammar documented in the README)."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read campaign config {path}")
    if not cp.has_section("campaign"):
        raise ConfigError("missing [campaign] section")
    camp = dict(cp.items("campaign"))
    if "store_dir" not in camp:
        raise ConfigError("[campaign] store_dir is required")

    allowlist = tuple(
        e.strip() for e in camp.get("env_allowlist", ",".join(DEFAULT_ENV_ALLOWLIST)).split(",") if e.strip()
    )
    analysis = AnalysisParams()
    if cp.has_section("analysis"):
        analysis = AnalysisParams.from_mapping(dict(cp.items("analysis")))

    builds: list[BuildStep] = []
    cases: list[CaseSpec] = []
    for section in cp.sections():
        if section.startswith("build."):
            items = dict(cp.items(section))
            if "command" not in items:
                raise ConfigError(f"[{section}] command is required")
            builds.append(
                BuildStep(
                    name=section[len("build.") :],
                    command=items["command"],
                    workdir=items.get("workdir", "."),
                    timeout=float(items.get("timeout", 600)),
                )
            )
        elif section.startswith("case."):
            items = dict(cp.items(section))
            for required in ("command", "report"):
                if required not in items:
                    raise ConfigError(f"[{section}] {required} is required")
            overrides = {
                key[len("gate.") :]: value
                for key, value in items.items()
                if key.startswith("gate.")
            }
            cases.append(
                CaseSpec(
                    name=section[len("case.") :],
                    command=items["command"],
                    report=items["report"],
                    workdir=items.get("workdir", "."),
                    timeout=float(items.get("timeout", 600)),
                    iterations=int(items.get("iterations", 1)),
                    gate_overrides=overrides,
                )
            )

    return CampaignConfig(
        store_dir=camp["store_dir"],
        build_steps=tuple(builds),
        cases=tuple(cases),
        notify_command=camp.get("notify_command", ""),
        env_allowlist=allowlist,
        analysis=analysis,
    )


@dataclass
class CaseResult:
    name: str
    ok: bool = False
    error: str = ""
    run_ids: list[str] = field(default_factory=list)
    verdict: GateVerdict | None = None

    def to_obj(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "error": self.error,
            "run_ids": list(self.run_ids),
            "verdict": None if self.verdict is None else self.verdict.to_obj(),
        }


@dataclass
class CampaignResult:
    build_ok: bool = True
    build_error: str = ""
    case_results: list[CaseResult] = field(default_factory=list)
    notified: bool = False
    notify_error: str = ""

    @property
    def exit_code(self) -> int:
        """Max severity across cases; any infrastructure failure wins as 1."""
        if not self.build_ok:
            return 1
        if any(not c.ok for c in self.case_results):
            return 1
        code = 0
        for c in self.case_results:
            if c.verdict is not None:
                code = max(code, c.verdict.exit_code)
        return code

    def to_obj(self) -> dict:
        return {
            "build_ok": self.build_ok,
            "build_error": self.build_error,
            "cases": [c.to_obj() for c in self.case_results],
            "exit_code": self.exit_code,
            "notified": self.notified,
            "notify_error": self.notify_error,
        }


def _run_command(argv: list[str], cwd: str, timeout: float, environ: dict[str, str]):
    return subprocess.run(
        argv,
        cwd=cwd,
        timeout=timeout,
        env=environ,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )


def run_campaign(
    config: CampaignConfig,
    context: dict[str, str] | None = None,
    environ: dict[str, str] | None = None,
    clock=utcnow,
) -> CampaignResult:
    """Execute one campaign end to end; see the module docstring for codes.

    ``context`` carries commit/branch/pipeline_id from the CI system;
    ``environ`` is the process environment handed to child commands and
    filtered (by the configured allowlist) into the run metadata.
    """
    context = context or {}
    environ = dict(os.environ if environ is None else environ)
    result = CampaignResult()

    base_bindings = {
        "commit": context.get("commit", ""),
        "branch": context.get("branch", ""),
        "pipeline_id": context.get("pipeline_id", ""),
    }

    for step in config.build_steps:
        try:
            argv = render_command(step.command, {**base_bindings, "workdir": step.workdir})
            proc = _run_command(argv, step.workdir, step.timeout, environ)
        except (CampaignError, subprocess.TimeoutExpired, OSError) as e:
            result.build_ok = False
            result.build_error = f"build step {step.name!r}: {e}"
            return _notify(config, result)
        if proc.returncode != 0:
            result.build_ok = False
            result.build_error = (
                f"build step {step.name!r} exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace').strip()}"
            )
            return _notify(config, result)

    try:
        store = RunStore(config.store_dir, writer=True, create=True)
    except StoreError as e:
        result.build_ok = False
        result.build_error = f"store: {e}"
        return _notify(config, result)

    with store:
        for case in config.cases:
            result.case_results.append(
                _run_case(store, config, case, base_bindings, context, environ, clock)
            )

    return _notify(config, result)


def _run_case(
    store: RunStore,
    config: CampaignConfig,
    case: CaseSpec,
    base_bindings: dict[str, str],
    context: dict[str, str],
    environ: dict[str, str],
    clock,
) -> CaseResult:
    res = CaseResult(name=case.name)
    workdir = Path(case.workdir).resolve()
    last_run_id = ""
    for iteration in range(case.iterations):
        bindings = {
            **base_bindings,
            "case": case.name,
            "workdir": str(workdir),
            "iteration": str(iteration),
        }
        try:
            report_path = (workdir / render_template(case.report, bindings)).resolve()
        except CampaignError as e:
            res.error = str(e)
            return res
        if not str(report_path).startswith(str(workdir) + "/") and report_path != workdir:
            res.error = f"report path {report_path} escapes case workdir {workdir}"
            return res
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.unlink(missing_ok=True)  # never ingest a stale report

        bindings["report"] = str(report_path)
        started = clock()
        try:
            argv = render_command(case.command, bindings)
            proc = _run_command(argv, str(workdir), case.timeout, environ)
        except subprocess.TimeoutExpired:
            res.error = f"iteration {iteration}: timed out after {case.timeout}s"
            return res
        except (CampaignError, OSError) as e:
            res.error = f"iteration {iteration}: {e}"
            return res
        finished = clock()
        if proc.returncode != 0:
            res.error = (
                f"iteration {iteration}: command exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace').strip()}"
            )
            return res
        if not report_path.is_file():
            res.error = f"iteration {iteration}: no report at {report_path}"
            return res
        try:
            report = parse_report(report_path.read_bytes(), overrides={"case": case.name})
        except (ReportError, InvalidTreeError) as e:
            res.error = f"iteration {iteration}: unparseable report: {e}"
            return res
        try:
            rec = enrich(
                report.tree,
                report.case,
                report.iteration,
                environ=environ,
                ci={
                    "commit": context.get("commit", ""),
                    "branch": context.get("branch", ""),
                    "pipeline_id": context.get("pipeline_id", ""),
                    "job_id": context.get("job_id", ""),
                    "node_count": context.get("node_count", ""),
                    "task_count": context.get("task_count", ""),
                },
                clock=clock,
                started_at=started,
                finished_at=finished,
                build=build_meta_for(config),
                env_allowlist=config.env_allowlist,
            )
            last_run_id = store.put(rec)
            res.run_ids.append(last_run_id)
        except StoreError as e:
            res.error = f"iteration {iteration}: store: {e}"
            return res
    res.ok = True
    if last_run_id:
        params = config.analysis
        if case.gate_overrides:
            params = AnalysisParams.from_mapping(
                {**_params_mapping(params), **case.gate_overrides}
            )
        res.verdict = gate(store, last_run_id, params)
    return res


def build_meta_for(config: CampaignConfig) -> dict[str, str]:
    return {step.name: step.command for step in config.build_steps}


def _params_mapping(params: AnalysisParams) -> dict:
    obj = params.to_obj()
    obj["larger_is_better_paths"] = ",".join(obj["larger_is_better_paths"])
    return obj


def write_summary(result: CampaignResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_obj(), indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def _notify(config: CampaignConfig, result: CampaignResult) -> CampaignResult:
    """Invoke the notification hook once, summary file path bound.

    A failing notification is recorded but never changes the exit code: the
    verdict channel stays the gate's.
    """
    if not config.notify_command:
        return result
    summary = write_summary(result, Path(config.store_dir) / "campaign-summary.json")
    try:
        argv = render_command(
            config.notify_command,
            {"summary": str(summary), "exit_code": str(result.exit_code)},
        )
        proc = subprocess.run(argv, timeout=60, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        if proc.returncode != 0:
            result.notify_error = f"notify command exited {proc.returncode}"
        else:
            result.notified = True
    except (CampaignError, subprocess.TimeoutExpired, OSError) as e:
        result.notify_error = str(e)
    return result
