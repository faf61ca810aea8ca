import json
import sys
import textwrap

import pytest

from perftrack.campaign import (
    BuildStep,
    CampaignConfig,
    CampaignError,
    CaseSpec,
    ConfigError,
    UnknownPlaceholderError,
    load_campaign_config,
    render_command,
    run_campaign,
)
from perftrack.store import RunStore

from scenarios import ROMIO_VALUES

EMITTER = textwrap.dedent(
    """
    import json, sys
    value, path = float(sys.argv[1]), sys.argv[2]
    iteration = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    report = {
        "schema_version": 1,
        "case": "bench",
        "iteration": iteration,
        "measures": {
            "name": "execution", "value": value, "unit": "s",
            "children": [
                {"name": "io", "value": value / 4, "unit": "s", "labels": ["io"]},
            ],
        },
    }
    with open(path, "w") as fh:
        json.dump(report, fh)
    """
)

REPLAY = textwrap.dedent(
    """
    import json, sys
    values = json.load(open(sys.argv[1]))
    iteration, path = int(sys.argv[2]), sys.argv[3]
    report = {
        "schema_version": 1,
        "case": "bench",
        "iteration": iteration,
        "measures": {"name": "execution", "value": values[iteration], "unit": "s"},
    }
    with open(path, "w") as fh:
        json.dump(report, fh)
    """
)


class TestRenderCommand:
    def test_substitution(self):
        assert render_command("run {case}", {"case": "cough"}) == ["run", "cough"]

    def test_unknown_placeholder(self):
        with pytest.raises(UnknownPlaceholderError):
            render_command("echo {missing}", {"case": "x"})

    def test_quoted_argument_stays_one_token(self):
        assert render_command('echo "a b"', {}) == ["echo", "a b"]

    def test_empty_template_rejected(self):
        with pytest.raises(CampaignError):
            render_command("   ", {})


def one_case_config(tmp_path, command, *, iterations=1, timeout=30.0, build_steps=(), notify=""):
    return CampaignConfig(
        store_dir=str(tmp_path / "store"),
        build_steps=tuple(build_steps),
        cases=(
            CaseSpec(
                name="bench",
                command=command,
                report="out/report.json",
                workdir=str(tmp_path),
                timeout=timeout,
                iterations=iterations,
            ),
        ),
        notify_command=notify,
    )


def write_script(tmp_path, name, body) -> str:
    path = tmp_path / name
    path.write_text(body)
    return str(path)


class TestRunCampaign:
    def test_happy_path_stores_one_run(self, tmp_path):
        emit = write_script(tmp_path, "emit.py", EMITTER)
        config = one_case_config(tmp_path, f"{sys.executable} {emit} 100 {{report}}")
        result = run_campaign(config, context={"commit": "abc", "branch": "main"})
        assert result.exit_code == 0
        case = result.case_results[0]
        assert case.ok and len(case.run_ids) == 1
        store = RunStore(config.store_dir)
        rec = store.get(case.run_ids[0])
        assert rec.case == "bench" and rec.meta.commit == "abc"
        assert rec.tree.root.value == 100.0

    def test_failing_case_command_exits_1_nothing_stored(self, tmp_path):
        config = one_case_config(tmp_path, f"{sys.executable} -c 'import sys; sys.exit(3)'")
        result = run_campaign(config)
        assert result.exit_code == 1
        assert not result.case_results[0].ok
        assert len(RunStore(config.store_dir)) == 0

    def test_case_timeout_marks_failed_but_campaign_continues(self, tmp_path):
        emit = write_script(tmp_path, "emit.py", EMITTER)
        slow = CaseSpec(
            name="slow",
            command=f"{sys.executable} -c 'import time; time.sleep(30)'",
            report="out/slow.json",
            workdir=str(tmp_path),
            timeout=0.5,
        )
        fast = CaseSpec(
            name="fast",
            command=f"{sys.executable} {emit} 10 {{report}}",
            report="out/fast.json",
            workdir=str(tmp_path),
            timeout=30.0,
        )
        config = CampaignConfig(store_dir=str(tmp_path / "store"), cases=(slow, fast))
        result = run_campaign(config)
        assert result.exit_code == 1  # infrastructure failure somewhere
        by_name = {c.name: c for c in result.case_results}
        assert not by_name["slow"].ok and "timed out" in by_name["slow"].error
        assert by_name["fast"].ok  # later cases still ran

    def test_missing_report_fails_case(self, tmp_path):
        config = one_case_config(tmp_path, f"{sys.executable} -c 'pass'")
        result = run_campaign(config)
        assert result.exit_code == 1
        assert "no report" in result.case_results[0].error

    def test_build_failure_aborts_campaign(self, tmp_path):
        emit = write_script(tmp_path, "emit.py", EMITTER)
        config = one_case_config(
            tmp_path,
            f"{sys.executable} {emit} 100 {{report}}",
            build_steps=[
                BuildStep(
                    name="compile",
                    command=f"{sys.executable} -c 'import sys; sys.exit(2)'",
                    workdir=str(tmp_path),
                )
            ],
        )
        result = run_campaign(config)
        assert result.exit_code == 1
        assert not result.build_ok and "compile" in result.build_error
        assert result.case_results == []

    def test_report_escaping_workdir_rejected(self, tmp_path):
        (tmp_path / "work").mkdir()
        config = CampaignConfig(
            store_dir=str(tmp_path / "store"),
            cases=(
                CaseSpec(
                    name="bench",
                    command="true",
                    report="../outside.json",
                    workdir=str(tmp_path / "work"),
                ),
            ),
        )
        result = run_campaign(config)
        assert result.exit_code == 1
        assert "escapes" in result.case_results[0].error

    def test_stale_report_never_ingested(self, tmp_path):
        (tmp_path / "out").mkdir()
        (tmp_path / "out" / "report.json").write_text("{stale")
        config = one_case_config(tmp_path, f"{sys.executable} -c 'pass'")
        result = run_campaign(config)
        assert "no report" in result.case_results[0].error

    def test_twenty_iteration_replay_matches_fixture(self, tmp_path):
        replay = write_script(tmp_path, "replay.py", REPLAY)
        values_file = tmp_path / "values.json"
        values_file.write_text(json.dumps(ROMIO_VALUES[:20]))
        config = one_case_config(
            tmp_path,
            f"{sys.executable} {replay} {values_file} {{iteration}} {{report}}",
            iterations=20,
        )
        result = run_campaign(config, context={"commit": "fix", "branch": "main"})
        # run 20 is the third point of the improved regime: pass with a note
        assert result.exit_code == 0
        case = result.case_results[0]
        assert len(case.run_ids) == 20
        assert case.verdict.kind == "pass"
        assert any("improvement" in note for note in case.verdict.notes)
        series = RunStore(config.store_dir).query_series("bench", "execution")
        assert series.values() == ROMIO_VALUES[:20]

    def test_notify_hook_receives_summary_path(self, tmp_path):
        emit = write_script(tmp_path, "emit.py", EMITTER)
        sink = tmp_path / "notified.txt"
        notifier = write_script(
            tmp_path,
            "notify.py",
            f"import shutil, sys\nshutil.copy(sys.argv[1], {str(sink)!r})\n",
        )
        config = one_case_config(
            tmp_path,
            f"{sys.executable} {emit} 100 {{report}}",
            notify=f"{sys.executable} {notifier} {{summary}}",
        )
        result = run_campaign(config)
        assert result.notified
        summary = json.loads(sink.read_text())
        assert summary["exit_code"] == 0
        assert summary["cases"][0]["name"] == "bench"

    def test_notify_failure_does_not_change_exit_code(self, tmp_path):
        emit = write_script(tmp_path, "emit.py", EMITTER)
        config = one_case_config(
            tmp_path,
            f"{sys.executable} {emit} 100 {{report}}",
            notify=f"{sys.executable} -c 'import sys; sys.exit(9)'",
        )
        result = run_campaign(config)
        assert result.exit_code == 0
        assert result.notify_error


class TestConfig:
    def test_duplicate_case_names_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            CampaignConfig(
                store_dir="s",
                cases=(
                    CaseSpec(name="x", command="a", report="r"),
                    CaseSpec(name="x", command="b", report="r"),
                ),
            )

    def test_nonpositive_timeout_rejected(self):
        with pytest.raises(ConfigError):
            CampaignConfig(
                store_dir="s",
                cases=(CaseSpec(name="x", command="a", report="r", timeout=0),),
            )

    def test_load_ini(self, tmp_path):
        path = tmp_path / "campaign.ini"
        path.write_text(
            textwrap.dedent(
                """
                [campaign]
                store_dir = ./store
                notify_command = notify-send {summary}
                env_allowlist = OMP_, MPI_, PATH

                [analysis]
                window = 10
                fail_ratio = 0.2

                [build.compile]
                command = make all
                timeout = 120

                [case.cough]
                command = ./run.sh {case} {report}
                report = out/report.json
                timeout = 60
                iterations = 2
                gate.k = 5.0

                [case.spray]
                command = ./run.sh {case} {report}
                report = out/report.json
                """
            )
        )
        config = load_campaign_config(path)
        assert config.store_dir == "./store"
        assert config.env_allowlist == ("OMP_", "MPI_", "PATH")
        assert config.analysis.window == 10
        assert config.analysis.fail_ratio == 0.2
        assert [b.name for b in config.build_steps] == ["compile"]
        assert config.build_steps[0].timeout == 120
        names = [c.name for c in config.cases]
        assert names == ["cough", "spray"]
        assert config.cases[0].iterations == 2
        assert config.cases[0].gate_overrides == {"k": "5.0"}

    def test_load_ini_missing_required(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[campaign]\n")
        with pytest.raises(ConfigError):
            load_campaign_config(path)
        path.write_text("[campaign]\nstore_dir = s\n\n[case.x]\nreport = r\n")
        with pytest.raises(ConfigError):
            load_campaign_config(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_campaign_config(tmp_path / "absent.ini")
