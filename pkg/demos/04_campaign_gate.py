"""One CI campaign, end to end: build, run, harvest, ingest, gate, notify.

Everything here is a command template, so the same runner drives `make` and
a batch-system submit script in production and two tiny Python one-liners in
this demo. The process exit code is the whole CI contract:
0 pass, 10 warn, 20 fail, 1 infrastructure failure.
"""

import sys
import tempfile
import textwrap
from pathlib import Path

from perftrack import run_campaign
from perftrack.campaign import load_campaign_config

EMITTER = textwrap.dedent(
    """
    import json, sys
    json.dump({
        "schema_version": 1,
        "case": "lid-cavity",
        "measures": {
            "name": "execution", "value": 58.0, "unit": "s",
            "children": [
                {"name": "solver", "value": 49.0, "unit": "s", "labels": ["computation"]},
                {"name": "output", "value": 6.0, "unit": "s", "labels": ["io"]},
            ],
        },
    }, open(sys.argv[1], "w"))
    """
)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "run_case.py").write_text(EMITTER)
    (tmp / "campaign.ini").write_text(
        textwrap.dedent(
            f"""
            [campaign]
            store_dir = {tmp / "store"}
            notify_command = {sys.executable} -c "import sys; print('campaign done, summary at', sys.argv[1])" {{summary}}

            [analysis]
            window = 20
            fail_ratio = 0.10

            [build.configure]
            command = {sys.executable} -c "print('pretend to compile the solver')"
            workdir = {tmp}

            [case.lid-cavity]
            command = {sys.executable} {tmp / "run_case.py"} {{report}}
            report = out/report.json
            workdir = {tmp}
            timeout = 60
            """
        )
    )

    config = load_campaign_config(tmp / "campaign.ini")
    result = run_campaign(
        config, context={"commit": "8c1f2ab", "branch": "main", "pipeline_id": "4711"}
    )

    for case in result.case_results:
        verdict = case.verdict.kind if case.verdict else "-"
        print(f"case {case.name}: {'ok' if case.ok else case.error}, gate verdict: {verdict}")
    print(f"campaign exit code: {result.exit_code}")
    print("(a fresh store means no history yet: the first run always passes)")
