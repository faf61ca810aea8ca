"""What instrumenting an application looks like: ~50 lines, no library.

The report format is deliberately tiny so any code in any language can emit
it: nested timers with units and labels, one JSON object per run. This
stand-in "solver" times its phases with a context manager and writes the
report to the path the campaign runner hands it in argv[1].
"""

import json
import sys
import time
from contextlib import contextmanager


class Timer:
    def __init__(self, name, unit="s", labels=()):
        self.node = {"name": name, "value": 0.0, "unit": unit,
                     "labels": list(labels), "children": []}
        self._stack = [self.node]

    @contextmanager
    def phase(self, name, labels=()):
        child = {"name": name, "value": 0.0, "unit": "s",
                 "labels": list(labels), "children": []}
        self._stack[-1]["children"].append(child)
        self._stack.append(child)
        start = time.perf_counter()
        try:
            yield
        finally:
            child["value"] = time.perf_counter() - start
            self._stack.pop()

    def report(self, case, out_path):
        self.node["value"] = sum(c["value"] for c in self.node["children"]) + 1e-4
        with open(out_path, "w") as fh:
            json.dump({"schema_version": 1, "case": case, "measures": self.node}, fh)


def main(out_path):
    timer = Timer("execution")
    with timer.phase("assembly", labels=["computation"]):
        sum(i * i for i in range(200_000))
    with timer.phase("solve", labels=["computation"]):
        sum(i ** 0.5 for i in range(200_000))
    with timer.phase("write_fields", labels=["io"]):
        time.sleep(0.01)
    timer.report("demo-solver", out_path)
    print(f"report written to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "report.json")
