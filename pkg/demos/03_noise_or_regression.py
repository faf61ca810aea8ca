"""Platform noise or real regression? The history decides.

Two classic stories, replayed on synthetic series:

* a shared file system collapses for one run and recovers -- a transient
  anomaly the gate must warn about but never fail on;
* an MPI-IO configuration fix makes runs persistently faster -- a regime
  change the offline change-point scan pins down in the timeline.
"""

import random

from perftrack import classify_series, detect_shifts


def timeline(values, classes, width=44):
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    marker = {"normal": ".", "transient": "!", "shift": "^"}
    for i, (v, c) in enumerate(zip(values, classes)):
        pos = round((v - lo) / span * width)
        print(f"  run {i + 1:>2} {marker[c.kind]} {' ' * pos}{v:8.1f}")


print("=== story 1: one run hits a collapsed file system ===")
values = [95.0] * 5 + [140.0] + [95.0] * 4
classes = classify_series(values)
timeline(values, classes)
spike = classes[5]
print(
    f"run 6 -> {spike.kind} ({spike.direction}, {spike.magnitude:.0f} spreads); "
    f"runs 7-10 -> {[c.kind for c in classes[6:]]}"
)
print("verdict material: warn the developers, do not block the commit\n")

print("=== story 2: an IO configuration fix lands ===")
rng = random.Random(3)
values = [100 + rng.uniform(-2, 2) for _ in range(17)] + [
    70 + rng.uniform(-2, 2) for _ in range(13)
]
classes = classify_series(values)
timeline(values, classes)
for cp in detect_shifts(values):
    print(
        f"change point at run {cp.index + 1}: median {cp.before_median:.1f} -> "
        f"{cp.after_median:.1f} (score {cp.score:.2f})"
    )
print("a persistent improvement: the gate passes with a note, never fails")
