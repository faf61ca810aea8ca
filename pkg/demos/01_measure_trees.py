"""Measure trees: the data every instrumented run exports.

A run's phase stack becomes a tree of named values with units and
operation-type labels. This script builds one by hand, validates it, and
walks through the three aggregations the dashboard views are built on.
"""

from perftrack import (
    MeasureTree,
    aggregate_by_label,
    flatten_paths,
    node,
    sunburst,
    validate_tree,
)

# One simulation run: 100 s total, three phases, labels on the leaves.
tree = MeasureTree(
    root=node(
        "execution",
        100.0,
        "s",
        children=[
            node("assembly", 42.0, "s", labels=["computation"]),
            node(
                "solver",
                40.0,
                "s",
                children=[
                    node("velocity_correction", 25.0, "s", labels=["computation"]),
                    node("halo_exchange", 10.0, "s", labels=["communication"]),
                ],
            ),
            node("output", 12.0, "s", labels=["io"]),
            node("peak_memory", 512.0, "MiB"),  # other units ride along
        ],
    )
)

violations = validate_tree(tree)
print(f"validation: {'ok' if not violations else violations}")

print("\nflattened paths (value / self time):")
for pv in flatten_paths(tree):
    depth = pv.path.count("/")
    print(f"  {'  ' * depth}{pv.path:<42} {pv.value:>7.1f} {pv.unit:<4} self={pv.self_value:.1f}")

print("\ntime per operation type (the stacked-bar view):")
agg = aggregate_by_label(tree, "s")
for label, value in sorted(agg.entries.items(), key=lambda kv: -kv[1]):
    bar = "#" * round(value / 2)
    print(f"  {label:<14} {value:>6.1f} s  {bar}")
print(f"  {'total':<14} {agg.total():>6.1f} s  (= root value, conserved)")

print("\nsunburst wedges (fraction of parent):")


def show(sb, depth=0):
    print(f"  {'  ' * depth}{sb.name or '<all>':<24} {sb.fraction:>6.1%}  self={sb.self_value:.1f}")
    for child in sb.children:
        show(child, depth + 1)


show(sunburst(tree, "s"))
