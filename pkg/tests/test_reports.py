import json

import pytest

from perftrack.reports import (
    ReportFormatError,
    ReportSyntaxError,
    UnsupportedSchemaError,
    canonical_report_bytes,
    make_report,
    parse_report,
)
from perftrack.tree import InvalidTreeError, MeasureTree, node

MINIMAL = b'{"schema_version": 1, "case": "mini", "measures": {"name": "root", "value": 1.5, "unit": "s"}}'


class TestParse:
    def test_minimal_report(self):
        report = parse_report(MINIMAL)
        assert report.case == "mini"
        assert report.iteration == 0
        assert report.tree.root.name == "root"
        assert report.tree.root.children == ()

    def test_unsupported_schema_version(self):
        bad = MINIMAL.replace(b'"schema_version": 1', b'"schema_version": 2')
        with pytest.raises(UnsupportedSchemaError):
            parse_report(bad)

    def test_missing_schema_version(self):
        with pytest.raises(UnsupportedSchemaError):
            parse_report(b'{"case": "x", "measures": {"name": "r", "value": 1, "unit": "s"}}')

    def test_syntax_error_carries_byte_offset(self):
        with pytest.raises(ReportSyntaxError) as exc:
            parse_report(b'{"schema_version": 1,,}')
        assert exc.value.byte_offset == 21

    def test_invalid_utf8(self):
        with pytest.raises(ReportSyntaxError):
            parse_report(b'{"case": "\xff\xfe"}')

    def test_labels_deduplicated_and_sorted(self):
        raw = json.dumps(
            {
                "schema_version": 1,
                "case": "x",
                "measures": {
                    "name": "r",
                    "value": 1,
                    "unit": "s",
                    "labels": ["io", "io", "computation"],
                },
            }
        )
        report = parse_report(raw)
        assert report.tree.root.labels == frozenset({"io", "computation"})
        obj = json.loads(canonical_report_bytes(report))
        assert obj["measures"]["labels"] == ["computation", "io"]

    def test_tree_violations_forwarded(self):
        raw = json.dumps(
            {
                "schema_version": 1,
                "case": "x",
                "measures": {
                    "name": "r",
                    "value": 1,
                    "unit": "s",
                    "children": [{"name": "a", "value": 5, "unit": "s"}],
                },
            }
        )
        with pytest.raises(InvalidTreeError) as exc:
            parse_report(raw)
        assert any(v.code == "children-exceed-parent" for v in exc.value.violations)

    def test_overrides_replace_headers(self):
        report = parse_report(MINIMAL, overrides={"case": "renamed", "iteration": 3})
        assert report.case == "renamed"
        assert report.iteration == 3

    def test_missing_case_rejected_unless_overridden(self):
        raw = b'{"schema_version": 1, "measures": {"name": "r", "value": 1, "unit": "s"}}'
        with pytest.raises(ReportFormatError):
            parse_report(raw)
        assert parse_report(raw, overrides={"case": "x"}).case == "x"

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda obj: obj["measures"].pop("name"),
            lambda obj: obj["measures"].update(value="ten"),
            lambda obj: obj["measures"].update(value=True),
            lambda obj: obj["measures"].update(labels="io"),
            lambda obj: obj.update(iteration=-1),
            lambda obj: obj.update(measures=[1, 2]),
        ],
    )
    def test_schema_violations(self, mutate):
        obj = json.loads(MINIMAL)
        mutate(obj)
        with pytest.raises(ReportFormatError):
            parse_report(json.dumps(obj))


class TestCanonical:
    def canonical_fixture(self) -> bytes:
        report = make_report(
            MeasureTree(
                root=node(
                    "execution",
                    12.5,
                    "s",
                    children=[
                        node("assembly", 4.0, "s", labels=["computation"]),
                        node("io", 3.25, "s", labels=["io"]),
                    ],
                )
            ),
            case="fix",
            iteration=2,
        )
        return canonical_report_bytes(report)

    def test_round_trip_is_byte_identical(self):
        data = self.canonical_fixture()
        assert canonical_report_bytes(parse_report(data)) == data

    def test_non_canonical_input_maps_to_same_canonical_form(self):
        data = self.canonical_fixture()
        obj = json.loads(data)
        obj["pipeline_note"] = "extra"  # unknown key
        obj["measures"]["children"][0]["labels"] = ["computation", "computation"]
        messy = json.dumps(obj, indent=4).encode()
        assert canonical_report_bytes(parse_report(messy)) == data

    def test_unknown_keys_preserved_on_read_dropped_on_write(self):
        obj = json.loads(MINIMAL)
        obj["job_hint"] = {"queue": "debug"}
        report = parse_report(json.dumps(obj))
        assert report.extras == {"job_hint": {"queue": "debug"}}
        assert b"job_hint" not in canonical_report_bytes(report)

    def test_empty_labels_and_children_omitted(self):
        report = parse_report(MINIMAL)
        obj = json.loads(canonical_report_bytes(report))
        assert "labels" not in obj["measures"]
        assert "children" not in obj["measures"]

    def test_values_canonicalize_as_floats(self):
        raw = MINIMAL.replace(b'"value": 1.5', b'"value": 2')
        obj = json.loads(canonical_report_bytes(parse_report(raw)))
        assert obj["measures"]["value"] == 2.0
        assert isinstance(obj["measures"]["value"], float)
