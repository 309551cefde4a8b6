"""Schema readers: header validation and parse errors."""

import json

import pytest

from resnet_limits_plots.io import SchemaError, read_summary, read_table

SPEC = {"command": "sweep", "config": {"n": 10, "d": 10, "scheme": "vanilla"}}


def write_csv(path, schema=True, command="sweep", spec=SPEC, body="n,d\n10,10\n"):
    lines = []
    if schema:
        lines.append("# resnet-limits-schema v1")
    lines.append(f"# command: {command}")
    lines.append("# version: 0.1.0")
    lines.append(f"# spec: {json.dumps(spec)}")
    path.write_text("\n".join(lines) + "\n" + body)


def test_parses_header_and_rows(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path)
    table = read_table(path)
    assert table.command == "sweep"
    assert table.spec["config"]["n"] == 10
    assert table.column("n") == [10.0]


def test_missing_schema_marker(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, schema=False)
    with pytest.raises(SchemaError, match="schema marker"):
        read_table(path)


def test_wrong_command(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, command="density")
    with pytest.raises(SchemaError, match="expected 'sweep'"):
        read_table(path, expect_command="sweep")


def test_missing_column_named_in_error(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path)
    with pytest.raises(SchemaError, match="mean_emp"):
        read_table(path).column("mean_emp")


def test_ragged_row_rejected(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, body="n,d\n10\n")
    with pytest.raises(SchemaError, match="row width"):
        read_table(path)


def test_json_summary_schema(tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"schema": "resnet-limits-schema v1", "spec": SPEC}))
    doc = read_summary(path, expect_command="sweep")
    assert doc["spec"]["command"] == "sweep"
    path.write_text(json.dumps({"spec": SPEC}))
    with pytest.raises(SchemaError):
        read_summary(path)
