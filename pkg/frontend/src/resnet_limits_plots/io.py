"""Readers for the v1 experiment-output schemas.

Every artifact starts with the marker line ``# resnet-limits-schema v1``
(CSV) or carries ``"schema": "resnet-limits-schema v1"`` (JSON), followed by
the producing command and the full experiment spec. The plot scripts never
recompute statistics; they plot exactly what these files contain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_LINE = "resnet-limits-schema v1"


class SchemaError(ValueError):
    """Input file does not match the expected v1 schema."""


@dataclass
class Table:
    """One parsed CSV artifact: header metadata plus named columns."""

    path: str
    command: str
    spec: dict
    columns: list
    rows: list  # list of dicts, values parsed as float where possible
    meta: dict = field(default_factory=dict)  # extra '# key: json' header lines

    def column(self, name):
        if name not in self.columns:
            raise SchemaError(f"{self.path}: missing column {name!r}")
        return [row[name] for row in self.rows]


def _parse_value(token: str):
    try:
        return float(token)
    except ValueError:
        return token


def read_table(path, expect_command=None) -> Table:
    """Parse a v1 CSV artifact, validating the schema and command headers."""
    command = None
    spec = None
    meta = {}
    columns = None
    rows = []
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {SCHEMA_LINE}":
            raise SchemaError(f"{path}: missing schema marker {SCHEMA_LINE!r}")
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, sep, value = body.partition(":")
                if not sep:
                    continue
                key, value = key.strip(), value.strip()
                if key == "command":
                    command = value
                elif key == "spec":
                    spec = json.loads(value)
                elif key != "version":
                    try:
                        meta[key] = json.loads(value)
                    except json.JSONDecodeError:
                        meta[key] = value
                continue
            if columns is None:
                columns = line.split(",")
                continue
            values = [_parse_value(tok) for tok in line.split(",")]
            if len(values) != len(columns):
                raise SchemaError(f"{path}: row width {len(values)} != {len(columns)}")
            rows.append(dict(zip(columns, values)))
    if command is None or spec is None:
        raise SchemaError(f"{path}: header lacks command/spec lines")
    if expect_command is not None and command != expect_command:
        raise SchemaError(
            f"{path}: produced by {command!r}, expected {expect_command!r}"
        )
    if columns is None:
        raise SchemaError(f"{path}: no column header row")
    return Table(path=str(path), command=command, spec=spec, columns=columns, rows=rows, meta=meta)


def read_curve(path) -> tuple:
    """Read a density-grid CSV; returns (xs, densities, command, spec)."""
    table = read_table(path, expect_command="density")
    return table.column("x"), table.column("density"), table


def read_summary(path, expect_command=None) -> dict:
    """Parse a v1 JSON artifact."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA_LINE:
        raise SchemaError(f"{path}: missing schema marker {SCHEMA_LINE!r}")
    command = doc.get("spec", {}).get("command")
    if expect_command is not None and command != expect_command:
        raise SchemaError(f"{path}: produced by {command!r}, expected {expect_command!r}")
    return doc


def require_rows(table: Table) -> Table:
    if not table.rows:
        raise SchemaError(f"{table.path}: no data rows")
    return table
