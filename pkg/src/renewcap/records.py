"""Versioned tabular output shared by every CLI command.

CSV layout::

    # schema_version: 1
    # command: pmf
    # parameters: {"lambda": 0.1, "r": 6.0, "t": 10.0}
    # columns: k:int,l:int,probability:float
    k,l,probability
    0,0,0.36787944117144233
    ...
    # metadata: {"j": 1, "truncated_mass": 1.1e-13}

Floats are written with 17 significant digits, which round-trips every
double exactly. The JSON layout carries the same five fields.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

SCHEMA_VERSION = "1"

_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": lambda s: {"true": True, "false": False}[s],
}


def _fmt(value, kind: str) -> str:
    if kind == "float":
        return format(float(value), ".17g")
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


@dataclass
class OutputRecord:
    command: str
    parameters: dict
    columns: list[tuple[str, str]]
    rows: list[list]
    metadata: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        for name, kind in self.columns:
            if kind not in _PARSERS:
                raise ValueError(f"column {name!r} has unsupported type {kind!r}")
        self.columns = [tuple(c) for c in self.columns]
        self.rows = [list(r) for r in self.rows]

    def column(self, name: str) -> list:
        i = [c for c, _ in self.columns].index(name)
        return [row[i] for row in self.rows]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "command": self.command,
                "parameters": self.parameters,
                "columns": [list(c) for c in self.columns],
                "rows": self.rows,
                "metadata": self.metadata,
            },
            sort_keys=True,
            indent=2,
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# schema_version: {self.schema_version}\n")
        out.write(f"# command: {self.command}\n")
        out.write(f"# parameters: {json.dumps(self.parameters, sort_keys=True)}\n")
        out.write("# columns: " + ",".join(f"{n}:{k}" for n, k in self.columns) + "\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow([n for n, _ in self.columns])
        for row in self.rows:
            writer.writerow([_fmt(v, k) for v, (_, k) in zip(row, self.columns)])
        out.write(f"# metadata: {json.dumps(self.metadata, sort_keys=True)}\n")
        return out.getvalue()

    def dumps(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def _from_json(text: str) -> OutputRecord:
    obj = json.loads(text)
    return OutputRecord(
        command=obj["command"],
        parameters=obj["parameters"],
        columns=[tuple(c) for c in obj["columns"]],
        rows=obj["rows"],
        metadata=obj["metadata"],
        schema_version=obj["schema_version"],
    )


def _from_csv(text: str) -> OutputRecord:
    header: dict[str, str] = {}
    body: list[str] = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        elif line.strip():
            body.append(line)
    for key in ("schema_version", "command", "parameters", "columns", "metadata"):
        if key not in header:
            raise ValueError(f"CSV record is missing the {key!r} header line")
    columns = [tuple(c.split(":")) for c in header["columns"].split(",")]
    reader = csv.reader(body)
    names = next(reader)
    if names != [n for n, _ in columns]:
        raise ValueError(f"column header {names} does not match declared columns")
    rows = [[_PARSERS[k](v) for v, (_, k) in zip(row, columns)] for row in reader]
    return OutputRecord(
        command=header["command"],
        parameters=json.loads(header["parameters"]),
        columns=columns,
        rows=rows,
        metadata=json.loads(header["metadata"]),
        schema_version=header["schema_version"],
    )


def parse_record(text: str) -> OutputRecord:
    """Parse either layout; JSON is recognised by its leading brace."""
    if text.lstrip().startswith("{"):
        return _from_json(text)
    return _from_csv(text)
