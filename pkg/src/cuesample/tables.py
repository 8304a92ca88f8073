"""Rectangular result tables and their CSV form.

CSV layout: ``#``-prefixed metadata lines, one header row, then data rows.
Floats are written with ``repr`` so a table round-trips exactly and two runs
that compute the same numbers write the same bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def _parse(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} cells, expected {width}")

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: Sequence) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(self.columns)}")
        self.rows.append(tuple(row))

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows])

    def where(self, **equals) -> "ResultTable":
        idx = [self.columns.index(k) for k in equals]
        vals = list(equals.values())
        rows = [r for r in self.rows if all(r[j] == v for j, v in zip(idx, vals))]
        return ResultTable(list(self.columns), rows, dict(self.metadata))

    def to_csv(self, target=None) -> str:
        """Serialise; also write to ``target`` (a path) when given."""
        buf = io.StringIO()
        for key, value in self.metadata.items():
            lines = str(value).splitlines() or [""]
            buf.write(f"# {key}: {lines[0]}\n")
            for line in lines[1:]:
                buf.write(f"#   {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_csv_text(cls, text: str) -> "ResultTable":
        metadata: dict[str, str] = {}
        body: list[str] = []
        last = None
        for line in text.splitlines():
            if line.startswith("#   ") and last is not None:
                metadata[last] += "\n" + line[4:]
            elif line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                metadata[key] = value
                last = key
            else:
                body.append(line)
        reader = csv.reader(body)
        columns = next(reader)
        rows = [tuple(_parse(c) for c in r) for r in reader]
        return cls(columns, rows, metadata)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    from scipy.stats import binomtest

    if trials < 1:
        return (math.nan, math.nan)
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def concat(tables: Iterable[ResultTable]) -> ResultTable:
    tables = list(tables)
    out = ResultTable(list(tables[0].columns), [], dict(tables[0].metadata))
    for t in tables:
        if t.columns != out.columns:
            raise ValueError("column mismatch")
        out.rows.extend(t.rows)
    return out
