"""Forecast panels: CSV input, slicing, and deterministic JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from murphytest.errors import (
    EmptyInputError,
    InvalidArgumentError,
    NumericalDegeneracyError,
    ParseError,
    SchemaError,
)

SCHEMA_VERSION = 1


@dataclass
class ForecastPanel:
    """Realized values and K aligned forecast series of length T."""

    realized: np.ndarray
    forecasts: np.ndarray  # (T, K)
    names: list
    realized_name: str = "y"
    labels: list | None = None  # optional opaque row labels (e.g. dates)

    def __post_init__(self):
        self.realized = np.asarray(self.realized, dtype=float)
        self.forecasts = np.asarray(self.forecasts, dtype=float)
        if self.forecasts.ndim == 1:
            self.forecasts = self.forecasts[:, None]
        self.names = list(self.names)
        if self.realized.ndim != 1 or self.forecasts.shape[0] != self.realized.size:
            raise InvalidArgumentError("forecast columns and realized values differ in length")
        if self.forecasts.shape[1] != len(self.names):
            raise InvalidArgumentError("number of names does not match forecast columns")
        if not self.names or any(not str(n) for n in self.names):
            raise InvalidArgumentError("need at least one non-empty forecast name")
        if len(set(self.names)) != len(self.names):
            raise InvalidArgumentError("duplicate forecast names")
        if self.realized.size == 0:
            raise EmptyInputError("panel has no rows")
        if not (np.all(np.isfinite(self.realized)) and np.all(np.isfinite(self.forecasts))):
            raise InvalidArgumentError("panel values must be finite")
        if self.labels is not None and len(self.labels) != self.realized.size:
            raise InvalidArgumentError("row labels differ in length from the panel")

    def __len__(self):
        return self.realized.size

    def column(self, name) -> np.ndarray:
        try:
            return self.forecasts[:, self.names.index(name)]
        except ValueError:
            raise SchemaError(f"no forecast column named {name!r}") from None

    @classmethod
    def from_columns(cls, realized, columns: dict, realized_name="y"):
        names = list(columns)
        X = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
        return cls(realized, X, names, realized_name)


@dataclass
class PanelSlice:
    """Evaluation view on a panel: a benchmark, its competitors and a row range.

    ``pairs`` lists (benchmark, competitor) index pairs into ``names``;
    by default the benchmark is compared with each competitor.
    """

    panel: ForecastPanel
    benchmark: str
    competitors: tuple
    start: int = 0
    stop: int | None = None
    all_pairs: bool = False
    _cols: list = field(init=False, repr=False)

    def __post_init__(self):
        self.competitors = tuple(self.competitors)
        if not self.competitors:
            raise InvalidArgumentError("at least one competitor is required")
        self._cols = [self.panel.names.index(n) if n in self.panel.names else None for n in self.names]
        for n, c in zip(self.names, self._cols):
            if c is None:
                raise SchemaError(f"no forecast column named {n!r}")
        if len(set(self.names)) != len(self.names):
            raise InvalidArgumentError("benchmark and competitors must be distinct")
        stop = len(self.panel) if self.stop is None else self.stop
        if not 0 <= self.start < stop <= len(self.panel):
            raise InvalidArgumentError("empty or out-of-range evaluation window")
        self.stop = stop

    @property
    def names(self) -> list:
        return [self.benchmark, *self.competitors]

    @property
    def realized(self) -> np.ndarray:
        return self.panel.realized[self.start:self.stop]

    @property
    def forecasts(self) -> np.ndarray:
        return self.panel.forecasts[self.start:self.stop][:, self._cols]

    @property
    def pairs(self) -> list:
        K = len(self.names)
        if self.all_pairs:
            return [(k, l) for k in range(K) for l in range(K) if k != l]
        return [(0, l) for l in range(1, K)]

    def __len__(self):
        return self.stop - self.start

    def reversed(self) -> "PanelSlice":
        """Swap the roles of the benchmark and a single competitor."""
        if len(self.competitors) != 1:
            raise InvalidArgumentError("reversal needs exactly one competitor")
        return PanelSlice(self.panel, self.competitors[0], (self.benchmark,), self.start, self.stop, self.all_pairs)


def _decode(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, newline="", encoding="utf-8") as fh:
            return fh.read()
    if isinstance(source, str) and "\n" in source:
        return source
    raise EmptyInputError(f"cannot read panel from {source!r}")


def _read_columns(source, wanted, label_column=None):
    reader = csv.reader(io.StringIO(_decode(source)))
    header = next((rec for rec in reader if any(s.strip() for s in rec)), None)
    if header is None:
        raise EmptyInputError("input has no header row")
    header = [h.strip() for h in header]
    for col in [*wanted, *([label_column] if label_column else [])]:
        if col not in header:
            raise SchemaError(f"missing column {col!r}")
    idx = [header.index(c) for c in wanted]
    li = header.index(label_column) if label_column else None
    rows, labels = [], []
    for r, rec in enumerate(reader, start=1):
        if not rec or all(not s.strip() for s in rec):
            continue
        vals = []
        for c, i in zip(wanted, idx):
            try:
                v = float(rec[i])
            except (ValueError, IndexError):
                raise ParseError(f"row {r}: cannot parse column {c!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"row {r}: non-finite value in column {c!r}")
            vals.append(v)
        rows.append(vals)
        if li is not None:
            labels.append(rec[li] if li < len(rec) else "")
    if not rows:
        raise EmptyInputError("input has a header but no data rows")
    return np.asarray(rows), (labels if li is not None else None)


def read_panel_csv(source, realized: str, forecasts, label_column: str | None = None) -> ForecastPanel:
    """Read a comma-separated panel with a header row.

    ``source`` is a path, bytes or text.  Data rows are numbered from 1 in
    error messages.  ``label_column`` is kept verbatim as row labels.
    """
    forecasts = list(forecasts)
    arr, labels = _read_columns(source, [realized, *forecasts], label_column)
    return ForecastPanel(arr[:, 0], arr[:, 1:], forecasts, realized, labels)


def read_series_csv(source, column: str) -> np.ndarray:
    """Read one numeric column of a CSV file."""
    arr, _ = _read_columns(source, [column])
    return arr[:, 0]


def _plain(obj):
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise NumericalDegeneracyError("report contains a non-finite number")
        return v
    return obj


def write_report_json(report) -> bytes:
    """Serialize a report (object with ``to_dict`` or a mapping) to JSON bytes.

    Keys are sorted, floats keep full round-trip precision and non-finite
    numbers are rejected.
    """
    doc = _plain(report)
    if isinstance(doc, dict):
        doc.setdefault("schema", SCHEMA_VERSION)
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def read_report_json(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    return json.loads(data)
