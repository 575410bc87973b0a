"""Simulation traces and their CSV form.

The CSV has one header row, then one row per recorded time, with floats
printed as shortest round-trip decimals (so parsing gives back identical
doubles).  Faults follow as trailing ``#`` comment lines::

    # fault,<time>,<kind>,<index>,<message>
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .errors import TraceSchemaError

# attribute name -> CSV column prefix (suffix _1.._n per output)
SERIES = {
    "x": "x",
    "v": "v",
    "vd": "vd",
    "ev": "ev",
    "u": "u",
    "xhat": "xhat",
    "evhat": "evhat",
    "gamma_v": "gammav",
    "phi_lower": "phiL",
    "phi_upper": "phiU",
    "rho_lower": "rhoL",
    "rho_upper": "rhoU",
    "hard_lower": "hardL",
    "hard_upper": "hardU",
    "soft_lower": "softL",
    "soft_upper": "softU",
}


@dataclass
class FaultRecord:
    time: float
    kind: str
    index: Optional[int]
    message: str


@dataclass
class SimTrace:
    """Recorded closed-loop run.  Every series is a ``(rows, n_outputs)`` array."""

    t: np.ndarray
    series: Dict[str, np.ndarray]
    faults: List[FaultRecord] = field(default_factory=list)

    def __getattr__(self, name):
        series = self.__dict__.get("series")
        if series is not None and name in series:
            return series[name]
        raise AttributeError(name)

    @property
    def n_outputs(self) -> int:
        return self.series["x"].shape[1]

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_rows(cls, times, rows: Dict[str, list], faults=None) -> "SimTrace":
        return cls(np.asarray(times, dtype=float),
                   {k: np.asarray(rows[k], dtype=float).reshape(len(times), -1) for k in SERIES},
                   list(faults or []))

    def header(self) -> List[str]:
        n = self.n_outputs
        return ["t"] + [f"{prefix}_{i + 1}" for prefix in SERIES.values() for i in range(n)]

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        blocks = [self.t[:, None]] + [self.series[k] for k in SERIES]
        table = np.hstack(blocks)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
        for f in self.faults:
            idx = "" if f.index is None else str(f.index)
            buf.write("# fault," + _csv_line([repr(float(f.time)), f.kind, idx, f.message]) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _csv_line(fields) -> str:
    out = io.StringIO()
    csv.writer(out, lineterminator="").writerow(fields)
    return out.getvalue()


def read_csv(source: Union[str, Path], n_outputs: Optional[int] = None) -> SimTrace:
    """Parse a trace CSV (path or text); raises ``TraceSchemaError`` on any mismatch."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise TraceSchemaError(f"cannot read trace: {exc}") from exc
    else:
        text = source
    data_lines, fault_lines = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            fault_lines.append(line)
        elif line.strip():
            if fault_lines:
                raise TraceSchemaError("data row after the trailing fault block")
            data_lines.append(line)
    if not data_lines:
        raise TraceSchemaError("trace is empty: no header row")
    reader = csv.reader(data_lines)
    header = next(reader)
    if not header or header[0] != "t" or (len(header) - 1) % len(SERIES):
        raise TraceSchemaError(f"unrecognized trace header ({len(header)} columns)")
    n = (len(header) - 1) // len(SERIES)
    if n_outputs is not None and n != n_outputs:
        raise TraceSchemaError(f"trace has {n} outputs, scenario has {n_outputs}")
    expected = ["t"] + [f"{p}_{i + 1}" for p in SERIES.values() for i in range(n)]
    if header != expected:
        bad = next(h for h, e in zip(header, expected) if h != e)
        raise TraceSchemaError(f"unexpected column {bad!r} in trace header")
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if len(fields) != len(header):
            raise TraceSchemaError(f"row {lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise TraceSchemaError(f"row {lineno}: {exc}") from exc
    table = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    t = table[:, 0]
    if len(t) > 1 and not np.all(np.diff(t) > 0):
        raise TraceSchemaError("trace times are not strictly increasing")
    series = {}
    for j, key in enumerate(SERIES):
        series[key] = table[:, 1 + j * n: 1 + (j + 1) * n].copy()
    faults = []
    for line in fault_lines:
        body = line[1:].strip()
        if not body.startswith("fault,"):
            continue
        fields = next(csv.reader([body[len("fault,"):]]))
        if len(fields) != 4:
            raise TraceSchemaError(f"malformed fault line: {line!r}")
        time, kind, idx, message = fields
        faults.append(FaultRecord(float(time), kind, int(idx) if idx else None, message))
    return SimTrace(t, series, faults)

