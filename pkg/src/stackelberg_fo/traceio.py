"""CSV traces: one row per outer iteration.

Columns are ``CSV_FIELDS`` followed by ``x_0 .. x_{n0-1}``.  Lines starting
with ``#`` are metadata; the first one carries a timestamp and is the only
line that differs between two identical runs.  Floats are written with
``repr`` (shortest round-trip form) and missing values as empty cells.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
from typing import Iterable, List, Optional, TextIO, Tuple

from .outer import CSV_FIELDS, IterationRecord

_INT_FIELDS = {"t", "M_y", "M_z", "grad_evals_cum"}
_ATTR = {"lambda": "lam"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return repr(float(v))


def header_lines(meta: dict, timestamp: Optional[str] = None) -> List[str]:
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"# generated {ts}"]
    for key in sorted(meta):
        lines.append(f"# {key}={meta[key]!r}" if not isinstance(meta[key], str)
                     else f"# {key}={meta[key]}")
    return lines


def _row(rec: IterationRecord) -> List[str]:
    cells = [_fmt(getattr(rec, _ATTR.get(name, name))) for name in CSV_FIELDS]
    return cells + [_fmt(v) for v in rec.x]


class CsvTraceSink:
    """Streams records to ``stream`` as they arrive.

    The column header is written with the first record, when the leader
    dimension becomes known.
    """

    def __init__(self, stream: TextIO, meta: Optional[dict] = None,
                 timestamp: Optional[str] = None):
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._started = False
        for line in header_lines(meta or {}, timestamp):
            stream.write(line + "\n")

    def __call__(self, rec: IterationRecord) -> None:
        if not self._started:
            self._writer.writerow(list(CSV_FIELDS) + [f"x_{j}" for j in range(len(rec.x))])
            self._started = True
        self._writer.writerow(_row(rec))
        self._stream.flush()


def emit_trace(trace: Iterable[IterationRecord], meta: Optional[dict] = None,
               timestamp: Optional[str] = None) -> str:
    buf = io.StringIO()
    sink = CsvTraceSink(buf, meta, timestamp)
    for rec in trace:
        sink(rec)
    return buf.getvalue()


def _parse_meta(line: str, meta: dict) -> None:
    body = line[1:].strip()
    if "=" not in body:
        return
    key, _, raw = body.partition("=")
    try:
        meta[key] = float(raw) if raw not in ("True", "False") else raw == "True"
    except ValueError:
        meta[key] = raw


def parse_trace(text: str) -> Tuple[List[IterationRecord], dict]:
    """Inverse of :func:`emit_trace`; returns ``(records, meta)``."""
    meta: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            _parse_meta(line, meta)
        elif line.strip():
            body.append(line)
    if not body:
        return [], meta
    reader = csv.reader(body)
    header = next(reader)
    n_fixed = len(CSV_FIELDS)
    if tuple(header[:n_fixed]) != CSV_FIELDS:
        raise ValueError("trace header does not match the expected columns")
    records = []
    for cells in reader:
        kw = {}
        for name, cell in zip(CSV_FIELDS, cells[:n_fixed]):
            if cell == "":
                val = None
            elif name in _INT_FIELDS:
                val = int(cell)
            else:
                val = float(cell)
            kw[_ATTR.get(name, name)] = val
        kw["x"] = tuple(float(c) for c in cells[n_fixed:])
        records.append(IterationRecord(**kw))
    return records, meta


def read_trace(path) -> Tuple[List[IterationRecord], dict]:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read())
