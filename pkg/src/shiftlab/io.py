"""CSV ingestion, canonical JSON reports and plot-data export.

This is the only module that touches the filesystem.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import EventRecord, TimeSeries, make_series
from .did import DidRecord
from .errors import DateGap, InputError, IoError, MissingColumn, ParseError
from .kdeshift import Density2D


@dataclass
class AnalysisReport:
    tool_version: str
    analysis: str
    input_digest: dict
    parameters: dict
    results: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "analysis": self.analysis,
            "input": self.input_digest,
            "parameters": self.parameters,
            "results": self.results,
            "warnings": list(self.warnings),
        }


def _read_rows(path) -> tuple[list[str], list[list[str]], bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(0, None, "file is not valid UTF-8") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ParseError(0, None, "missing header row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    return header, body, raw


def _col(header: Sequence[str], name: str) -> int:
    try:
        return list(header).index(name)
    except ValueError:
        raise MissingColumn(name) from None


def _cell(row: list[str], j: int, i: int, name: str) -> str:
    if j >= len(row):
        raise ParseError(i, name, "row is too short")
    return row[j].strip()


def _float(text: str, i: int, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(i, name, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(i, name, f"non-finite value {text!r}")
    return v


def _date(text: str, i: int, name: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(i, name, f"not an ISO date: {text!r}") from None


def digest(path, raw: bytes, header: Sequence[str], n_rows: int, dates: Sequence[dt.date] = ()) -> dict:
    return {
        "file": os.path.basename(str(path)),
        "sha256": hashlib.sha256(raw).hexdigest(),
        "rows": n_rows,
        "columns": list(header),
        "date_range": [min(dates).isoformat(), max(dates).isoformat()] if dates else None,
    }


def load_series_csv(path, value_col: str, date_col: str | None = None, with_digest: bool = False):
    """Values in row order; with ``date_col`` the rows must be consecutive days."""
    header, body, raw = _read_rows(path)
    vj = _col(header, value_col)
    dj = _col(header, date_col) if date_col else None
    values, dates = [], []
    for i, row in enumerate(body, start=1):
        values.append(_float(_cell(row, vj, i, value_col), i, value_col))
        if dj is not None:
            d = _date(_cell(row, dj, i, date_col), i, date_col)
            if dates:
                step = (d - dates[-1]).days
                if step > 1:
                    raise DateGap(dates[-1] + dt.timedelta(days=1))
                if step < 1:
                    raise ParseError(i, date_col, f"date {d} does not follow {dates[-1]}")
            dates.append(d)
    series = make_series(values, start_date=dates[0] if dates else None, label=value_col)
    if with_digest:
        return series, digest(path, raw, header, len(body), dates)
    return series


@dataclass
class EventTable:
    records: list[EventRecord]
    levels: dict[str, list[str]]
    columns: list[str]
    warnings: list[str]
    digest: dict

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def load_events_csv(
    path,
    date_col: str = "date",
    x_col: str | None = "x",
    y_col: str | None = "y",
    attributes: Sequence[str] | None = None,
    weight_col: str | None = None,
) -> EventTable:
    """One event per row.

    Coordinates are optional: if either coordinate column is absent from the
    header, events carry no location. Unless ``attributes`` is given, every
    other column is a categorical attribute; empty cells are left out.
    """
    header, body, raw = _read_rows(path)
    dj = _col(header, date_col)
    has_xy = x_col is not None and y_col is not None and x_col in header and y_col in header
    xj = _col(header, x_col) if has_xy else None
    yj = _col(header, y_col) if has_xy else None
    wj = _col(header, weight_col) if weight_col else None
    reserved = {date_col, weight_col} | ({x_col, y_col} if has_xy else set())
    if attributes is None:
        attributes = [h for h in header if h not in reserved]
    attr_idx = [(a, _col(header, a)) for a in attributes]

    records, dates = [], []
    warnings = []
    for i, row in enumerate(body, start=1):
        d = _date(_cell(row, dj, i, date_col), i, date_col)
        loc = None
        if has_xy:
            xs, ys = _cell(row, xj, i, x_col), _cell(row, yj, i, y_col)
            if xs and ys:
                loc = (_float(xs, i, x_col), _float(ys, i, y_col))
            elif xs or ys:
                raise ParseError(i, x_col if not xs else y_col, "only one coordinate given")
        attrs = {}
        for a, j in attr_idx:
            v = row[j].strip() if j < len(row) else ""
            if v:
                attrs[a] = v
        w = 1.0
        if wj is not None:
            w = _float(_cell(row, wj, i, weight_col), i, weight_col)
            if w <= 0:
                raise ParseError(i, weight_col, "weight must be positive")
        records.append(EventRecord(d, loc, attrs, w))
        dates.append(d)
    if not records:
        warnings.append(f"{os.path.basename(str(path))} has a header but no rows")
    levels = {a: sorted({r.attributes[a] for r in records if a in r.attributes}) for a in attributes}
    return EventTable(records, levels, list(header), warnings, digest(path, raw, header, len(body), dates))


def _parse_time(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _parse_lockdown(text: str, i: int, name: str) -> int:
    low = text.lower()
    if low in ("1", "true", "yes", "1.0"):
        return 1
    if low in ("0", "false", "no", "0.0"):
        return 0
    raise ParseError(i, name, f"lockdown must be 0/1, got {text!r}")


def load_did_csv(path, y: str, time: str, lockdown: str, x: str, x_numeric: bool = False):
    """DID records plus the input digest."""
    header, body, raw = _read_rows(path)
    js = {name: _col(header, name) for name in (y, time, lockdown, x)}
    out = []
    for i, row in enumerate(body, start=1):
        xv: Any = _cell(row, js[x], i, x)
        if x_numeric:
            xv = _float(xv, i, x)
        elif not xv:
            raise ParseError(i, x, "empty covariate")
        out.append(
            DidRecord(
                _float(_cell(row, js[y], i, y), i, y),
                _parse_time(_cell(row, js[time], i, time)),
                _parse_lockdown(_cell(row, js[lockdown], i, lockdown), i, lockdown),
                xv,
            )
        )
    return out, digest(path, raw, header, len(body))


def _canon(obj) -> str:
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (dt.date,)):
        return '"' + obj.isoformat() + '"'
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(_canon(k) + ":" + _canon(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """Sorted keys, 17 significant digits, non-finite floats as null, trailing newline."""
    return _canon(obj) + "\n"


def emit_report(report: AnalysisReport | dict, path) -> None:
    payload = report.to_dict() if isinstance(report, AnalysisReport) else report
    text = dumps_canonical(payload)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_density_csv(path, before: Density2D, after: Density2D) -> None:
    """Plot-ready rows ``x, y, f_before, f_after``."""
    if before.grid != after.grid:
        raise InputError("densities must share a grid")
    xs, ys = before.grid.xs, before.grid.ys
    lines = ["x,y,f_before,f_after"]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            lines.append(
                f"{x:.17g},{y:.17g},{before.values[i, j]:.17g},{after.values[i, j]:.17g}"
            )
    _write_lines(path, lines)


def write_series_csv(path, series: TimeSeries, breaks: Sequence[int]) -> None:
    """Series with segment ids and break markers, one row per time step."""
    bset = set(breaks)
    lines = ["t,date,value,segment,is_break"]
    seg = 0
    for t in range(1, series.T + 1):
        if t in bset:
            seg += 1
        d = series.date_of(t)
        lines.append(f"{t},{d.isoformat() if d else ''},{series.at(t):.17g},{seg},{int(t in bset)}")
    _write_lines(path, lines)


def _write_lines(path, lines: list[str]) -> None:
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_events_csv(path, events: Sequence[EventRecord], attributes: Sequence[str]) -> None:
    """Inverse of :func:`load_events_csv` for located events (used by the demo scripts)."""
    lines = [",".join(["date", "x", "y", *attributes])]
    for e in events:
        x, y = e.location if e.location is not None else ("", "")
        xs = f"{x:.17g}" if x != "" else ""
        ys = f"{y:.17g}" if y != "" else ""
        lines.append(",".join([e.date.isoformat(), xs, ys, *(e.attributes.get(a, "") for a in attributes)]))
    _write_lines(path, lines)
