"""Reading (date, value) series and writing artifacts with a config echo."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DomainError


class InputError(DomainError):
    """Malformed input file; messages carry the file and line number."""


@dataclass(frozen=True)
class Series:
    dates: tuple[str, ...]
    values: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return len(self.dates)


def read_series(path, mode: str = "prices") -> Series:
    """Read a two-column (date, value) CSV and return daily losses.

    ``prices`` mode turns prices into percent losses ``-100 * diff(log P)``,
    dated by the later day; ``losses`` mode passes values through. A
    non-numeric first row is taken as a header.
    """
    if mode not in ("prices", "losses"):
        raise DomainError(f"mode must be 'prices' or 'losses', got {mode!r}")
    path = Path(path)
    dates: list[str] = []
    vals: list[float] = []
    prev = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise InputError(f"{path}:{lineno}: expected 'date,value', got {row!r}")
            d, v = row[0].strip(), row[1].strip()
            try:
                value = float(v)
            except ValueError:
                if not dates and prev is None:
                    prev = "header"
                    continue
                raise InputError(f"{path}:{lineno}: cannot parse value {v!r}") from None
            try:
                day = dt.date.fromisoformat(d)
            except ValueError:
                raise InputError(f"{path}:{lineno}: cannot parse ISO-8601 date {d!r}") from None
            if not math.isfinite(value):
                raise InputError(f"{path}:{lineno}: non-finite value {v!r}")
            if mode == "prices" and value <= 0:
                raise InputError(f"{path}:{lineno}: price must be positive, got {value}")
            if isinstance(prev, dt.date) and day <= prev:
                raise InputError(f"{path}:{lineno}: date {d} does not follow {prev.isoformat()}")
            prev = day
            dates.append(day.isoformat())
            vals.append(value)
    if not dates:
        raise InputError(f"{path}: no data rows")
    arr = np.array(vals)
    if mode == "prices":
        if arr.size < 2:
            raise InputError(f"{path}: need at least two prices")
        return Series(tuple(dates[1:]), -100.0 * np.diff(np.log(arr)), str(path))
    return Series(tuple(dates), arr, str(path))


@dataclass(frozen=True)
class JoinedSeries:
    dates: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    dropped_x: int
    dropped_y: int


def inner_join(a: Series, b: Series) -> JoinedSeries:
    """Keep only dates present in both series, reporting how many were dropped."""
    index_b = {d: i for i, d in enumerate(b.dates)}
    ia, ib = [], []
    for i, d in enumerate(a.dates):
        j = index_b.get(d)
        if j is not None:
            ia.append(i)
            ib.append(j)
    if not ia:
        raise InputError(f"{a.source} and {b.source} share no dates")
    return JoinedSeries(
        tuple(a.dates[i] for i in ia), a.values[ia], b.values[ib],
        len(a) - len(ia), len(b) - len(ib),
    )


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "value"):
        return o.value
    return repr(o)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=True)


def fmt(v) -> str:
    """Full-precision, locale-independent number formatting."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, config: dict) -> Path:
    """CSV whose first line is ``# config: <json>`` echoing the resolved run."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# config: " + json.dumps(config, default=_json_default, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path, payload: dict, config: dict) -> Path:
    path = Path(path)
    path.write_text(dumps({"config": config, **payload}) + "\n")
    return path


def read_forecast_csv(path) -> dict[str, np.ndarray]:
    """Columns of a forecast table written by the ``forecast`` command."""
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    cols: dict[str, list] = {}
    for row in reader:
        for k, v in row.items():
            cols.setdefault(k, []).append(v)
    need = {"date", "var_i", "covar_s_given_i", "realized_x_i", "realized_x_s"}
    if not need <= set(cols):
        raise InputError(f"{path}: forecast table needs columns {sorted(need)}")
    out = {"date": np.array(cols["date"])}
    for k in ("var_i", "covar_s_given_i", "realized_x_i", "realized_x_s"):
        out[k] = np.array(cols[k], dtype=float)
    out["valid"] = (np.array([v.lower() == "true" for v in cols["valid"]])
                    if "valid" in cols else np.ones(out["var_i"].size, bool))
    return out
