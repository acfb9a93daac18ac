"""CSV and JSON readers/writers for scenarios, requests, BAU profiles and trajectories."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime
from pathlib import Path

import numpy as np

from .bau import BauProfile
from .domain import FlexibilityRequest, InputError, TimeGrid
from .env import TRAJECTORY_COLUMNS, Trajectory
from .scenario import Scenario

SCENARIO_COLUMNS = ("timestamp", "t_amb_c", "i_solar_wm2", "t_neigh_c", "price_chf_per_kwh")
REQUEST_COLUMNS = ("announced_at", "t_start", "t_end", "phi")


class ParseError(InputError):
    def __init__(self, path, row, column, msg):
        super().__init__(f"{path}: row {row}, column {column!r}: {msg}")
        self.path, self.row, self.column = str(path), row, column


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that reads back identically
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _read_rows(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(path, 1, missing[0], "missing column")
        # line 1 is the header, so data rows start at 2
        return path, [(i, row) for i, row in enumerate(reader, start=2)]


def _number(path, row, col, text, integer=False):
    try:
        v = int(text) if integer else float(text)
    except (TypeError, ValueError):
        raise ParseError(path, row, col, f"not a number: {text!r}") from None
    if not integer and not math.isfinite(v):
        raise ParseError(path, row, col, f"non-finite value {text!r}")
    return v


def load_scenario(path) -> Scenario:
    path, rows = _read_rows(path, SCENARIO_COLUMNS)
    if not rows:
        raise ParseError(path, 2, "timestamp", "no data rows")
    stamps, cols = [], {c: [] for c in SCENARIO_COLUMNS[1:]}
    for line, row in rows:
        try:
            stamps.append(datetime.fromisoformat(row["timestamp"]))
        except (TypeError, ValueError):
            raise ParseError(path, line, "timestamp", f"bad timestamp {row['timestamp']!r}") from None
        for c in cols:
            cols[c].append(_number(path, line, c, row[c]))
    if len(stamps) > 1:
        step = stamps[1] - stamps[0]
        if step.total_seconds() <= 0:
            raise ParseError(path, 3, "timestamp", "timestamps must increase")
        for k in range(2, len(stamps)):
            if stamps[k] - stamps[k - 1] != step:
                raise ParseError(path, rows[k][0], "timestamp", f"spacing differs from {step}")
        minutes = step.total_seconds() / 60
    else:
        minutes = 15
    if minutes != int(minutes):
        raise ParseError(path, 3, "timestamp", "spacing must be a whole number of minutes")
    for c, name in (("i_solar_wm2", "irradiance"), ("price_chf_per_kwh", "price")):
        neg = [k for k, v in enumerate(cols[c]) if v < 0]
        if neg:
            raise ParseError(path, rows[neg[0]][0], c, f"{name} must be non-negative")
    grid = TimeGrid(stamps[0], len(stamps), int(minutes))
    return Scenario(grid, cols["t_amb_c"], cols["i_solar_wm2"], cols["t_neigh_c"], cols["price_chf_per_kwh"])


def save_scenario(scenario: Scenario, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCENARIO_COLUMNS)
        for t in range(scenario.n_steps):
            w.writerow([
                scenario.grid.timestamp(t).isoformat(),
                _fmt(scenario.t_amb[t]), _fmt(scenario.i_solar[t]),
                _fmt(scenario.t_neigh[t]), _fmt(scenario.price[t]),
            ])
    return path


def save_requests(requests, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_COLUMNS)
        for r in requests:
            w.writerow([r.announced_at, r.t_start, r.t_end, _fmt(r.phi)])
    return path


def load_requests(path) -> list[FlexibilityRequest]:
    path, rows = _read_rows(path, REQUEST_COLUMNS)
    out = []
    for line, row in rows:
        vals = {c: _number(path, line, c, row[c], integer=c != "phi") for c in REQUEST_COLUMNS}
        try:
            out.append(FlexibilityRequest(vals["t_start"], vals["t_end"], vals["phi"], vals["announced_at"]))
        except InputError as exc:
            raise ParseError(path, line, "t_start", str(exc)) from None
    return out


def save_bau(profile: BauProfile, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "energy_kwh"))
        for t, e in enumerate(profile.energy):
            w.writerow([t, _fmt(e)])
    return path


def load_bau(path, source: str = "file") -> BauProfile:
    path, rows = _read_rows(path, ("t", "energy_kwh"))
    energy = [_number(path, line, "energy_kwh", row["energy_kwh"]) for line, row in rows]
    for k, (line, _) in enumerate(rows):
        if energy[k] < 0:
            raise ParseError(path, line, "energy_kwh", "energy must be non-negative")
    return BauProfile(np.array(energy), source)


def save_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for rec in traj.records:
            w.writerow([_fmt(rec[c]) for c in TRAJECTORY_COLUMNS])
    return path


_INT_COLUMNS = {"t", "in_window", "window_id"}


def load_trajectory(path, case: str = "", dt: float = 0.25) -> Trajectory:
    path, rows = _read_rows(path, TRAJECTORY_COLUMNS)
    records = []
    for line, row in rows:
        rec = {}
        for c in TRAJECTORY_COLUMNS:
            if c == "timestamp":
                rec[c] = row[c]
            elif c in _INT_COLUMNS:
                rec[c] = _number(path, line, c, row[c], integer=True)
            else:
                try:
                    rec[c] = float(row[c])
                except ValueError:
                    raise ParseError(path, line, c, f"not a number: {row[c]!r}") from None
        records.append(rec)
    return Trajectory(case, records, dt=dt)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
