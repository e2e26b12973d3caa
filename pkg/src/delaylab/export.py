"""CSV / JSON writers and trajectory tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .integrator import Trajectory
from .model import to_polar


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def unwrapped_angles(states, hint: float = 0.0) -> list:
    """Continuous polar angle along a sequence of Cartesian states."""
    out = []
    th = hint
    for s in states:
        if s[0] == 0.0 and s[1] == 0.0:
            out.append(th)
            continue
        th = to_polar(s, th).theta
        out.append(th)
    return out


def trajectory_table(traj: Trajectory, form: str, times=None):
    """Rows of (t, state..., derived...) at the knots or at ``times``."""
    if times is None:
        ts = list(traj.knots)
        states = list(traj.states)
    else:
        ts = [float(t) for t in times]
        states = [traj(t) for t in ts]
    if form == "polar":
        header = ["t", "r", "theta", "x", "y"]
        rows = [(t, r, th, r * math.cos(th), r * math.sin(th)) for t, (r, th) in zip(ts, states)]
    else:
        header = ["t", "x", "y", "r", "theta"]
        hint = math.atan2(states[0][1], states[0][0]) if any(states[0]) else 0.0
        ths = unwrapped_angles(states, hint)
        rows = [(t, x, y, math.hypot(x, y), th) for t, (x, y), th in zip(ts, states, ths)]
    return header, rows
