"""Parameter sweeps behind the figure commands.

Sweeps run each delta independently; with ``workers > 1`` they go to a
process pool, and results are always returned in parameter order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from .blowup import RunRequest, classify_run
from .export import trajectory_table
from .integrator import IntegratorOptions

FIGURES = {
    "tau1": (1.0, (0.01, 0.1, 1.0, 5.0)),
    "tau02": (0.2, (2.0, 3.0)),
    "tau001": (0.01, (13.7, 13.73, 13.74, 13.75, 13.8, 13.9)),
}
DIAGRAM_TAU = (0.01, 8.0)
DIAGRAM_N = (-5, 5)
DIAGRAM_OMEGA_WINDOW = (-12.0, 12.0)  # plot only; the CSV keeps every point
TAU001_BRACKET = (13.0, 14.5)


def run_case(req: RunRequest, opts: IntegratorOptions) -> dict:
    """Run one request and return plain data (picklable across processes)."""
    traj = req.run(opts)
    rep = classify_run(traj, opts)
    header, rows = trajectory_table(traj, req.form)
    return {
        "request": asdict(req),
        "report": rep.to_dict(),
        "header": header,
        "rows": rows,
        "knot_gap": traj.max_knot_gap(),
    }


def _task(args):
    req, opts = args
    return run_case(req, opts)


def sweep(requests, opts: IntegratorOptions, workers: int = 1) -> list[dict]:
    requests = sorted(requests, key=lambda r: (r.tau, r.delta))
    jobs = [(r, opts) for r in requests]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_task, jobs))
    return [_task(j) for j in jobs]


def radius_curve(result: dict, max_points: int = 4000):
    """(t, r) columns of a sweep result, thinned for plotting."""
    header = result["header"]
    arr = np.asarray(result["rows"], float)
    t = arr[:, header.index("t")]
    r = arr[:, header.index("r")]
    if len(t) > max_points:
        idx = np.unique(np.linspace(0, len(t) - 1, max_points).astype(int))
        t, r = t[idx], r[idx]
    return t, r


def is_monotone_split(classes: list[str]) -> bool:
    """True if, in parameter order, no bounded run follows a blow-up."""
    seen_blowup = False
    for c in classes:
        if c == "blow-up":
            seen_blowup = True
        elif seen_blowup:
            return False
    return True
