"""Dormand-Prince 5(4) integration with dense output, for ODEs and constant-delay DDEs.

The delayed system is advanced by the method of steps: inside a step the
delayed argument ``t - tau`` always lands in the history or in an already
accepted segment, because steps never cross the propagated breakpoints
``k*tau + b``.  States are tuples of floats; everything here is dimension
generic.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .model import HistoryFunction

COMPLETED = "completed"
BLOW_UP = "blow-up"
STEP_FLOOR = "step-floor"
NON_FINITE = "non-finite"

STATUS_MESSAGES = {
    COMPLETED: "reached end of interval",
    BLOW_UP: "blow-up suspected",
    STEP_FLOOR: "step floor reached",
    NON_FINITE: "non-finite derivative",
}

# Dormand & Prince (1980) pair; dense output after Hairer, Norsett & Wanner.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# embedded fourth-order weights
BH1, BH3, BH4, BH5, BH6, BH7 = (
    5179 / 57600, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40,
)
E1, E3, E4, E5, E6, E7 = B1 - BH1, B3 - BH3, B4 - BH4, B5 - BH5, B6 - BH6, -BH7
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

ORDER = 5
SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 5.0
# PI controller exponents (Gustafsson): alpha = 0.7/(p+1), beta = 0.4/(p+1)
PI_ALPHA, PI_BETA = 0.7 / ORDER, 0.4 / ORDER
KNOT_TOL = 1e-12


class IntegrationError(RuntimeError):
    """Raised when a run cannot be used (bad setup or a numerical failure)."""


class OutOfSpanError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    h_init: Optional[float] = None
    h_min: float = 1e-12
    h_max: float = math.inf
    r_max: float = 1e8
    t_horizon: float = 100.0
    breakpoint_times: tuple = ()
    # fixed-step mode (no error control); used by convergence studies
    fixed_step: Optional[float] = None
    # "high" advances the 5th-order solution; "low" the embedded 4th-order one
    propagate: str = "high"
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not self.t_horizon > 0:
            raise ValueError("t_horizon must be positive")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ValueError("fixed_step must be positive")
        if self.propagate not in ("high", "low"):
            raise ValueError("propagate must be 'high' or 'low'")

    def with_(self, **changes) -> "IntegratorOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class EventSpec:
    observable: Callable[[float, tuple], float]
    direction: str = "any"  # "rising" | "falling" | "any"
    name: str = "event"

    def __post_init__(self):
        if self.direction not in ("rising", "falling", "any"):
            raise ValueError(f"bad direction {self.direction!r}")


class Trajectory:
    """Piecewise-polynomial solution built step by step.

    ``knots[i]`` to ``knots[i+1]`` is covered by a quartic continuous
    extension.  With a history attached, times in ``[-tau, knots[0])`` are
    answered by the history.
    """

    def __init__(self, t0: float, y0: Sequence[float], history: HistoryFunction | None = None):
        self.knots = [float(t0)]
        self.states = [tuple(float(v) for v in y0)]
        self._coef = []
        self.history = history
        self.dim = len(self.states[0])
        self.status = COMPLETED
        self.message = STATUS_MESSAGES[COMPLETED]
        self.stats = {"n_steps": 0, "n_rejected": 0, "n_rhs": 0}
        self.rejected_radius = None
        self.radius = _radius_default

    # -- construction -------------------------------------------------------
    def _append(self, t1: float, y1: tuple, coef: tuple) -> None:
        self.knots.append(t1)
        self.states.append(y1)
        self._coef.append(coef)

    # -- queries ------------------------------------------------------------
    @property
    def t_start(self) -> float:
        return self.history.breakpoints[0] if self.history is not None else self.knots[0]

    @property
    def t_end(self) -> float:
        return self.knots[-1]

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.knots)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.states)

    def __len__(self) -> int:
        return len(self.knots)

    def __call__(self, t: float) -> tuple:
        knots = self.knots
        if t < knots[0]:
            if self.history is not None and t >= self.history.breakpoints[0]:
                return self.history(t)
            raise OutOfSpanError(f"t={t} before trajectory start {self.t_start}")
        if t > knots[-1]:
            raise OutOfSpanError(f"t={t} beyond trajectory end {knots[-1]}")
        i = bisect_right(knots, t) - 1
        if i == len(knots) - 1:
            return self.states[i]
        return self._segment_eval(i, t)

    def _segment_eval(self, i: int, t: float) -> tuple:
        t0 = self.knots[i]
        s = (t - t0) / (self.knots[i + 1] - t0)
        s1 = 1.0 - s
        return tuple(a + s * (b + s1 * (c + s * (d + s1 * e))) for a, b, c, d, e in self._coef[i])

    def radii(self) -> np.ndarray:
        """Radius at every knot, measured the way the run measured it."""
        return np.array([self.radius(s) for s in self.states])

    def sample(self, ts) -> np.ndarray:
        return np.array([self(float(t)) for t in ts])

    def segment_end_value(self, i: int) -> tuple:
        """Left limit of segment ``i`` at its right knot."""
        return tuple(a + b for a, b, _c, _d, _e in self._coef[i])

    def max_knot_gap(self) -> float:
        """Largest mismatch between adjacent segments at shared knots."""
        gap = 0.0
        for i in range(len(self._coef)):
            left = self.segment_end_value(i)
            right = self.states[i + 1]
            gap = max(gap, max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(left, right)))
        return gap

    @property
    def ok(self) -> bool:
        return self.status == COMPLETED


def dense_eval(traj: Trajectory, t: float) -> tuple:
    return traj(t)


# --------------------------------------------------------------------------
# stepping


def _norm(v, scale):
    return math.sqrt(sum((a / s) ** 2 for a, s in zip(v, scale)) / len(v))


def _initial_step(f, t0, y0, f0, opts, h_cap):
    scale = [opts.abs_tol + opts.rel_tol * abs(a) for a in y0]
    d0 = _norm(y0, scale)
    d1 = _norm(f0, scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, h_cap)
    y1 = [a + h0 * b for a, b in zip(y0, f0)]
    f1 = f(t0 + h0, y1)
    d2 = _norm([a - b for a, b in zip(f1, f0)], scale) / h0
    if not math.isfinite(d2):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
    return min(100 * h0, h1, h_cap)


def _radius_default(y):
    return math.sqrt(sum(a * a for a in y))


def _run(
    f: Callable,
    traj: Trajectory,
    t_end: float,
    opts: IntegratorOptions,
    breakpoints: Sequence[float],
    radius: Callable,
) -> Trajectory:
    t = traj.knots[-1]
    y = traj.states[-1]
    stats = traj.stats
    traj.radius = radius

    stops = sorted({float(b) for b in breakpoints if t < b < t_end})
    stops.append(t_end)
    j = 0

    k1 = f(t, y)
    stats["n_rhs"] += 1
    if not all(map(math.isfinite, k1)):
        traj.status, traj.message = NON_FINITE, STATUS_MESSAGES[NON_FINITE]
        return traj
    if radius(y) >= opts.r_max:
        traj.status, traj.message = BLOW_UP, STATUS_MESSAGES[BLOW_UP]
        return traj

    fixed = opts.fixed_step
    low = opts.propagate == "low"
    rtol, atol = opts.rel_tol, opts.abs_tol
    if fixed is not None:
        h = fixed
    elif opts.h_init is not None:
        h = opts.h_init
    else:
        h = _initial_step(f, t, y, k1, opts, min(stops[0] - t, opts.h_max))
        stats["n_rhs"] += 1
    h = min(h, opts.h_max)
    err_prev = 1e-4
    rejected_last = False
    n_total = 0

    while True:
        n_total += 1
        if n_total > opts.max_steps:
            traj.status, traj.message = STEP_FLOOR, "maximum step count exceeded"
            return traj
        stop = stops[j]
        if t + 1.05 * h >= stop:
            hs = stop - t
            hit = True
        else:
            hs = h
            hit = False
        t_new = stop if hit else t + hs

        k2 = f(t + C2 * hs, [a + hs * (A21 * b) for a, b in zip(y, k1)])
        k3 = f(t + C3 * hs, [a + hs * (A31 * b + A32 * c) for a, b, c in zip(y, k1, k2)])
        k4 = f(
            t + C4 * hs,
            [a + hs * (A41 * b + A42 * c + A43 * d) for a, b, c, d in zip(y, k1, k2, k3)],
        )
        k5 = f(
            t + C5 * hs,
            [
                a + hs * (A51 * b + A52 * c + A53 * d + A54 * e)
                for a, b, c, d, e in zip(y, k1, k2, k3, k4)
            ],
        )
        k6 = f(
            t_new,
            [
                a + hs * (A61 * b + A62 * c + A63 * d + A64 * e + A65 * g)
                for a, b, c, d, e, g in zip(y, k1, k2, k3, k4, k5)
            ],
        )
        y5 = tuple(
            a + hs * (B1 * b + B3 * d + B4 * e + B5 * g + B6 * q)
            for a, b, d, e, g, q in zip(y, k1, k3, k4, k5, k6)
        )
        k7 = f(t_new, y5)
        stats["n_rhs"] += 6

        if fixed is not None:
            err = 0.0
            accept = True
        else:
            ev = [
                hs * (E1 * b + E3 * d + E4 * e + E5 * g + E6 * q + E7 * w)
                for b, d, e, g, q, w in zip(k1, k3, k4, k5, k6, k7)
            ]
            scale = [atol + rtol * max(abs(a), abs(b)) for a, b in zip(y, y5)]
            err = _norm(ev, scale)
            if not math.isfinite(err):
                err = math.inf
            accept = err <= 1.0

        if accept:
            if low:
                y_next = tuple(
                    a + hs * (BH1 * b + BH3 * d + BH4 * e + BH5 * g + BH6 * q + BH7 * w)
                    for a, b, d, e, g, q, w in zip(y, k1, k3, k4, k5, k6, k7)
                )
                k7 = f(t_new, y_next)
                stats["n_rhs"] += 1
            else:
                y_next = y5
            if not (all(map(math.isfinite, y_next)) and all(map(math.isfinite, k7))):
                traj.status, traj.message = NON_FINITE, STATUS_MESSAGES[NON_FINITE]
                return traj
            coef = tuple(
                (
                    a,
                    ba,
                    hs * p - ba,
                    ba - hs * w - (hs * p - ba),
                    hs * (D1 * p + D3 * d + D4 * e + D5 * g + D6 * q + D7 * w),
                )
                for a, ba, p, d, e, g, q, w in zip(
                    y, [b - a for a, b in zip(y, y_next)], k1, k3, k4, k5, k6, k7
                )
            )
            traj._append(t_new, y_next, coef)
            stats["n_steps"] += 1
            t, y, k1 = t_new, y_next, k7

            if radius(y) >= opts.r_max:
                traj.status, traj.message = BLOW_UP, STATUS_MESSAGES[BLOW_UP]
                return traj
            if hit:
                j += 1
                if j == len(stops):
                    return traj
                # right-hand derivative after a derivative discontinuity
                k1 = f(t, y)
                stats["n_rhs"] += 1

            if fixed is not None:
                continue
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** (-PI_ALPHA) * err_prev ** PI_BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            h_next = hs * fac
            if hit:
                # a step shortened to land on a breakpoint says little about the scale
                h_next = max(h_next, h)
            h = min(h_next, opts.h_max)
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            stats["n_rejected"] += 1
            trial_r = radius(y5)
            traj.rejected_radius = trial_r if math.isfinite(trial_r) else math.inf
            fac = FAC_MIN if err == math.inf else max(FAC_MIN, SAFETY * err ** (-1.0 / ORDER))
            h = hs * fac
            rejected_last = True
            if h < opts.h_min:
                if traj.rejected_radius >= opts.r_max:
                    traj.status, traj.message = BLOW_UP, STATUS_MESSAGES[BLOW_UP]
                else:
                    traj.status, traj.message = STEP_FLOOR, STATUS_MESSAGES[STEP_FLOOR]
                return traj


def integrate_ode(
    rhs: Callable[[float, tuple], Sequence[float]],
    initial: Sequence[float],
    t_span: tuple[float, float],
    opts: IntegratorOptions | None = None,
    radius: Callable | None = None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span`` (clipped to ``opts.t_horizon``)."""
    opts = opts or IntegratorOptions()
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    t1 = min(t1, t0 + opts.t_horizon)
    traj = Trajectory(t0, initial)

    def f(t, y):
        return rhs(t, y)

    return _run(f, traj, t1, opts, opts.breakpoint_times, radius or _radius_default)


def dde_breakpoints(history: HistoryFunction, tau: float, t_end: float, extra=()) -> list:
    """Images ``k*tau + b`` of the history breakpoints inside ``(0, t_end)``."""
    pts = set()
    kmax = int(math.ceil(t_end / tau)) + 1
    for k in range(1, kmax + 1):
        base = k * tau
        for b in history.breakpoints:
            s = base + b
            if 0.0 < s < t_end:
                pts.add(s)
    pts.update(float(e) for e in extra if 0.0 < e < t_end)
    merged = []
    for s in sorted(pts):
        if merged and s - merged[-1] <= 4e-16 * max(1.0, s):
            continue
        merged.append(s)
    return merged


def integrate_dde(
    rhs: Callable[[float, tuple, tuple], Sequence[float]],
    history: HistoryFunction,
    tau: float,
    t_end: float,
    opts: IntegratorOptions | None = None,
    radius: Callable | None = None,
) -> Trajectory:
    """Method of steps for ``y'(t) = rhs(t, y(t), y(t - tau))``."""
    opts = opts or IntegratorOptions()
    if not tau > 0:
        raise ValueError("integrate_dde needs tau > 0; use integrate_ode for tau = 0")
    if abs(history.tau - tau) > 1e-12 * max(1.0, tau):
        raise IntegrationError(
            f"history span mismatch: history covers [{-history.tau}, 0], tau={tau}"
        )
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    t_end = min(float(t_end), opts.t_horizon)

    traj = Trajectory(0.0, history(0.0), history=history)
    knots = traj.knots
    hist_start = history.breakpoints[0]

    def f(t, y):
        td = t - tau
        if td <= 0.0:
            yd = history(td if td >= hist_start else hist_start)
        else:
            end = knots[-1]
            if td > end:
                if td - end > KNOT_TOL * max(1.0, abs(t)):
                    raise AssertionError(
                        f"delayed time {td} inside the unfinished step (accepted up to {end})"
                    )
                td = end
            yd = traj(td)
        return rhs(t, y, yd)

    bps = dde_breakpoints(history, tau, t_end, opts.breakpoint_times)
    return _run(f, traj, t_end, opts, bps, radius or _radius_default)


# --------------------------------------------------------------------------
# events


def find_event(traj: Trajectory, spec: EventSpec, search_from: float | None = None) -> float | None:
    """Earliest crossing of ``spec.observable`` through zero after ``search_from``."""
    g = spec.observable
    t_a = traj.knots[0] if search_from is None else float(search_from)
    if t_a > traj.t_end:
        return None
    g_a = g(t_a, traj(t_a))
    start = bisect_right(traj.knots, t_a)
    for i in range(start, len(traj.knots)):
        t_b = traj.knots[i]
        g_b = g(t_b, traj.states[i])
        if _crosses(g_a, g_b, spec.direction):
            if g_b == 0.0:
                return t_b
            return _bisect_event(traj, g, t_a, t_b, g_a)
        t_a, g_a = t_b, g_b
    return None


def _crosses(g_a, g_b, direction):
    rising = g_a < 0.0 <= g_b
    falling = g_a > 0.0 >= g_b
    if direction == "rising":
        return rising
    if direction == "falling":
        return falling
    return rising or falling


def _bisect_event(traj, g, lo, hi, g_lo, tol=1e-12):
    neg_lo = g_lo < 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = g(mid, traj(mid))
        if g_mid == 0.0:
            return mid
        if (g_mid < 0.0) == neg_lo:
            lo = mid
        else:
            hi = mid
    return hi


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    problem: str
    steps: list
    errors: dict = field(default_factory=dict)  # kind -> list of errors per step size
    ratios: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)

    def min_order(self, kind: str) -> float:
        return min(self.orders[kind])


def _oracle_problem(name: str):
    from .model import nondelay_exact_radius, nondelay_polar_system

    if name == "nondelay-polar":
        r0 = 0.1
        t1 = 5.0

        def exact(t):
            return np.array([nondelay_exact_radius(r0, t), t])

        return nondelay_polar_system(), (r0, 0.0), (0.0, t1), exact
    if name == "linear":

        def exact(t):
            return np.array([math.exp(t)])

        return (lambda t, y: (y[0],)), (1.0,), (0.0, 1.0), exact
    raise ValueError(f"unknown oracle problem {name!r}")


def convergence_study(problem: str, steps: Sequence[float]) -> ConvergenceReport:
    """Fixed-step errors for a problem with a closed-form solution.

    Reports three error series: the advancing 5th-order solution at the end
    point ("endpoint"), the embedded 4th-order member advanced on its own
    ("embedded"), and the dense interpolant at step midpoints ("dense").
    """
    rhs, y0, span, exact = _oracle_problem(problem)
    rep = ConvergenceReport(problem, [float(h) for h in steps])
    kinds = {"endpoint": [], "embedded": [], "dense": []}
    for h in rep.steps:
        base = IntegratorOptions(fixed_step=h, t_horizon=span[1] - span[0] + 1.0)
        tr = integrate_ode(rhs, y0, span, base)
        kinds["endpoint"].append(float(np.max(np.abs(np.asarray(tr.states[-1]) - exact(tr.t_end)))))
        mids = 0.5 * (tr.t[:-1] + tr.t[1:])
        kinds["dense"].append(
            float(max(np.max(np.abs(np.asarray(tr(m)) - exact(m))) for m in mids))
        )
        tl = integrate_ode(rhs, y0, span, base.with_(propagate="low"))
        kinds["embedded"].append(float(np.max(np.abs(np.asarray(tl.states[-1]) - exact(tl.t_end)))))
    for kind, errs in kinds.items():
        rep.errors[kind] = errs
        rep.ratios[kind] = [a / b for a, b in zip(errs, errs[1:])]
        rep.orders[kind] = [math.log2(r) for r in rep.ratios[kind]]
    return rep
