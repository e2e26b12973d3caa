"""Blow-up classification, blow-up time extrapolation and the stage-1 estimates.

A run counts as a blow-up when the integrator's radius guard trips.  The
blow-up time is then extrapolated from the tail of ``1/r``, which decays
linearly in time just before the singularity (r' > delta r^2 there).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import model
from .integrator import (
    BLOW_UP,
    COMPLETED,
    EventSpec,
    IntegrationError,
    IntegratorOptions,
    Trajectory,
    find_event,
    integrate_dde,
    integrate_ode,
)
from .model import SQRT2, ModelParams

BLOWUP = "blow-up"
BOUNDED = "bounded"
HORIZON = "horizon-reached"

TAIL_WINDOW = 20.0
MIN_TAIL_POINTS = 4


class InsufficientTailData(ValueError):
    pass


class BracketError(ValueError):
    pass


def alpha_constant() -> float:
    """Lower-bound factor for r at theta = -pi/4 in the stage-1 system."""
    return ((2.0 - SQRT2) / (2.0 + SQRT2)) ** (1.0 / (2.0 * SQRT2))


@dataclass(frozen=True)
class ThetaEquilibria:
    exists: bool
    theta_s: Optional[float] = None
    theta_u: Optional[float] = None


def theta_equilibria(delta: float, r: float) -> ThetaEquilibria:
    """Zeros of theta' = 1 + sqrt(2) delta r sin(theta + 3pi/4) for frozen r.

    ``theta_s`` (stable) lies in (pi/4, 3pi/4) and ``theta_u`` in (3pi/4, 5pi/4).
    """
    if delta <= 0 or r <= 0:
        raise ValueError("delta and r must be positive")
    s = 1.0 / (SQRT2 * delta * r)
    if s >= 1.0:
        return ThetaEquilibria(False)
    a = math.asin(s)
    return ThetaEquilibria(True, math.pi / 4.0 + a, 5.0 * math.pi / 4.0 - a)


# --------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class RunRequest:
    """One simulation of the model.

    With ``tau > 0`` the constructed blow-up history is used; ``tau = 0``
    integrates the delay-free system from radius ``r0`` on the positive x-axis.
    """

    tau: float
    delta: float = 1.0
    phi_tilde: str = "linear"
    form: str = "cartesian"  # or "polar"
    r0: Optional[float] = None
    t_end: Optional[float] = None

    def __post_init__(self):
        if self.form not in ("cartesian", "polar"):
            raise ValueError(f"unknown model form {self.form!r}")
        if self.tau == 0 and self.r0 is None:
            raise ValueError("tau = 0 runs need r0")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.tau, self.delta)

    def run(self, opts: IntegratorOptions | None = None) -> Trajectory:
        opts = opts or IntegratorOptions()
        t_end = opts.t_horizon if self.t_end is None else self.t_end
        p = self.params
        polar = self.form == "polar"
        radius = model.polar_radius if polar else model.cartesian_radius
        if self.tau == 0:
            if polar:
                return integrate_ode(
                    model.nondelay_polar_system(), (self.r0, 0.0), (0.0, t_end), opts, radius
                )
            rhs = model.cartesian_system(p)
            return integrate_ode(
                lambda t, y: rhs(t, y, y), (self.r0, 0.0), (0.0, t_end), opts, radius
            )
        if polar:
            hist = model.theorem1_polar_history(p, self.phi_tilde)
            return integrate_dde(model.polar_system(p), hist, p.tau, t_end, opts, radius)
        hist = model.theorem1_history(p, self.phi_tilde)
        return integrate_dde(model.cartesian_system(p), hist, p.tau, t_end, opts, radius)


@dataclass
class BlowupReport:
    classification: str
    T_est: Optional[float]
    r_last: float
    t_stop: float
    extrapolation_points: int
    status: str
    tail_r_mean: Optional[float] = None
    tail_r_std: Optional[float] = None
    tail_r_max: Optional[float] = None
    n_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _tail_fit(traj: Trajectory, r_max: float):
    r = traj.radii()
    t = traj.t
    mask = (r >= r_max / 100.0) & (r <= r_max)
    # trailing run of qualifying knots only
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        raise InsufficientTailData("insufficient tail data")
    last = idx[-1]
    first = last
    while first - 1 >= 0 and mask[first - 1]:
        first -= 1
    tt, rr = t[first : last + 1], r[first : last + 1]
    if len(tt) < MIN_TAIL_POINTS:
        raise InsufficientTailData("insufficient tail data")
    slope, intercept = np.polyfit(tt, 1.0 / rr, 1)
    if slope >= 0:
        return traj.t_end, len(tt)
    T = -intercept / slope
    return max(float(T), traj.t_end), len(tt)


def estimate_blowup_time(traj: Trajectory, r_max: float = 1e8) -> float:
    """Zero crossing of a least-squares line through the tail of 1/r(t)."""
    return _tail_fit(traj, r_max)[0]


def _tail_stats(traj: Trajectory, window: float, n: int = 2001):
    t1 = traj.t_end
    t0 = max(traj.knots[0], t1 - window)
    ts = np.linspace(t0, t1, n)
    r = np.array([traj.radius(traj(float(s))) for s in ts])
    return float(r.mean()), float(r.std()), float(r.max())


def classify_run(
    run: Trajectory | RunRequest,
    opts: IntegratorOptions | None = None,
    window: float = TAIL_WINDOW,
) -> BlowupReport:
    opts = opts or IntegratorOptions()
    traj = run.run(opts) if isinstance(run, RunRequest) else run
    r_last = float(traj.radius(traj.states[-1]))
    base = dict(
        r_last=r_last,
        t_stop=traj.t_end,
        status=traj.status,
        n_steps=traj.stats["n_steps"],
    )
    if traj.status == BLOW_UP:
        try:
            T, npts = _tail_fit(traj, opts.r_max)
        except InsufficientTailData:
            T, npts = traj.t_end, 0
        return BlowupReport(BLOWUP, T, extrapolation_points=npts, **base)
    if traj.status != COMPLETED:
        raise IntegrationError(f"{traj.message} at t={traj.t_end:.17g}")
    mean, std, rmax = _tail_stats(traj, window)
    reached = traj.t_end >= traj.knots[0] + opts.t_horizon * (1 - 1e-12)
    cls = BOUNDED if (reached and rmax < opts.r_max / 10.0) else HORIZON
    return BlowupReport(
        cls, None, extrapolation_points=0, tail_r_mean=mean, tail_r_std=std, tail_r_max=rmax, **base
    )


# --------------------------------------------------------------------------
# stage-1 estimates


PASS, FAIL, NA = "pass", "fail", "n/a"


@dataclass
class Check:
    name: str
    status: str
    value: Optional[float] = None
    bound: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass
class BoundsReport:
    delta: float
    tau: float
    tau_prime: float
    alpha_delta: float
    t_quarter: Optional[float]
    r_at_quarter: Optional[float]
    t_zero: Optional[float]
    r_at_zero: Optional[float]
    T_est: Optional[float]
    classification: str
    checks: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_passed"] = self.all_passed
        return d


def _leq(name, value, bound):
    if value is None:
        return Check(name, FAIL, None, bound)
    return Check(name, PASS if value <= bound else FAIL, value, bound)


def verify_theorem1_bounds(
    delta: float,
    tau: float,
    opts: IntegratorOptions | None = None,
    phi_tilde: str = "linear",
    trajectory: Trajectory | None = None,
) -> BoundsReport:
    """Run the constructed history (polar form) and test each stage estimate.

    Checks: ``quarter_time`` t_{-pi/4} <= tau'/2, ``quarter_radius``
    r(t_{-pi/4}) >= alpha*delta, ``step1_time`` t_0 - t_{-pi/4} <= tau'/4,
    ``blowup_before_tau_prime`` T < tau', ``below_stable_angle`` theta below
    theta*_s(r) on (t_{-pi/4}, min(t_stop, tau')], and ``comparison_blowup``
    T <= t_0 + 1/(delta r(t_0)) + 1e-3.
    """
    opts = opts or IntegratorOptions()
    req = RunRequest(tau, delta, phi_tilde, form="polar")
    traj = trajectory if trajectory is not None else req.run(opts)
    blow = classify_run(traj, opts)
    tp = tau / 2.0
    ad = alpha_constant() * delta

    tq = find_event(traj, EventSpec(lambda t, s: s[1] + math.pi / 4.0, "rising", "t_quarter"), 0.0)
    rq = traj(tq)[0] if tq is not None else None
    t0 = (
        find_event(traj, EventSpec(lambda t, s: s[1], "rising", "t_zero"), tq)
        if tq is not None
        else None
    )
    r0 = traj(t0)[0] if t0 is not None else None
    T = blow.T_est if blow.classification == BLOWUP else None

    checks = [
        _leq("quarter_time", tq, tp / 2.0),
        Check("quarter_radius", FAIL if rq is None else (PASS if rq >= ad else FAIL), rq, ad),
        _leq("step1_time", None if (t0 is None or tq is None) else t0 - tq, tp / 4.0),
    ]
    if T is None:
        checks.append(Check("blowup_before_tau_prime", NA, None, tp))
    else:
        checks.append(_leq("blowup_before_tau_prime", T, tp))

    if tq is None:
        checks.append(Check("below_stable_angle", FAIL))
    else:
        t_hi = min(traj.t_end, tp)
        worst = None
        ok = True
        for t, (r, th) in zip(traj.knots, traj.states):
            if t <= tq or t > t_hi:
                continue
            eq = theta_equilibria(delta, r)
            if not eq.exists:
                ok = False
                break
            gap = th - eq.theta_s
            worst = gap if worst is None else max(worst, gap)
        if ok and worst is None:
            checks.append(Check("below_stable_angle", NA, None, 0.0))
        else:
            status = PASS if ok and worst < 0 else FAIL
            checks.append(Check("below_stable_angle", status, worst, 0.0))

    if T is None or t0 is None:
        checks.append(Check("comparison_blowup", NA if T is None else FAIL))
    else:
        checks.append(_leq("comparison_blowup", T, t0 + 1.0 / (delta * r0) + 1e-3))

    return BoundsReport(
        delta=delta,
        tau=tau,
        tau_prime=tp,
        alpha_delta=ad,
        t_quarter=tq,
        r_at_quarter=rq,
        t_zero=t0,
        r_at_zero=r0,
        T_est=T,
        classification=blow.classification,
        checks=checks,
    )


# --------------------------------------------------------------------------
# threshold search


@dataclass
class ThresholdResult:
    tau: float
    lo: float
    hi: float
    probes: list  # dicts sorted by delta

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_search(
    tau: float,
    delta_lo: float,
    delta_hi: float,
    opts: IntegratorOptions | None = None,
    tol: float = 0.01,
    phi_tilde: str = "linear",
    form: str = "cartesian",
    classify: Callable[[RunRequest], BlowupReport] | None = None,
) -> ThresholdResult:
    """Bisect on delta between a bounded and a blowing-up run.

    Probes that end "horizon-reached" count as non-blow-up.
    """
    opts = opts or IntegratorOptions()
    if not delta_lo < delta_hi:
        raise BracketError(f"bracket invalid: need lo < hi, got [{delta_lo}, {delta_hi}]")
    classify = classify or (lambda req: classify_run(req, opts))
    probes = []

    def probe(d):
        rep = classify(RunRequest(tau, d, phi_tilde, form))
        probes.append({"delta": d, "classification": rep.classification, "T_est": rep.T_est})
        return rep.classification

    c_lo, c_hi = probe(delta_lo), probe(delta_hi)
    if c_lo != BOUNDED or c_hi != BLOWUP:
        raise BracketError(
            f"bracket invalid: delta={delta_lo} is {c_lo}, delta={delta_hi} is {c_hi}"
        )
    lo, hi = delta_lo, delta_hi
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if probe(mid) == BLOWUP:
            hi = mid
        else:
            lo = mid
    probes.sort(key=lambda p: p["delta"])
    return ThresholdResult(tau, lo, hi, probes)
