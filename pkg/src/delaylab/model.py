"""Planar delayed oscillator: right-hand sides, coordinate maps and histories.

The Cartesian model is

    x' = x - y - x(t - tau) * (x^2 + y^2)
    y' = x + y - y(t - tau) * (x^2 + y^2)

and with ``tau = 0`` it reduces to the classical system whose unit circle is a
globally attracting limit cycle.  States are plain tuples of floats so the
integrator can stay allocation-light; the named tuples below are only used at
API boundaries.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi

ENDPOINT_TOL = 1e-9


class CartesianState(NamedTuple):
    x: float
    y: float


class PolarState(NamedTuple):
    r: float
    theta: float  # unwrapped, never reduced mod 2*pi


@dataclass(frozen=True)
class ModelParams:
    """Delay ``tau`` and history amplitude ``delta``.

    ``delta = 0`` is accepted so the linear part of the stage-1 system can be
    exercised on its own; everything built from the constructed history needs
    ``delta > 0``.
    """

    tau: float
    delta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0.0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta!r}")

    @property
    def tau_prime(self) -> float:
        return self.tau / 2.0


# --------------------------------------------------------------------------
# right-hand sides


def cartesian_rhs(params: ModelParams, current: Sequence[float], delayed: Sequence[float]):
    x, y = current
    xd, yd = delayed
    r2 = x * x + y * y
    return (x - y - xd * r2, x + y - yd * r2)


def polar_rhs(params: ModelParams, current: Sequence[float], delayed: Sequence[float]):
    r, th = current
    rd, thd = delayed
    rrd = r * rd
    lag = th - thd
    return (r * (1.0 - rrd * math.cos(lag)), 1.0 + rrd * math.sin(lag))


def stage1_ode_rhs(params: ModelParams, current: Sequence[float]):
    """Delay-free system valid while the delayed state sits at (-delta, -delta).

    Evaluated exactly as :func:`cartesian_rhs` with that delayed state, so the
    two agree bit for bit.
    """
    return cartesian_rhs(params, current, (-params.delta, -params.delta))


def stage1_polar_rhs(params: ModelParams, current: Sequence[float]):
    r, th = current
    d = params.delta
    return (
        r + SQRT2 * d * r * r * math.sin(th + math.pi / 4.0),
        1.0 + SQRT2 * d * r * math.sin(th + 3.0 * math.pi / 4.0),
    )


def polar_nondelay_rhs(current: Sequence[float]):
    """Polar system with ``tau = 0``: r' = r(1 - r^2), theta' = 1."""
    r = current[0]
    return (r * (1.0 - r * r), 1.0)


# closures in the (t, y, y_delayed) / (t, y) form the integrator expects


def cartesian_system(params: ModelParams):
    def rhs(t, y, yd):
        return cartesian_rhs(params, y, yd)

    return rhs


def polar_system(params: ModelParams):
    def rhs(t, y, yd):
        return polar_rhs(params, y, yd)

    return rhs


def stage1_system(params: ModelParams):
    def rhs(t, y):
        return stage1_ode_rhs(params, y)

    return rhs


def stage1_polar_system(params: ModelParams):
    def rhs(t, y):
        return stage1_polar_rhs(params, y)

    return rhs


def nondelay_polar_system():
    def rhs(t, y):
        return polar_nondelay_rhs(y)

    return rhs


# --------------------------------------------------------------------------
# coordinates


def to_polar(state: Sequence[float], theta_hint: float = 0.0) -> PolarState:
    """Radius and the branch of atan2(y, x) nearest ``theta_hint``."""
    x, y = state
    if x == 0.0 and y == 0.0:
        raise ValueError("polar angle undefined at origin")
    th = math.atan2(y, x)
    th += TWO_PI * round((theta_hint - th) / TWO_PI)
    return PolarState(math.hypot(x, y), th)


def to_cartesian(state: Sequence[float]) -> CartesianState:
    r, th = state
    if r < 0.0:
        raise ValueError(f"radius must be >= 0, got {r!r}")
    return CartesianState(r * math.cos(th), r * math.sin(th))


def polar_radius(y: Sequence[float]) -> float:
    return abs(y[0])


def cartesian_radius(y: Sequence[float]) -> float:
    return math.hypot(y[0], y[1])


# --------------------------------------------------------------------------
# histories


class HistoryFunction:
    """Piecewise vector function on ``[-tau, 0]``.

    ``breakpoints`` are ``b_0 = -tau < b_1 < ... < b_m = 0`` and piece ``i``
    covers ``[b_i, b_{i+1}]``; at an interior breakpoint the left piece is used.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        pieces: Sequence[Callable[[float], Sequence[float]]],
        continuous: bool = True,
        continuity_tol: float = ENDPOINT_TOL,
    ):
        bps = tuple(float(b) for b in breakpoints)
        if len(bps) < 2:
            raise ValueError("history needs at least two breakpoints")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise ValueError("history breakpoints must be strictly increasing")
        if bps[-1] != 0.0:
            raise ValueError("history must end at t = 0")
        if len(pieces) != len(bps) - 1:
            raise ValueError("need exactly one piece per sub-interval")
        self.breakpoints = bps
        self.pieces = tuple(pieces)
        self.continuous = continuous
        self.continuity_tol = continuity_tol
        if continuous:
            for i, b in enumerate(bps[1:-1], start=1):
                left = self.pieces[i - 1](b)
                right = self.pieces[i](b)
                gap = max(abs(a - c) for a, c in zip(left, right))
                if gap > continuity_tol:
                    raise ValueError(f"history discontinuous at t={b} (jump {gap:.3g})")

    @property
    def tau(self) -> float:
        return -self.breakpoints[0]

    @property
    def span(self) -> tuple[float, float]:
        return (self.breakpoints[0], 0.0)

    def __call__(self, t: float) -> tuple:
        bps = self.breakpoints
        if t < bps[0] or t > 0.0:
            raise ValueError(f"t={t} outside history span [{bps[0]}, 0]")
        i = bisect_left(bps, t) - 1
        i = min(max(i, 0), len(self.pieces) - 1)
        return tuple(self.pieces[i](t))

    def map(self, fn: Callable[[tuple], Sequence[float]]) -> "HistoryFunction":
        """Pointwise transform, keeping the breakpoint structure."""

        def wrap(piece):
            return lambda t: tuple(fn(tuple(piece(t))))

        return HistoryFunction(
            self.breakpoints,
            [wrap(p) for p in self.pieces],
            continuous=self.continuous,
            continuity_tol=self.continuity_tol,
        )


def constant_history(value: Sequence[float], tau: float) -> HistoryFunction:
    v = tuple(float(c) for c in value)
    return HistoryFunction((-tau, 0.0), [lambda t: v])


def linear_phi_tilde(params: ModelParams) -> Callable[[float], float]:
    d, tau = params.delta, params.tau
    return lambda t: 2.0 * d * t / tau


PHI_TILDE_PRESETS = {"linear": linear_phi_tilde}


def theorem1_history(
    params: ModelParams,
    phi_tilde: str | Callable[[float], float] = "linear",
    tol: float = ENDPOINT_TOL,
) -> HistoryFunction:
    """Constructed Cartesian history for the blow-up construction.

    phi(t) = -delta on [-tau, -tau/2], phi_tilde(t) on (-tau/2, 0], and
    psi(t) = -delta throughout, so the start state is (0, -delta).
    """
    if params.tau <= 0.0:
        raise ValueError("theorem-1 history requires tau > 0")
    if isinstance(phi_tilde, str):
        try:
            phi_tilde = PHI_TILDE_PRESETS[phi_tilde](params)
        except KeyError:
            raise ValueError(f"unknown phi_tilde preset {phi_tilde!r}") from None
    d, tau, tp = params.delta, params.tau, params.tau_prime
    left = phi_tilde(-tp)
    if abs(left + d) > tol:
        raise ValueError(f"phi_tilde(-tau') = {left!r}, expected -delta = {-d!r}")
    right = phi_tilde(0.0)
    if abs(right) > tol:
        raise ValueError(f"phi_tilde(0) = {right!r}, expected 0")

    flat = (-d, -d)
    pt = phi_tilde
    return HistoryFunction(
        (-tau, -tp, 0.0),
        [lambda t: flat, lambda t: (pt(t), -d)],
        continuous=True,
        continuity_tol=tol,
    )


def theorem1_polar_history(
    params: ModelParams, phi_tilde: str | Callable[[float], float] = "linear"
) -> HistoryFunction:
    """Polar form of :func:`theorem1_history` on the branch theta in [-3pi/4, -pi/2]."""
    return theorem1_history(params, phi_tilde).map(lambda s: to_polar(s, -math.pi / 2.0))


def nondelay_exact_radius(r0: float, t: float) -> float:
    """Closed-form radius of r' = r(1 - r^2)."""
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    e = math.exp(-2.0 * t)
    return r0 / math.sqrt(e + r0 * r0 * (1.0 - e))
