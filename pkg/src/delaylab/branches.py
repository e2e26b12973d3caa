"""Constant-radius periodic solutions and their branches.

A periodic solution r(t) = r, theta(t) = omega*t solves

    1 = r^2 cos(omega tau),   omega = 1 + r^2 sin(omega tau),

which reduces to omega = 1 + tan(omega tau), i.e. tau = k_n(omega) with

    k_n(omega) = (arctan(omega - 1) + 2 n pi) / omega,

and r^4 = omega^2 - 2 omega + 2.  Every integer n contributes a branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import HistoryFunction

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
ROOT_TOL = 1e-13
WINDOW_MARGIN = 1e-9
SCAN_RANGE = (1e-6, 1e6)
SCAN_NODES = 10_000


def k_n(omega: float, n: int) -> float:
    if omega == 0:
        raise ValueError("k_n is undefined at omega = 0")
    return (math.atan(omega - 1.0) + TWO_PI * n) / omega


def k0_prime(omega: float) -> float:
    if omega == 0:
        raise ValueError("k_0' is undefined at omega = 0")
    return (1.0 / (1.0 + (omega - 1.0) ** 2) - math.atan(omega - 1.0) / omega) / omega


def radius_from_omega(omega: float) -> float:
    return (omega * omega - 2.0 * omega + 2.0) ** 0.25


@dataclass(frozen=True)
class EquilibriumPoint:
    n: int
    omega: float
    r: float
    tau: float

    @property
    def r4tau(self) -> float:
        """r^4 tau; equals 1 at the fold of the n = 0 branch."""
        return self.r**4 * self.tau

    def residuals(self) -> tuple[float, float]:
        return equilibrium_residual(self)

    def relation_residual(self) -> float:
        w = self.omega
        return self.r**4 - (w * w - 2.0 * w + 2.0)


def equilibrium_residual(point: EquilibriumPoint) -> tuple[float, float]:
    r2 = point.r * point.r
    wt = point.omega * point.tau
    return (1.0 - r2 * math.cos(wt), point.omega - 1.0 - r2 * math.sin(wt))


def in_window(omega: float, tau: float, n: int, margin: float = WINDOW_MARGIN) -> bool:
    """omega*tau in (-pi/2, pi/2) + 2 n pi, with a safety margin."""
    phase = omega * tau - TWO_PI * n
    return -HALF_PI + margin < phase < HALF_PI - margin


def _point(n: int, omega: float, tau: float) -> EquilibriumPoint:
    return EquilibriumPoint(n, omega, radius_from_omega(omega), tau)


def _solve(g, a: float, b: float) -> float:
    """Root of g in [a, b] (sign change assumed): bisection, then secant polish."""
    ga, gb = g(a), g(b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    for _ in range(400):
        m = 0.5 * (a + b)
        if m <= min(a, b) or m >= max(a, b):
            break
        gm = g(m)
        if gm == 0:
            return m
        if (gm < 0) == (ga < 0):
            a, ga = m, gm
        else:
            b, gb = m, gm
        if abs(gm) < ROOT_TOL:
            break
    best, gbest = (a, ga) if abs(ga) <= abs(gb) else (b, gb)
    lo, hi = min(a, b), max(a, b)
    x0, g0, x1, g1 = a, ga, b, gb
    for _ in range(8):
        if g1 == g0:
            break
        x2 = x1 - g1 * (x1 - x0) / (g1 - g0)
        if not (lo <= x2 <= hi):
            break
        g2 = g(x2)
        if abs(g2) < abs(gbest):
            best, gbest = x2, g2
        if g2 == 0:
            break
        x0, g0, x1, g1 = x1, g1, x2, g2
    return best


def _window_root(tau: float, n: int) -> float:
    """The single root of k_n = tau on a monotone branch (n != 0, or n = 0 with omega < 0)."""
    g = lambda w: k_n(w, n) - tau  # noqa: E731
    if n >= 1:
        a, b = (TWO_PI * n - HALF_PI) / tau, (TWO_PI * n + HALF_PI) / tau
    else:
        a, b = (TWO_PI * n - HALF_PI) / tau, (TWO_PI * n - 0.25 * math.pi) / tau
    return _solve(g, a, b)


def _positive_n0_roots(tau: float) -> list[float]:
    g = lambda w: k_n(w, 0) - tau  # noqa: E731
    grid = np.geomspace(*SCAN_RANGE, SCAN_NODES)
    vals = [g(float(w)) for w in grid]
    roots = []
    for i in range(len(grid) - 1):
        va, vb = vals[i], vals[i + 1]
        if va == 0:
            roots.append(float(grid[i]))
        elif (va < 0) != (vb < 0) and vb != 0:
            roots.append(_solve(g, float(grid[i]), float(grid[i + 1])))
    if vals[-1] == 0:
        roots.append(float(grid[-1]))
    return roots


def solve_branch(tau: float, n: int) -> list[EquilibriumPoint]:
    """All equilibria on branch ``n`` at delay ``tau``, sorted by omega.

    Nonzero branches have exactly one root.  Branch 0 has one root with
    omega < 0 and up to two with omega > 1 (none above the fold of k_0).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if n != 0:
        omegas = [_window_root(tau, n)]
    else:
        omegas = [_window_root(tau, 0)] + _positive_n0_roots(tau)
    pts = [_point(n, w, tau) for w in omegas if in_window(w, tau, n)]
    return sorted(pts, key=lambda p: p.omega)


def enumerate_equilibria(tau: float, n_max: int) -> list[EquilibriumPoint]:
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    pts = []
    for n in range(-n_max, n_max + 1):
        pts.extend(solve_branch(tau, n))
    return sorted(pts, key=lambda p: p.omega)


def k0_maximum(tol: float = 1e-12) -> tuple[float, float]:
    """Fold of the n = 0 branch: (omega*, tau*) with k_0'(omega*) = 0."""
    a, b = 2.0, 3.0  # k0' > 0 at 2, < 0 at 3
    while b - a > tol:
        m = 0.5 * (a + b)
        if k0_prime(m) > 0:
            a = m
        else:
            b = m
    w = 0.5 * (a + b)
    return w, k_n(w, 0)


def origin_branch_point(tau: float) -> EquilibriumPoint | None:
    """The n = 0 equilibrium on the branch leaving (tau, omega) = (0, 1)."""
    w_star, _ = k0_maximum()
    cands = [p for p in solve_branch(tau, 0) if 1.0 < p.omega <= w_star]
    return cands[0] if cands else None


# --------------------------------------------------------------------------
# diagram


@dataclass
class BranchSample:
    n: int
    label: str
    points: list = field(default_factory=list)  # (tau, omega, r) triples

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(-1, 3)


def _pieces(n: int, tau_lo: float, tau_hi: float) -> list[tuple[str, float, float]]:
    """Monotone omega-intervals of branch n whose tau lies in [tau_lo, tau_hi]."""
    if n >= 1:
        return [("decreasing", _window_root(tau_hi, n), _window_root(tau_lo, n))]
    if n <= -1:
        return [("increasing", _window_root(tau_lo, n), _window_root(tau_hi, n))]
    out = [("negative", _window_root(tau_lo, 0), _window_root(tau_hi, 0))]
    w_star, t_star = k0_maximum()
    if tau_lo >= t_star:
        return out
    lo_roots = [w for w in _positive_n0_roots(tau_lo) if w > 1.0]
    rise_start, fall_end = lo_roots[0], lo_roots[-1]
    if tau_hi < t_star:
        hi_roots = [w for w in _positive_n0_roots(tau_hi) if w > 1.0]
        rise_end, fall_start = hi_roots[0], hi_roots[-1]
    else:
        rise_end = fall_start = w_star
    out.append(("rising", rise_start, rise_end))
    out.append(("falling", fall_start, fall_end))
    return out


def bifurcation_diagram(
    tau_range: tuple[float, float], n_range: tuple[int, int], samples: int = 400
) -> list[BranchSample]:
    """Branches sampled in omega (tau = k_n(omega) exactly), one entry per monotone piece."""
    tau_lo, tau_hi = map(float, tau_range)
    if not 0 < tau_lo < tau_hi:
        raise ValueError("tau_range must satisfy 0 < lo < hi")
    out = []
    for n in range(n_range[0], n_range[1] + 1):
        for label, wa, wb in _pieces(n, tau_lo, tau_hi):
            sign = 1.0 if wa > 0 else -1.0
            ws = sign * np.geomspace(abs(wa), abs(wb), samples)
            pts = []
            for w in ws:
                w = float(w)
                t = k_n(w, n)
                if tau_lo * (1 - 1e-12) <= t <= tau_hi * (1 + 1e-12) and in_window(w, t, n):
                    pts.append((t, w, radius_from_omega(w)))
            pts.sort(key=lambda p: p[1])
            out.append(BranchSample(n, label, pts))
    return out


def periodic_seed_history(point: EquilibriumPoint) -> HistoryFunction:
    """Polar history r = const, theta = omega*t on [-tau, 0]."""
    r, w = point.r, point.omega
    return HistoryFunction((-point.tau, 0.0), [lambda t: (r, w * t)])
