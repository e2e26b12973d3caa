import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from delaylab.branches import (
    EquilibriumPoint,
    bifurcation_diagram,
    enumerate_equilibria,
    equilibrium_residual,
    in_window,
    k0_maximum,
    k0_prime,
    k_n,
    origin_branch_point,
    periodic_seed_history,
    radius_from_omega,
    solve_branch,
)


def _assert_valid(p, tol=1e-10):
    # absolute below r^4 ~ 1; beyond that r^4 itself carries ulp-sized rounding
    scale = max(1.0, p.r**4)
    r1, r2 = equilibrium_residual(p)
    assert abs(r1) < tol and abs(r2) < tol * max(1.0, abs(p.omega))
    assert abs(p.relation_residual()) < tol * scale
    # (theta' - 1)^2 + 1 = r^4 with theta' = omega
    assert abs((p.omega - 1) ** 2 + 1 - p.r**4) < tol * max(1.0, p.r**4)


def test_k_n_examples():
    assert k_n(1.0, 0) == 0.0
    assert k_n(2.0, 0) == pytest.approx(math.pi / 8, rel=1e-15)
    assert k_n(1.0, 1) == pytest.approx(2 * math.pi, rel=1e-15)
    with pytest.raises(ValueError):
        k_n(0.0, 1)
    with pytest.raises(ValueError):
        k0_prime(0.0)


def test_radius_examples():
    assert radius_from_omega(1.0) == 1.0
    assert radius_from_omega(2.0) == pytest.approx(2**0.25, rel=1e-15)
    assert radius_from_omega(0.0) == pytest.approx(2**0.25, rel=1e-15)
    assert radius_from_omega(2.0) == pytest.approx(1.18921, abs=1e-5)


@pytest.mark.parametrize("w", [0.5, 2.0, 5.0])
def test_k0_prime_finite_difference(w):
    h = 1e-5
    fd = (k_n(w + h, 0) - k_n(w - h, 0)) / (2 * h)
    assert abs(k0_prime(w) - fd) < 1e-8


def test_k0_prime_signs():
    assert k0_prime(1.0) == 1.0
    assert k0_prime(3.0) < 0


def test_k0_maximum():
    w, t = k0_maximum()
    assert 2 < w < 3
    assert w == pytest.approx(2.23, abs=5e-3)
    assert t == pytest.approx(0.398, abs=5e-4)
    assert w == pytest.approx(2.2291336422217682, abs=1e-11)
    assert t == pytest.approx(0.3982842693609939, rel=1e-12)
    assert abs(radius_from_omega(w) ** 4 * t - 1) < 1e-8
    assert abs(k0_prime(w)) < 1e-10


def test_no_rising_root_above_fold():
    _, t_star = k0_maximum()
    for tau in (t_star * 1.01, 1.0, 5.0):
        assert [p for p in solve_branch(tau, 0) if p.omega > 1] == []
        assert origin_branch_point(tau) is None


def test_solve_branch_examples():
    pts = solve_branch(2 * math.pi, 1)
    assert len(pts) == 1
    assert pts[0].omega == pytest.approx(1.0, abs=1e-12)
    assert pts[0].r == pytest.approx(1.0, abs=1e-12)
    (p,) = solve_branch(1.0, 1)
    assert 2 * math.pi - math.pi / 2 < p.omega < 2 * math.pi + math.pi / 2
    _assert_valid(p)


def test_solve_branch_matches_bisection_oracle():
    # omega = 1 + tan(omega) inside (3pi/2, 5pi/2), solved independently
    g = lambda w: w - 1 - math.tan(w)  # noqa: E731
    a, b = 1.5 * math.pi + 1e-9, 2.5 * math.pi - 1e-9
    for _ in range(200):
        m = 0.5 * (a + b)
        if (g(m) > 0) == (g(a) > 0):
            a = m
        else:
            b = m
    (p,) = solve_branch(1.0, 1)
    assert p.omega == pytest.approx(0.5 * (a + b), abs=1e-10)
    assert p.omega == pytest.approx(7.705951184345996, abs=1e-10)


@pytest.mark.parametrize("tau", [0.05, 0.2, 1.0, 3.0])
def test_negative_branch_has_one_negative_root(tau):
    pts = solve_branch(tau, -1)
    assert len(pts) == 1 and pts[0].omega < 0
    _assert_valid(pts[0])


def test_branch_zero_roots_at_tau02():
    pts = solve_branch(0.2, 0)
    assert len(pts) == 3
    assert pts[0].omega < 0 < 1 < pts[1].omega < pts[2].omega
    for p in pts:
        _assert_valid(p)


def test_enumerate_examples():
    pts = enumerate_equilibria(1.0, 3)
    assert len(pts) >= 6
    for p in pts:
        _assert_valid(p)
    pts = enumerate_equilibria(0.2, 1)
    origin = [p for p in pts if p.n == 0 and 1.0 < p.omega < 1.5]
    assert len(origin) == 1
    assert origin[0].omega == pytest.approx(1.2567886843052982, abs=1e-10)
    with pytest.raises(ValueError):
        enumerate_equilibria(1.0, -1)
    with pytest.raises(ValueError):
        solve_branch(0.0, 1)


def test_residual_examples():
    assert equilibrium_residual(EquilibriumPoint(0, 1.0, 1.0, 0.0)) == (0.0, 0.0)
    (p,) = solve_branch(1.0, 2)
    bumped = EquilibriumPoint(p.n, p.omega + 0.1, p.r, p.tau)
    assert max(map(abs, equilibrium_residual(bumped))) > 1e-3


@given(w=st.floats(0.02, 500.0), n=st.integers(1, 6))
def test_round_trip_positive(w, n):
    tau = k_n(w, n)
    assume(in_window(w, tau, n, margin=1e-6))
    (p,) = solve_branch(tau, n)
    assert p.omega == pytest.approx(w, rel=1e-9)


@given(w=st.floats(-500.0, -0.02), n=st.integers(-6, 0))
def test_round_trip_negative(w, n):
    tau = k_n(w, n)
    assume(tau > 0 and in_window(w, tau, n, margin=1e-6))
    pts = [p for p in solve_branch(tau, n) if p.omega < 0]
    assert len(pts) == 1
    assert pts[0].omega == pytest.approx(w, rel=1e-9)


@given(w=st.floats(1.001, 1e4))
def test_round_trip_branch_zero(w):
    w_star, _ = k0_maximum()
    # the two positive roots merge at the fold, where omega(tau) is ill-conditioned
    assume(abs(w - w_star) > 0.05)
    tau = k_n(w, 0)
    assume(tau > 1e-5)
    near = min(solve_branch(tau, 0), key=lambda p: abs(p.omega - w))
    assert near.omega == pytest.approx(w, rel=1e-9)


@given(n=st.integers(1, 8))
def test_branch_monotone_and_limits(n):
    ws = np.geomspace(1e-3, 1e6, 2000)
    ks = np.array([k_n(float(w), n) for w in ws])
    assert np.all(np.diff(ks) < 0)
    assert abs(k_n(1e6, n)) < 1e-4
    ks_neg = np.array([k_n(-float(w), -n) for w in ws])
    assert np.all(np.diff(ks_neg) < 0)  # increasing in omega as omega runs from -1e-3 to -1e6 reversed
    assert abs(k_n(-1e6, -n)) < 1e-4


@given(tau=st.floats(0.01, 8.0))
def test_every_point_valid(tau):
    for p in enumerate_equilibria(tau, 2):
        _assert_valid(p)
        assert p.r4tau == pytest.approx(p.r**4 * tau)


def test_diagram():
    branches = bifurcation_diagram((0.01, 8.0), (-5, 5), samples=200)
    labels = {(b.n, b.label) for b in branches}
    assert (0, "rising") in labels and (1, "decreasing") in labels and (-1, "increasing") in labels
    for b in branches:
        arr = b.as_array()
        assert len(arr) > 10
        for t, w, r in arr[:: max(1, len(arr) // 20)]:
            _assert_valid(EquilibriumPoint(b.n, w, r, t))
    rising = next(b for b in branches if b.n == 0 and b.label == "rising").as_array()
    # passes close to (tau, omega) = (0, 1)
    i = np.argmin(rising[:, 0])
    assert rising[i, 0] < 0.02 and abs(rising[i, 1] - 1) < 0.05
    one = next(b for b in branches if b.n == 1).as_array()
    assert np.all(np.diff(one[:, 0]) < 0)  # tau decreasing as omega increases
    with pytest.raises(ValueError):
        bifurcation_diagram((0.0, 1.0), (0, 1))


def test_seed_history(origin_point):
    h = periodic_seed_history(origin_point)
    w, tau = origin_point.omega, origin_point.tau
    for t in np.linspace(-tau, 0.0, 11):
        assert h(t) == (origin_point.r, w * t)
    assert h(0.0)[1] - h(-tau)[1] == pytest.approx(w * tau, rel=1e-15)
