"""Acceptance suite: one test per criterion, each with its runtime budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from delaylab.blowup import (
    BLOWUP,
    BOUNDED,
    RunRequest,
    alpha_constant,
    classify_run,
    threshold_search,
    verify_theorem1_bounds,
)
from delaylab.branches import (
    enumerate_equilibria,
    equilibrium_residual,
    k0_maximum,
    origin_branch_point,
    periodic_seed_history,
    radius_from_omega,
)
from delaylab.experiments import FIGURES, TAU001_BRACKET, is_monotone_split, sweep
from delaylab.integrator import (
    IntegratorOptions,
    convergence_study,
    integrate_dde,
    integrate_ode,
)
from delaylab.model import (
    ModelParams,
    nondelay_exact_radius,
    nondelay_polar_system,
    polar_radius,
    polar_system,
    stage1_system,
)

RESULTS = {}


@contextmanager
def criterion(num, title, budget):
    RESULTS[num] = (title, "FAIL", None, budget)
    t0 = time.perf_counter()
    yield
    dt = time.perf_counter() - t0
    ok = dt < budget
    RESULTS[num] = (title, "PASS" if ok else "FAIL", dt, budget)
    assert ok, f"criterion {num} took {dt:.3f} s (budget {budget} s)"


def test_c01_equilibrium_residuals():
    with criterion(1, "equilibrium residual suite", 1.0):
        worst = 0.0
        count = 0
        for tau in (0.2, 1.0, 2 * math.pi):
            for p in enumerate_equilibria(tau, 5):
                r1, r2 = equilibrium_residual(p)
                worst = max(worst, abs(r1), abs(r2), abs(p.relation_residual()))
                count += 1
        assert count >= 3 * 10
        assert worst < 1e-10


def test_c02_fold_of_branch_zero():
    with criterion(2, "k0 maximum satisfies r^4 tau = 1", 0.1):
        w, t = k0_maximum()
        assert 2 < w < 3
        assert abs(radius_from_omega(w) ** 4 * t - 1) < 1e-8


def test_c03_integrator_oracle():
    with criterion(3, "delay-free oracle and convergence order", 5.0):
        for r0 in (0.1, 1.0, 2.0):
            tr = integrate_ode(nondelay_polar_system(), (r0, 0.0), (0.0, 10.0))
            ts = np.linspace(0.0, 10.0, 2001)
            err = max(abs(tr(t)[0] - nondelay_exact_radius(r0, t)) for t in ts)
            assert err < 1e-8, (r0, err)
        rep = convergence_study("nondelay-polar", [0.1, 0.05, 0.025, 0.0125])
        # the advancing solution is the 5th-order member
        assert rep.min_order("endpoint") >= 4.0
        # the 4th-order member of the pair shows the ratio 16
        for ratio in rep.ratios["embedded"]:
            assert 16 * 0.8 <= ratio <= 16 * 1.2, rep.ratios
        assert rep.min_order("embedded") >= 4.0 * 0.95


def test_c04_method_of_steps():
    with criterion(4, "DDE equals stage-1 ODE on [0, 0.5]", 2.0):
        d = 5.0
        dde = RunRequest(1.0, d).run()
        ode = integrate_ode(stage1_system(ModelParams(1.0, d)), (0.0, -d), (0.0, 0.5))
        t_hi = min(0.5, dde.t_end, ode.t_end)
        assert t_hi > 0.08
        worst = 0.0
        for t in np.linspace(0.0, t_hi, 1001):
            a, b = np.asarray(dde(t)), np.asarray(ode(t))
            worst = max(worst, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))
        assert worst < 1e-8


def test_c05_stage_estimates():
    with criterion(5, "blow-up estimates at delta=100, tau=1", 2.0):
        rep = verify_theorem1_bounds(100.0, 1.0)
        assert rep.classification == BLOWUP
        assert rep.T_est < 0.5
        assert rep.t_quarter <= 0.25
        ad = ((2 - math.sqrt(2)) / (2 + math.sqrt(2))) ** (1 / (2 * math.sqrt(2))) * 100.0
        assert rep.alpha_delta == pytest.approx(ad, rel=1e-14)
        assert rep.r_at_quarter >= ad
        assert rep.t_zero - rep.t_quarter <= 0.125
        assert rep.T_est <= rep.t_zero + 1.0 / (100.0 * rep.r_at_zero) + 1e-3
        assert rep.all_passed


def test_c06_figure_tau1():
    with criterion(6, "figure tau1: four blow-ups", 10.0):
        tau, deltas = FIGURES["tau1"]
        for d in deltas:
            tr = RunRequest(tau, d).run()
            rep = classify_run(tr)
            assert rep.classification == BLOWUP, d
            r = tr.radii()
            i = int(np.argmin(r))
            assert np.all(np.diff(r[i:]) >= 0), d
            assert r[-1] >= 1e8


def test_c07_figure_tau02():
    with criterion(7, "figure tau02: bounded at 2, blow-up at 3", 10.0):
        b = classify_run(RunRequest(0.2, 2.0))
        assert b.classification == BOUNDED
        assert b.tail_r_std < 1e-3
        u = classify_run(RunRequest(0.2, 3.0))
        assert u.classification == BLOWUP


def test_c08_threshold_bracket():
    with criterion(8, "threshold at tau=0.2 in (2, 3), width < 0.01", 60.0):
        res = threshold_search(0.2, 2.0, 3.0)
        assert 2.0 <= res.lo < res.hi <= 3.0
        assert res.width < 0.01
        for p in res.probes:
            assert p["classification"] == (BLOWUP if p["delta"] >= res.hi else BOUNDED)
        tight = IntegratorOptions(rel_tol=1e-10)
        for p in res.probes:
            again = classify_run(RunRequest(0.2, p["delta"]), tight)
            assert again.classification == p["classification"], p


def test_c09_periodic_seed():
    with criterion(9, "seeded periodic run keeps its radius", 2.0):
        pt = origin_branch_point(0.2)
        assert pt is not None and 1.0 < pt.omega < 2.0
        tr = integrate_dde(polar_system(ModelParams(0.2, 1.0)), periodic_seed_history(pt),
                           0.2, 1.0, radius=polar_radius)
        ts = np.linspace(0.0, 1.0, 1001)
        drift = max(abs(tr(t)[0] - pt.r) for t in ts)
        assert drift < 1e-6


def test_c10_figure_tau001():
    with criterion(10, "figure tau001 sweep and threshold in [13, 14.5]", 60.0):
        tau, deltas = FIGURES["tau001"]
        results = sweep([RunRequest(tau, d) for d in deltas], IntegratorOptions())
        classes = [r["report"]["classification"] for r in results]
        assert all(len(r["rows"]) > 1 for r in results)
        assert is_monotone_split(classes)
        res = threshold_search(tau, *TAU001_BRACKET)
        assert TAU001_BRACKET[0] <= res.lo < res.hi <= TAU001_BRACKET[1]
        # the sweep agrees with the located boundary
        for d, c in zip(deltas, classes):
            if d <= res.lo:
                assert c == BOUNDED
            elif d >= res.hi:
                assert c == BLOWUP
