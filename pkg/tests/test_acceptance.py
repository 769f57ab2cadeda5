"""Acceptance criteria 1-10.  Each test records a PASS/FAIL line shown in the
terminal summary; tolerances are fixed by the criteria, not tuned."""

import csv
import io
import math
import time

import numpy as np
import pytest

from dacratio import (cost_deadbeat_closed_form, cost_optimal_closed_form, cost_simulated,
                      family_sink, optimal_cost_lower_bound, pi_gains, ratio, ratio_bound,
                      reference_to_disturbance, simulate, solve_dare, build_augmented,
                      nilpotent_closed_form, synth_deadbeat, synth_optimal_centralized, synth_pi,
                      synth_theta, solve_for_plant)
from dacratio.cli import main
from plants import constant_disturbance_plant, nilpotent_plant, random_plant, sink_plant

SQRT5 = math.sqrt(5)
GOLDEN_BOUND = (3 + SQRT5) / 2


@pytest.fixture(scope="module")
def plants500():
    rng = np.random.default_rng(20240501)
    return [random_plant(rng, eps=0.5) for _ in range(500)]


# printed closed forms for the two-node worst-case family, used as oracles
def printed_optimal_cost(eps, r):
    s = math.sqrt(4 * eps**2 + 1)
    return (((eps**2 + 1) * s + 5 * eps**2 + 4 * eps**4 + 1) / (2 * eps**2)
            + (2 * eps**2 + s + 1) * s / (2 * eps**2 * r**2))


def printed_deadbeat_cost(eps, r):
    s = math.sqrt(4 * eps**2 + 1)
    e2, e4, e6 = eps**2, eps**4, eps**6
    return ((e2 + 1) * (3 * e2 * s + 5 * e2 + 4 * e4 + s + 1) / (2 * e4)
            + (e2 + 1) * (e2 * s + e4 * s + e2 + 3 * e4 + 2 * e6) / (2 * e4 * r**2))


def _sweep_rows(capsys):
    t0 = time.perf_counter()
    code = main(["sweep", "thm1", "--eps", "1", "--grid", "10,100,1000", "--strategy", "deadbeat"])
    elapsed = time.perf_counter() - t0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    return code, rows, elapsed


# ------------------------------------------------------------------------ 1

def test_c1_ratio_limit(capsys, criterion):
    code, rows, elapsed = _sweep_rows(capsys)
    ratios = [float(r["ratio"]) for r in rows]
    ok = (code == 0 and len(ratios) == 3
          and all(a < b for a, b in zip(ratios, ratios[1:]))
          and all(r <= GOLDEN_BOUND for r in ratios)
          and abs(ratios[-1] - GOLDEN_BOUND) <= 1e-3
          and elapsed < 1.0)
    criterion("1a", ok, f"sweep ratios {ratios}, |r(1000) - bound| = "
                        f"{abs(ratios[-1] - GOLDEN_BOUND):.2e}, {elapsed:.3f}s")
    assert ok


def test_c1_deadbeat_closed_form_matches_printed(capsys, criterion):
    _, rows, _ = _sweep_rows(capsys)
    errs = [abs(float(r["cost"]) - printed_deadbeat_cost(1.0, float(r["r"])))
            / printed_deadbeat_cost(1.0, float(r["r"])) for r in rows]
    ok = max(errs) <= 1e-9
    criterion("1b", ok, f"J_Delta vs printed formula, max rel err {max(errs):.2e} "
                        f"(r=10: {float(rows[0]['cost']):.4f})")
    assert ok


@pytest.mark.xfail(strict=True, reason="printed optimal-cost formula disagrees with the "
                                       "Riccati cost, its simulation and the lower bound")
def test_c1_optimal_closed_form_matches_printed(capsys, criterion):
    _, rows, _ = _sweep_rows(capsys)
    errs = [abs(float(r["cost_opt"]) - printed_optimal_cost(1.0, float(r["r"])))
            / printed_optimal_cost(1.0, float(r["r"])) for r in rows]
    ok = max(errs) <= 1e-9
    criterion("1c", ok, f"J* vs printed formula, max rel err {max(errs):.2e} "
                        f"(r=10: computed {float(rows[0]['cost_opt']):.4f}, printed "
                        f"{printed_optimal_cost(1.0, 10):.4f}); see ledger")
    assert ok


def test_c1_optimal_cost_consistency(capsys, criterion):
    """Supplementary: the computed J* agrees with its independent oracles."""
    from dacratio import family_thm1
    errs = []
    for r in (10.0, 100.0, 1000.0):
        p = family_thm1(1.0, r)
        J = cost_optimal_closed_form(p)
        sim = cost_simulated(p, synth_optimal_centralized(p)).value
        lb = optimal_cost_lower_bound(p)
        exact = SQRT5 + 5 + (2 * SQRT5 + 6) / r**2  # eval of the inner-product form by hand
        errs.append(max(abs(J - sim), abs(J - lb), abs(J - exact)) / J)
    ok = max(errs) <= 1e-9
    criterion("1c+", ok, f"J* = sim = lower bound = sqrt5+5+(2sqrt5+6)/r^2, max rel err "
                         f"{max(errs):.2e}")
    assert ok


# ------------------------------------------------------------------------ 2

def test_c2_ratio_bound_soundness(plants500, criterion):
    bound = ratio_bound(0.5)
    t0 = time.perf_counter()
    worst = max(ratio(p, "deadbeat").ratio for p in plants500)
    elapsed = time.perf_counter() - t0
    ok = worst <= bound + 1e-6 and elapsed < 30.0 and abs(bound - 5.828427124746) < 1e-9
    criterion("2", ok, f"500 plants, worst deadbeat ratio {worst:.6f} <= {bound:.6f}, "
                       f"{elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------------ 3

def test_c3_two_step_nulling(plants500, criterion):
    worst = 0.0
    for p in plants500:
        tr = simulate(p, synth_deadbeat(p), 3)
        tol = 1e-9 * (1 + np.linalg.norm(p.x0) + np.linalg.norm(p.w0))
        m = max(np.linalg.norm(tr.x[2]), np.linalg.norm(tr.x[3]), np.linalg.norm(tr.xi[2]))
        worst = max(worst, m / tol)
    ok = worst <= 1.0
    criterion("3", ok, f"max of |x(2)|,|x(3)|,|xi(2)| over tolerance = {worst:.2e}")
    assert ok


# ------------------------------------------------------------------------ 4

def test_c4_closed_form_vs_simulation(plants500, criterion):
    worst_db = worst_opt = 0.0
    n_conv = 0
    for p in plants500:
        J = cost_deadbeat_closed_form(p)
        sim = cost_simulated(p, synth_deadbeat(p))
        worst_db = max(worst_db, abs(J - sim.value) / (1 + J) / 1e-9)
        Jo = cost_optimal_closed_form(p)
        so = cost_simulated(p, synth_optimal_centralized(p))
        if so.converged:
            n_conv += 1
            worst_opt = max(worst_opt, abs(Jo - so.value) / (1 + Jo) / 1e-6)
    ok = worst_db <= 1.0 and worst_opt <= 1.0 and n_conv > 0
    criterion("4", ok, f"deadbeat err/tol {worst_db:.2e}; optimal err/tol {worst_opt:.2e} "
                       f"on {n_conv}/500 convergent")
    assert ok


# ------------------------------------------------------------------------ 5

def test_c5_dare(plants500, criterion):
    worst_res = max(solve_for_plant(p).residual for p in plants500)
    rng = np.random.default_rng(55)
    worst_nil = 0.0
    for _ in range(200):
        p = nilpotent_plant(rng)
        assert np.allclose(p.A @ p.A, 0.0)
        it = solve_dare(build_augmented(p))
        cf = nilpotent_closed_form(p)
        worst_res = max(worst_res, it.residual, cf.residual)
        worst_nil = max(worst_nil, np.max(np.abs(it.X - cf.X)))
    from dacratio import Plant
    p = Plant([[0, 0], [2, 0]], [1, 1], [1, 1], [0, 0], [1, 0], 1.0)
    it = solve_dare(build_augmented(p))
    running = (np.allclose(it.X22, np.diag([4.0, 2.0]), atol=1e-9)
               and np.allclose(it.G2, [[-1, 0], [-1, -1]], atol=1e-9)
               and abs(cost_optimal_closed_form(p) - 4.0) <= 1e-9)
    ok = worst_res <= 1e-9 and worst_nil <= 1e-8 and running
    criterion("5", ok, f"max residual {worst_res:.2e}; nilpotent |X_iter - X_closed| "
                       f"{worst_nil:.2e}; running instance {'ok' if running else 'MISMATCH'}")
    assert ok


# ------------------------------------------------------------------------ 6

def test_c6_lower_bound(plants500, criterion):
    worst_gap = -math.inf
    for p in plants500:
        worst_gap = max(worst_gap, optimal_cost_lower_bound(p) - cost_optimal_closed_form(p))
    rng = np.random.default_rng(66)
    worst_eq = 0.0
    for _ in range(200):
        p = nilpotent_plant(rng)
        worst_eq = max(worst_eq, abs(optimal_cost_lower_bound(p) - cost_optimal_closed_form(p)))
    from dacratio import Plant
    p = Plant([[0, 0], [2, 0]], [1, 1], [1, 1], [0, 0], [1, 0], 1.0)
    running = (abs(optimal_cost_lower_bound(p) - 4) <= 1e-12
               and abs(cost_optimal_closed_form(p) - 4) <= 1e-12)
    ok = worst_gap <= 1e-8 and worst_eq <= 1e-8 and running
    criterion("6", ok, f"max(bound - J*) {worst_gap:.2e}; nilpotent |bound - J*| {worst_eq:.2e}")
    assert ok


# ------------------------------------------------------------------------ 7

def test_c7_sink_family(criterion):
    p = family_sink(1.0, 1.0)
    theta = cost_simulated(p, synth_theta(p)).value
    dead = cost_deadbeat_closed_form(p)
    r, e = 1.0, 1.0
    printed = (math.sqrt(r**4 + 2 * r**2 * e**2 - 2 * r**2 + e**4 + 2 * e**2 + 1)
               + r**2 + e**2 + 1) / 2
    ok = abs(theta - printed) <= 1e-9 and abs(dead - 3.0) <= 1e-9 and theta < dead
    criterion("7a", ok, f"family_sink(1,1): J(theta) = {theta!r} (printed {printed!r}), "
                        f"J(deadbeat) = {dead!r}")
    assert ok


def _theta_vs_deadbeat(plants):
    excess = [cost_simulated(p, synth_theta(p)).value - cost_deadbeat_closed_form(p)
              for p in plants]
    return sum(e > 1e-9 for e in excess), max(excess)


@pytest.mark.xfail(strict=True, reason="the domination inequality fails for nonzero x0 "
                                       "on sink plants; see ledger")
def test_c7_random_sink_domination(criterion):
    rng = np.random.default_rng(77)
    plants = [sink_plant(rng) for _ in range(200)]
    bad, worst = _theta_vs_deadbeat(plants)
    ok = bad == 0
    criterion("7b", ok, f"200 random sink plants (random x0, w0): {bad} with "
                        f"J(theta) > J(deadbeat) + 1e-9, worst excess {worst:.3e}; see ledger")
    assert ok


def test_c7_random_sink_domination_zero_x0(criterion):
    """Supplementary: the same sample family restricted to x0 = 0."""
    rng = np.random.default_rng(78)
    plants = [sink_plant(rng, zero_x0=True) for _ in range(200)]
    bad, worst = _theta_vs_deadbeat(plants)
    ok = bad == 0
    criterion("7c", ok, f"200 random sink plants with x0 = 0: {bad} violations, "
                        f"max J(theta) - J(deadbeat) = {worst:.3e}")
    assert ok


# ------------------------------------------------------------------------ 8

def test_c8_theta_optimal_without_inner_edges(criterion):
    rng = np.random.default_rng(88)
    worst_mat = worst_ratio = 0.0
    for _ in range(100):
        p = nilpotent_plant(rng)
        kt, ko = synth_theta(p), synth_optimal_centralized(p)
        worst_mat = max(worst_mat, max(np.max(np.abs(a - b)) if a.size else 0.0
                                       for a, b in zip(kt.matrices(), ko.matrices())))
        worst_ratio = max(worst_ratio, abs(ratio(p, "theta").ratio - 1.0))
    ok = worst_mat <= 1e-9 and worst_ratio <= 1e-9
    criterion("8", ok, f"100 plants: max |K_theta - K*_C| {worst_mat:.2e}, "
                       f"max |ratio - 1| {worst_ratio:.2e}")
    assert ok


# ------------------------------------------------------------------------ 9

def _explicit_pi_trajectory(p, horizon):
    Kp, Ki = pi_gains(p)
    x, acc = p.x0.copy(), np.zeros(p.n)
    xs, us = [], []
    for _ in range(horizon + 1):
        acc = acc + x
        u = Kp @ x + Ki @ acc
        xs.append(x)
        us.append(u)
        x = p.A @ x + p.b_diag * (u + p.w0)
    return np.array(xs), np.array(us)


def test_c9_pi_equivalence_and_tracking(criterion):
    rng = np.random.default_rng(99)
    worst_pi = worst_track = worst_orig = 0.0
    for _ in range(100):
        p = constant_disturbance_plant(rng)
        tr = simulate(p, synth_pi(p), 50)
        xs, us = _explicit_pi_trajectory(p, 50)
        scale = 1 + np.linalg.norm(p.x0) + np.linalg.norm(p.w0)
        worst_pi = max(worst_pi, np.max(np.abs(tr.x - xs)) / scale,
                       np.max(np.abs(tr.u - us)) / scale)

        r_ref = rng.standard_normal(p.n)
        q = reference_to_disturbance(p.A, p.b_diag, r_ref, p.x0)
        tq = simulate(q, synth_pi(q), 5)
        sq = 1 + np.linalg.norm(q.x0) + np.linalg.norm(q.w0)
        worst_track = max(worst_track, max(np.linalg.norm(tq.x[k]) for k in range(2, 6)) / sq)

        # the same law run on the undisturbed plant in original coordinates
        Kp, Ki = pi_gains(q)
        x, acc = p.x0.copy(), np.zeros(p.n)
        for k in range(6):
            if k >= 2:
                worst_orig = max(worst_orig, np.linalg.norm(x - r_ref) / sq)
            e = x - r_ref
            acc = acc + e
            x = p.A @ x + p.b_diag * (Kp @ e + Ki @ acc)
    ok = worst_pi <= 1e-9 and worst_track <= 1e-9 and worst_orig <= 1e-9
    criterion("9", ok, f"PI vs summation law {worst_pi:.2e}; tracking error for k>=2 "
                       f"{worst_track:.2e} (original coordinates {worst_orig:.2e})")
    assert ok


# ----------------------------------------------------------------------- 10

def test_c10_locality(criterion):
    rng = np.random.default_rng(1010)
    changed = 0
    for _ in range(100):
        p = random_plant(rng)
        j = int(rng.integers(p.n))
        A2 = p.A.copy()
        A2[j] = rng.uniform(-5, 5, p.n) * p.graph.adjacency[j]
        q = p.replace(A=A2)
        for synth in (synth_deadbeat, synth_theta):
            for M1, M2 in zip(synth(p).matrices(), synth(q).matrices()):
                rows = [i for i in range(p.n) if i != j]
                if M1.shape[1] and not np.array_equal(M1[rows], M2[rows]):
                    changed += 1
    ok = changed == 0
    criterion("10", ok, f"100 row perturbations x 2 strategies: {changed} foreign-row changes")
    assert ok
