"""Acceptance criteria 1-13, one pass/fail line per criterion.

Lines are printed as each test runs (visible with ``-s``) and repeated in
the terminal summary.
"""

import time

import numpy as np
import pytest

from blfmrac.csvio import format_trajectory_csv
from blfmrac.diagnostics import gradcheck
from blfmrac.feasibility import (
    check_c1,
    derived_constants,
    ed_bar_selection,
    feasibility_report,
    minimal_state_bound,
)
from blfmrac.linalg import lyapunov_residual, solve_lyapunov, spectral_norm, symmetric_eig_extremes
from blfmrac.scenario import load_preset, parse_scenario, serialize_scenario
from blfmrac.simulation import simulate

from conftest import S4_X_BAR_MIN

RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def s4():
    return load_preset("paper-s4").build()


@pytest.fixture(scope="module")
def s4_timed(s4):
    loop = s4.closed_loop()
    simulate(loop, s4.initial, horizon=0.01, dt=1e-3)  # compile outside the timed region
    t0 = time.perf_counter()
    traj, rep = simulate(loop, s4.initial, horizon=60.0, dt=1e-3)
    return traj, rep, time.perf_counter() - t0


def test_c01_lyapunov_solver():
    rng = np.random.default_rng(2024)
    worst = 0.0
    min_eig = np.inf
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(1, 9))
        A = rng.normal(size=(n, n))
        Ar = A - (np.max(np.linalg.eigvals(A).real) + rng.uniform(0.05, 2.0)) * np.eye(n)
        G = rng.normal(size=(n, n))
        Q = G @ G.T + 0.05 * np.eye(n)
        P = solve_lyapunov(Ar, Q)
        worst = max(worst, lyapunov_residual(Ar, P, Q) / spectral_norm(Q))
        min_eig = min(min_eig, symmetric_eig_extremes(P).lambda_min)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and min_eig > 0 and elapsed < 5.0
    report(1, ok, f"max residual/||Q|| {worst:.2e}, min eig(P) {min_eig:.2e}, "
                  f"{elapsed:.2f} s")


def test_c02_c1_threshold(s4):
    _, thr = check_c1(s4.feasibility_inputs)
    report(2, abs(thr - 11.5) <= 1e-9, f"threshold {thr!r}")


def test_c03_derived_constants(s4):
    gamma, kappa = derived_constants(s4.feasibility_inputs)
    ok = 0.54 <= gamma <= 0.58 and 1.15 <= kappa <= 1.30
    report(3, ok, f"gamma {gamma:.10f}, kappa {kappa:.10f}")


def test_c04_minimal_state_bound(s4):
    inp = s4.feasibility_inputs
    x_min = minimal_state_bound(inp)
    rep = feasibility_report(inp)
    ok = (5.4 <= x_min <= 6.2 and abs(x_min - S4_X_BAR_MIN) <= 1e-12 * S4_X_BAR_MIN
          and np.array_equal(inp.Q, np.eye(4)) and inp.x_bar == 6.0 and rep.c2_ok)
    report(4, ok, f"x_bar_min {x_min!r} (pinned {S4_X_BAR_MIN!r}); x_bar 6 passes C2: "
                  f"{rep.c2_ok}")


def test_c05_error_bound(s4):
    ed = ed_bar_selection(s4.feasibility_inputs)
    report(5, 0.85 <= ed <= 0.95, f"e_d bound {ed:.10f}")


def test_c06_closed_loop_run(s4_timed):
    _, rep, elapsed = s4_timed
    bounds = {"x": (rep.max_norm_x, 6.0), "u": (rep.max_norm_u, 1.0),
              "u_dot": (rep.max_norm_udot, 0.6), "e_d": (rep.max_norm_ed, 0.9)}
    ok = all(v < b for v, b in bounds.values()) and elapsed < 10.0 and rep.completed
    detail = ", ".join(f"max|{k}| {v:.4f} < {b}" for k, (v, b) in bounds.items())
    report(6, ok, f"{detail}; runtime {elapsed:.2f} s")


def test_c07_vtheta_monotone(s4_timed):
    traj, _, _ = s4_timed
    V = traj.V_theta
    inc = np.diff(V)
    ok = bool(np.all(np.isfinite(V)) and np.all(inc <= 1e-8 * (1.0 + V[:-1])))
    report(7, ok, f"max per-step increase {inc.max():.3e} over {inc.size} steps")


def test_c08_vphi_bound(s4, s4_timed):
    traj, _, _ = s4_timed
    loop = s4.closed_loop()
    g = s4.gains
    alpha = min(symmetric_eig_extremes(s4.ref.Q).lambda_min, g.sigma_x)
    c = g.sigma_x * spectral_norm(loop.true_gains.Kx) ** 2 / 2
    W = traj.V_phi
    bound = W[0] + c / alpha
    ok = bool(np.all(W < bound + 1e-6))
    report(8, ok, f"max V_phi {W.max():.6f} < V_phi(0) + c/alpha = {bound:.6f}")


def test_c09_baseline_violates():
    m = load_preset("paper-s4-robust-mrac").build()
    loop = m.closed_loop()
    g = loop.config.gains
    same = np.array_equal(g.Gamma_x, 15 * np.eye(2)) and g.sigma_x == 1.0
    _, rep = simulate(loop, m.initial, horizon=60.0, dt=1e-3)
    exceeded = [k for k in ("x", "u", "u_dot") if not rep.verdicts[k]]
    ok = same and bool(exceeded)
    report(9, ok, f"bounds exceeded: {exceeded} (max|u| {rep.max_norm_u:.3f}, "
                  f"max|x| {rep.max_norm_x:.3f}, max|u_dot| {rep.max_norm_udot:.3f})")


def test_c10_gradient_suite():
    rep = gradcheck(seed=0, n_points=100)
    worst = max(rep.max_rel_error.values())
    report(10, rep.ok and rep.n_points == 100, f"worst relative error {worst:.2e} "
                                               f"over {rep.n_points} points")


def test_c11_projection():
    # tiny gain bound and aggressive adaptation push Khat_x hard against the ball
    sc = load_preset("paper-s4").with_values(**{
        "gains.kx_bar": 0.5, "gains.Gamma_x": 200 * np.eye(2), "gains.sigma_x": 1e-3,
    })
    m = sc.build()
    traj, rep = simulate(m.closed_loop(), m.initial, horizon=60.0, dt=1e-3, decimation=1)
    nk = traj.norm_khat
    engaged = float(np.mean(nk > 0.9 * 0.5))
    ok = bool(np.all(nk <= 0.5 + 1e-9)) and engaged > 0.1
    report(11, ok, f"max ||Khat_x|| - kx_bar {nk.max() - 0.5:.2e}; "
                   f"{100 * engaged:.0f}% of samples in the boundary layer")


def test_c12_integrator_order(s4):
    finals = []
    for dt in (4e-3, 2e-3, 1e-3):
        traj, _ = simulate(s4.closed_loop(), s4.initial, horizon=60.0, dt=dt)
        finals.append(traj.final_state.to_vector())
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    ratio = d1 / d2
    report(12, ratio >= 8.0, f"|z(dt)-z(dt/2)| {d1:.3e}, |z(dt/2)-z(dt/4)| {d2:.3e}, "
                             f"ratio {ratio:.2f}")


def test_c13_determinism_and_round_trip():
    sc = load_preset("paper-s4").with_values(**{
        "signals.disturbance": "bounded-random-smooth", "run.seed": 7,
        "integrator.horizon": 5.0,
    })
    csvs = []
    for _ in range(2):
        m = sc.build()
        traj, _ = simulate(m.closed_loop(), m.initial, horizon=sc.horizon, dt=sc.dt)
        csvs.append(format_trajectory_csv(traj).encode())
    rt = all(parse_scenario(serialize_scenario(load_preset(name))) == load_preset(name)
             for name in ("paper-s4", "paper-s4-robust-mrac"))
    rt = rt and parse_scenario(serialize_scenario(sc)) == sc
    ok = csvs[0] == csvs[1] and rt
    report(13, ok, f"CSV byte-identical: {csvs[0] == csvs[1]} ({len(csvs[0])} bytes); "
                   f"round-trip exact: {rt}")
