import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blfmrac.errors import InvalidInputError, ScenarioValidationError, StepFailureError
from blfmrac.scenario import load_preset, parse_scenario
from blfmrac.simulation import AugmentedState, evaluate_monitors, simulate

SCALAR_DECAY = """
[plant]
A =
    -1
B =
    1
d_bar = 0
[reference]
Ar =
    -1
Br =
    1
Q =
    1
[constraints]
x_bar = 100
u1_bar = 1
u2_bar = 1
M =
    1
x_bar_r = 1
[gains]
Gamma_x =
    1
Gamma_u =
    1
sigma_x = 1
kx_bar = 0.1
kr_bar = 1
[init]
x = 1
Ku =
    0
"""


@pytest.fixture(scope="module")
def decay_models():
    return parse_scenario(SCALAR_DECAY).build()


class TestDerivative:
    def test_equilibrium(self, zero_scenario):
        m = zero_scenario.build()
        loop = m.closed_loop()
        d = loop.derivative(AugmentedState.zeros(4, 2))
        assert np.all(d.to_vector() == 0.0)
        z = AugmentedState.zeros(4, 2)
        assert np.array_equal(loop.rk4_step(z, 0.01).to_vector(), z.to_vector())

    def test_matched_input_keeps_aux_error_zero(self, zero_scenario):
        loop = zero_scenario.build().closed_loop()
        K = 0.1 * np.ones((2, 4))
        x = np.array([0.1, 0.0, -0.1, 0.05])
        t = 1.3
        v = K @ x + loop.config.Kr @ loop.reference_signal(t)
        s = AugmentedState(x, np.zeros(4), np.zeros(4), v, np.zeros(2), K, np.eye(2), t)
        assert loop.derivative(s).e1 == pytest.approx(np.zeros(4), abs=1e-15)

    def test_example_per_equation(self, s4_models):
        m = s4_models
        loop = m.closed_loop()
        rng = np.random.default_rng(3)
        t = 0.7
        x = 0.1 * rng.normal(size=4)
        xr = x + 0.02 * rng.normal(size=4)
        s = AugmentedState(x, xr, 0.01 * rng.normal(size=4), 0.2 * rng.normal(size=2),
                           0.1 * rng.normal(size=2), 0.2 * rng.normal(size=(2, 4)),
                           np.eye(2) + 0.1 * rng.normal(size=(2, 2)), t)
        d = loop.derivative(s)
        A, B, Ar, Br, P = m.plant.A, m.plant.B, m.ref.Ar, m.ref.Br, m.ref.P
        Kr = np.diag([5.0, 10.0])
        r = np.array([0.4 * math.sin(0.1 * t), 0.2 * math.cos(0.05 * t)])
        w = np.array([math.sin(2 * t), math.cos(3 * t), math.sin(t), math.cos(2 * t)])
        dist = 0.99 * w / 1.6642717202741362
        v = s.Khat_x @ s.x + Kr @ r
        ed = s.x - s.xr - s.e1
        u1p2, u2p2 = 1.0, 0.36
        edp2 = m.spec.ed_bar**2 * np.linalg.eigvalsh(P).min()
        alpha = (u2p2 - s.u_dot @ s.u_dot) / (u1p2 - s.u @ s.u)
        assert d.x == pytest.approx(A @ s.x + B @ s.u + dist, abs=1e-9)
        assert d.xr == pytest.approx(Ar @ s.xr + Br @ r, abs=1e-14)
        assert d.e1 == pytest.approx(Ar @ s.e1 + B @ (s.u - v), abs=1e-14)
        assert d.u == pytest.approx(s.u_dot, abs=0)
        assert d.u_dot == pytest.approx(s.Ku @ v - s.u_dot - alpha * s.u, abs=1e-13)
        raw = -5 * np.outer(B.T @ P @ ed, s.x) / (edp2 - ed @ P @ ed) - 5 * s.Khat_x
        assert d.Khat_x == pytest.approx(raw, abs=1e-12)
        assert d.Ku == pytest.approx(-2 * np.outer(s.u_dot, v) / (u2p2 - s.u_dot @ s.u_dot),
                                     abs=1e-13)


class TestIntegrator:
    def test_scalar_decay_local_error(self, decay_models):
        loop = decay_models.closed_loop()
        s0 = decay_models.initial
        errs = []
        for dt in (0.1, 0.05):
            s1 = loop.rk4_step(s0, dt)
            errs.append(abs(s1.x[0] - math.exp(-dt)))
            assert s1.u == pytest.approx([0.0], abs=0)
        assert errs[0] < 1e-7
        assert 25 < errs[0] / errs[1] < 40  # O(dt^5)

    def test_scalar_decay_run(self, decay_models):
        traj, rep = simulate(decay_models.closed_loop(), decay_models.initial, horizon=2.0,
                             dt=0.01, decimation=1)
        assert traj.x[:, 0] == pytest.approx(np.exp(-traj.t), rel=1e-9)

    def test_halving_changes_final_state_little(self, s4_models, s4_run):
        _, traj, _ = s4_run
        half, _ = simulate(s4_models.closed_loop(), s4_models.initial, horizon=60.0, dt=5e-4)
        assert abs(np.linalg.norm(half.x[-1]) - np.linalg.norm(traj.x[-1])) < 1e-6

    def test_bad_arguments(self, s4_models):
        loop = s4_models.closed_loop()
        with pytest.raises(InvalidInputError):
            simulate(loop, s4_models.initial, horizon=1.0, dt=0.3)
        with pytest.raises(InvalidInputError):
            simulate(loop, s4_models.initial, horizon=-1.0)

    def test_step_failure(self, s4_scenario):
        sc = s4_scenario.with_values(**{
            "init.Ku": 1e4 * np.eye(2), "signals.reference": "constant",
            "signals.reference_values": [0.4, 0.2],
        })
        m = sc.build()
        with pytest.raises(StepFailureError) as ei:
            simulate(m.closed_loop(), m.initial, horizon=2.0, dt=0.01, dt_min=0.01)
        assert ei.value.barrier == "u_dot"
        traj, rep = simulate(m.closed_loop(), m.initial, horizon=2.0, dt=0.01, dt_min=0.01,
                             raise_on_failure=False)
        assert not rep.completed and not rep.ok and "u_dot" in rep.failure

    def test_inadmissible_initial(self, s4_models):
        bad = replace(s4_models.initial, u=np.array([1.0, 0.0]))
        with pytest.raises(ScenarioValidationError):
            simulate(s4_models.closed_loop(), bad, horizon=1.0)


class TestRuns:
    def test_zero_scenario(self, zero_scenario):
        m = zero_scenario.build()
        traj, rep = simulate(m.closed_loop(), m.initial, horizon=5.0)
        for arr in (traj.x, traj.xr, traj.e1, traj.u, traj.u_dot, traj.Khat_x):
            assert np.all(arr == 0.0)
        assert rep.ok

    def test_example_constraints(self, s4_run):
        loop, traj, rep = s4_run
        assert rep.ok and rep.completed
        assert rep.max_norm_x < 6 and rep.max_norm_u < 1
        assert rep.max_norm_udot < 0.6 and rep.max_norm_ed < 0.9
        assert traj.halvings == 0
        assert len(traj) == 6001

    def test_error_decomposition(self, s4_run):
        _, traj, _ = s4_run
        assert np.abs(traj.e - (traj.e_d + traj.e1)).max() <= 1e-15

    def test_weighted_barriers(self, s4_run):
        loop, traj, _ = s4_run
        spec, P = loop.config.spec, loop.ref.P
        assert np.all(np.einsum("ki,kj,ij->k", traj.u, traj.u, spec.M) < spec.u1_bar_primed**2)
        assert np.all(np.einsum("ki,kj,ij->k", traj.u_dot, traj.u_dot, spec.M)
                      < spec.u2_bar_primed**2)
        assert np.all(np.einsum("ki,kj,ij->k", traj.e_d, traj.e_d, P) < spec.ed_bar_primed**2)

    def test_projection_bound(self, s4_run):
        loop, traj, rep = s4_run
        assert rep.khat_ok
        assert traj.norm_khat.max() <= loop.config.gains.kx_bar + 1e-9

    def test_baseline_violates(self, s4_baseline_run):
        _, traj, rep = s4_baseline_run
        assert not rep.constraints_ok
        assert rep.max_norm_u > 1.0
        assert np.all(np.isnan(traj.V_theta))

    def test_baseline_rate_is_derivative_of_input(self, s4_baseline_run):
        _, traj, _ = s4_baseline_run
        dt = traj.t[1] - traj.t[0]
        fd = (traj.u[2:] - traj.u[:-2]) / (2 * dt)
        assert np.abs(fd - traj.u_dot[1:-1]).max() < 1e-3

    def test_preset_disturbance_stays_below_bound(self, s4_models):
        ts = np.random.default_rng(0).uniform(0, 60, 100_000)
        assert np.linalg.norm(s4_models.disturbance.bank.sample(ts), axis=1).max() < 1.0


class TestMonitors:
    def test_equilibrium_trivially_passes(self, zero_scenario):
        m = zero_scenario.build()
        traj, rep = simulate(m.closed_loop(), m.initial, horizon=1.0)
        assert rep.ok and rep.vtheta_max_increase == 0.0

    @pytest.mark.parametrize("k", [0, 17, 3000, 6000])
    def test_corrupted_state_sample(self, s4_run, k):
        loop, traj, _ = s4_run
        bad = replace(traj, derived=dict(traj.derived))
        bad.derived["norm_x"] = traj.norm_x.copy()
        bad.derived["norm_x"][k] = 7.0
        rep = evaluate_monitors(bad, loop)
        assert not rep.verdicts["x"] and rep.first_violation["x"] == k

    def test_corrupted_vtheta_sample(self, s4_run):
        loop, traj, _ = s4_run
        bad = replace(traj, derived=dict(traj.derived))
        bad.derived["V_theta"] = traj.V_theta.copy()
        bad.derived["V_theta"][1234] += 1e-3
        rep = evaluate_monitors(bad, loop)
        assert not rep.vtheta_ok and rep.vtheta_first_violation == 1234

    def test_corrupted_vphi_sample(self, s4_run):
        loop, traj, rep0 = s4_run
        bad = replace(traj, derived=dict(traj.derived))
        bad.derived["V_phi"] = traj.V_phi.copy()
        bad.derived["V_phi"][42] = rep0.vphi_bound + 1.0
        rep = evaluate_monitors(bad, loop)
        assert not rep.vphi_ok and rep.vphi_first_violation == 42


class TestBarrierInvariance:
    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.6, 2.0), st.floats(0.3, 1.0))
    def test_random_feasible_runs(self, seed, u1, u2):
        rng = np.random.default_rng(seed)
        sc = load_preset("paper-s4").with_values(**{
            "constraints.u1_bar": u1, "constraints.u2_bar": u2, "constraints.x_bar": 10.0,
            "signals.disturbance": "bounded-random-smooth", "run.seed": seed,
        })
        m = sc.build()
        assert m.feasibility.ok
        spec = m.spec
        init = replace(m.initial, u=rng.uniform(-0.5, 0.5, 2) * u1,
                       u_dot=rng.uniform(-0.5, 0.5, 2) * u2,
                       x=rng.uniform(-0.1, 0.1, 4))
        traj, rep = simulate(m.closed_loop(), init, horizon=8.0, dt=1e-3)
        assert rep.completed and rep.constraints_ok and rep.khat_ok and rep.vtheta_ok
        assert rep.max_norm_u < spec.u1_bar and rep.max_norm_udot < spec.u2_bar
