import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from blfmrac.controller import (
    AdaptiveGains,
    ConstraintSpec,
    ControllerState,
    alpha_coupling,
    auxiliary_input,
    blf_gradients,
    blf_values,
    composite_lyapunov_phi,
    composite_lyapunov_theta,
    controller_accel,
    khat_x_derivative,
    ku_derivative,
    robust_mrac_step,
    vtheta_rate,
    vtheta_rate_closed_form,
)
from blfmrac.errors import BarrierBreachError, InvalidInputError
from blfmrac.kernels import project_ball

B = np.array([[0, 0], [0.2, 0], [0, 0], [0, 0.2]])


@pytest.fixture
def spec():
    # aircraft example bounds with a unit-weight e_d set
    return ConstraintSpec(6.0, 1.0, 0.6, np.eye(2), 2.0).with_error_bound(0.9, np.eye(4))


@pytest.fixture
def gains():
    return AdaptiveGains(5 * np.eye(2), 2 * np.eye(2), 1.0, 5.0, 10.0)


def state(u=(0, 0), ud=(0, 0), K=None, Ku=None):
    return ControllerState(np.array(u, float), np.array(ud, float),
                           np.zeros((2, 4)) if K is None else np.asarray(K, float),
                           np.zeros((2, 2)) if Ku is None else np.asarray(Ku, float))


class TestSpec:
    def test_primed_bounds(self):
        s = ConstraintSpec(6.0, 1.0, 0.6, np.diag([4.0, 9.0]), 2.0)
        assert s.u1_bar_primed == pytest.approx(2.0)
        assert s.u2_bar_primed == pytest.approx(1.2)
        assert s.e_bar == 4.0

    def test_error_bound_weighting(self):
        s = ConstraintSpec(6.0, 1.0, 0.6, np.eye(2), 2.0).with_error_bound(0.9, np.diag([
            0.25, 1.0, 2.0, 3.0]))
        assert s.ed_bar_primed == pytest.approx(0.45)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            ConstraintSpec(1.0, 1.0, 0.6, np.eye(2), 2.0)
        with pytest.raises(InvalidInputError):
            ConstraintSpec(6.0, -1.0, 0.6, np.eye(2), 2.0)
        with pytest.raises(InvalidInputError):
            ConstraintSpec(6.0, 1.0, 0.6, np.diag([1.0, -1.0]), 2.0)

    def test_missing_error_bound(self):
        s = ConstraintSpec(6.0, 1.0, 0.6, np.eye(2), 2.0)
        with pytest.raises(InvalidInputError):
            blf_values(np.zeros(4), np.zeros(2), np.zeros(2), np.eye(4), s)


class TestAuxiliaryInput:
    def test_zero(self):
        assert auxiliary_input(np.ones((2, 4)), np.eye(2), np.zeros(4), np.zeros(2)) == \
            pytest.approx(np.zeros(2))

    def test_reference_only(self):
        got = auxiliary_input(np.zeros((2, 4)), np.eye(2), np.ones(4), [1.0, 2.0])
        assert got == pytest.approx([1.0, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            auxiliary_input(np.zeros((2, 3)), np.eye(2), np.ones(4), [1.0, 2.0])


class TestAlpha:
    def test_origin(self, spec):
        assert alpha_coupling(np.zeros(2), np.zeros(2), spec) == pytest.approx(0.36)

    def test_direct_substitution(self, spec):
        u = np.array([np.sqrt(0.5), 0.0])
        assert alpha_coupling(u, np.zeros(2), spec) == pytest.approx(0.72)

    def test_example_point(self, spec):
        u = np.array([0.8, 0.0])
        ud = np.array([0.0, np.sqrt(0.18)])
        assert alpha_coupling(u, ud, spec) == pytest.approx((0.36 - 0.18) / (1 - 0.64))
        assert alpha_coupling(u, ud, spec) == pytest.approx(0.5)

    def test_breach(self, spec):
        with pytest.raises(BarrierBreachError) as ei:
            alpha_coupling(np.array([1.0, 0.0]), np.zeros(2), spec)
        assert ei.value.barrier == "u"

    @given(st.floats(0, 0.999), st.floats(0, 0.999), st.floats(0, 6.3), st.floats(0, 6.3))
    def test_positive_inside(self, a, b, p1, p2):
        spec = ConstraintSpec(6.0, 1.0, 0.6, np.eye(2), 2.0)
        u = math.sqrt(a) * np.array([math.cos(p1), math.sin(p1)])
        ud = 0.6 * math.sqrt(b) * np.array([math.cos(p2), math.sin(p2)])
        assert alpha_coupling(u, ud, spec) > 0.0


class TestControllerAccel:
    def test_zero(self, spec):
        assert controller_accel(state(), np.zeros(2), spec) == pytest.approx(np.zeros(2))

    def test_unit_gain(self, spec):
        got = controller_accel(state(Ku=np.eye(2)), np.array([1.0, 0.0]), spec)
        assert got == pytest.approx([1.0, 0.0])

    def test_snapshot(self, spec):
        s = state(u=[0.3, -0.2], ud=[0.1, 0.25], Ku=[[1.1, 0.2], [-0.3, 0.9]])
        v = np.array([0.7, -0.4])
        alpha = (0.36 - (0.1**2 + 0.25**2)) / (1 - (0.3**2 + 0.2**2))
        oracle = np.array([1.1 * 0.7 + 0.2 * -0.4, -0.3 * 0.7 + 0.9 * -0.4]) \
            - np.array([0.1, 0.25]) - alpha * np.array([0.3, -0.2])
        assert controller_accel(s, v, spec) == pytest.approx(oracle, abs=1e-15)


class TestKhatLaw:
    def test_zero(self, spec, gains):
        got = khat_x_derivative(np.zeros((2, 4)), np.zeros(4), np.ones(4), np.eye(4), B, gains,
                                spec)
        assert got == pytest.approx(np.zeros((2, 4)))

    def test_interior_is_raw_gradient(self, spec):
        g = AdaptiveGains(5 * np.eye(2), 2 * np.eye(2), 1e-300, 5.0, 10.0)
        P = np.diag([1.0, 2.0, 3.0, 4.0])
        ed = np.array([0.1, 0.2, -0.1, 0.05])
        x = np.array([1.0, -1.0, 0.5, 2.0])
        K = 0.1 * np.ones((2, 4))
        got = khat_x_derivative(K, ed, x, P, B, g, spec)
        den = 0.81 - ed @ P @ ed
        raw = -5 * np.outer(B.T @ P @ ed, x) / den
        assert got == pytest.approx(raw, rel=1e-12)

    def test_boundary_radial(self, spec, gains):
        K = np.full((2, 4), 5.0 / np.sqrt(8))
        ed = np.array([0.0, -0.3, 0.0, -0.3])
        x = np.ones(4)
        raw_dir = -np.outer(B.T @ ed, x)
        assert np.sum(raw_dir * K) > 0
        got = khat_x_derivative(K, ed, x, np.eye(4), B, gains, spec)
        assert np.sum(got * K) <= 1e-12

    @given(st.integers(0, 100_000))
    def test_projection_radial_property(self, seed):
        rng = np.random.default_rng(seed)
        kbar = rng.uniform(0.1, 10.0)
        K = rng.normal(size=(2, 4))
        K *= kbar / np.linalg.norm(K)
        D = rng.normal(size=(2, 4))
        assume(np.sum(D * K) > 0)
        Dp = project_ball(K, D, kbar, 0.1)
        assert np.sum(Dp * K) <= 1e-12 * np.linalg.norm(D) * kbar

    @given(st.integers(0, 100_000))
    def test_projection_never_increases_outward_rate(self, seed):
        rng = np.random.default_rng(seed)
        kbar = 2.0
        K = rng.normal(size=(3, 3))
        K *= rng.uniform(0.0, 1.0) * kbar / np.linalg.norm(K)
        D = rng.normal(size=(3, 3))
        Dp = project_ball(K, D, kbar, 0.1)
        assert np.sum(Dp * K) <= max(np.sum(D * K), 0.0) + 1e-12

    def test_breach(self, spec, gains):
        with pytest.raises(BarrierBreachError):
            khat_x_derivative(np.zeros((2, 4)), np.array([0.9, 0, 0, 0]), np.ones(4),
                              np.eye(4), B, gains, spec)


class TestKuLaw:
    def test_zero_rate(self, spec, gains):
        assert ku_derivative(np.zeros(2), np.ones(2), gains, spec) == pytest.approx(np.zeros((2,
                                                                                              2)))

    def test_zero_v(self, spec, gains):
        assert ku_derivative(np.array([0.1, 0.2]), np.zeros(2), gains, spec) == \
            pytest.approx(np.zeros((2, 2)))

    def test_snapshot(self, spec, gains):
        ud = np.array([0.1, -0.2])
        v = np.array([0.5, 1.5])
        oracle = -2 * np.outer(ud, v) / (0.36 - 0.05)
        assert ku_derivative(ud, v, gains, spec) == pytest.approx(oracle, rel=1e-14)


class TestBarrierFunctions:
    def test_zero(self, spec):
        assert blf_values(np.zeros(4), np.zeros(2), np.zeros(2), np.eye(4), spec) == (0, 0, 0)

    def test_inverted_formula(self, spec):
        u = np.array([math.sqrt(1 - math.exp(-2)), 0.0])
        assert blf_values(np.zeros(4), u, np.zeros(2), np.eye(4), spec)[1] == pytest.approx(1.0)

    @pytest.mark.parametrize("frac", [0.5, 0.999999, 1 - 1e-8])
    def test_near_boundary_extended_precision(self, spec, frac):
        u = np.array([math.sqrt(frac), 0.0])
        got = blf_values(np.zeros(4), u, np.zeros(2), np.eye(4), spec)[1]
        q = mpmath.mpf(float(u @ u))
        mpmath.mp.dps = 50
        ref = -mpmath.log(1 - q) / 2
        assert math.isfinite(got)
        assert got == pytest.approx(float(ref), rel=1e-9)

    def test_guard(self, spec):
        u = np.array([math.sqrt(1 - 1e-10), 0.0])
        with pytest.raises(BarrierBreachError):
            blf_values(np.zeros(4), u, np.zeros(2), np.eye(4), spec)

    @given(st.integers(0, 10_000))
    def test_monotone_on_rays(self, seed):
        rng = np.random.default_rng(seed)
        spec = ConstraintSpec(6.0, 1.0, 0.6, np.diag([1.0, 3.0]), 2.0).with_error_bound(
            0.9, np.eye(4))
        P = np.diag(rng.uniform(0.5, 2.0, 4))
        de, du, dd = rng.normal(size=4), rng.normal(size=2), rng.normal(size=2)
        de /= np.sqrt(de @ P @ de)
        du /= np.sqrt(du @ spec.M @ du)
        dd /= np.sqrt(dd @ spec.M @ dd)
        vals = [blf_values(s * 0.9 * de, s * du, s * 0.6 * dd, P, spec)
                for s in np.linspace(0, 0.99, 25)]
        for k in range(3):
            seq = [v[k] for v in vals]
            assert all(b > a for a, b in zip(seq, seq[1:]))

    def test_gradients_direction(self, spec):
        g1, g2, g3 = blf_gradients(np.full(4, 0.1), np.array([0.5, 0]), np.array([0, 0.3]),
                                   np.eye(4), spec)
        assert g2 == pytest.approx([0.5 / 0.75, 0.0])
        assert g3 == pytest.approx([0.0, 0.3 / 0.27])
        assert g1 == pytest.approx(np.full(4, 0.1) / (0.81 - 0.04))


class TestCompositeFunctions:
    def test_theta_zero(self, spec, gains):
        assert composite_lyapunov_theta(state(), gains, spec) == 0.0

    def test_theta_gain_term(self, spec, gains):
        assert composite_lyapunov_theta(state(Ku=np.eye(2)), gains, spec) == pytest.approx(0.5)

    def test_phi(self, spec, gains):
        Kt = np.ones((2, 4))
        assert composite_lyapunov_phi(np.zeros(4), Kt, np.eye(4), gains, spec) == \
            pytest.approx(0.5 * 8 / 5)

    @given(st.integers(0, 10_000))
    def test_vtheta_identity(self, seed):
        rng = np.random.default_rng(seed)
        spec = ConstraintSpec(6.0, 1.0, 0.6, np.eye(2), 2.0)
        g = AdaptiveGains(5 * np.eye(2), np.diag(rng.uniform(0.5, 3, 2)), 1.0, 5.0, 10.0)
        s = state(u=rng.uniform(-0.6, 0.6, 2), ud=rng.uniform(-0.4, 0.4, 2),
                  Ku=rng.normal(size=(2, 2)))
        v = rng.normal(size=2)
        assert vtheta_rate(s, v, g, spec) == pytest.approx(
            vtheta_rate_closed_form(s.u_dot, spec), rel=1e-10, abs=1e-13)

    def test_closed_form_non_positive(self, spec):
        assert vtheta_rate_closed_form(np.zeros(2), spec) == 0.0
        assert vtheta_rate_closed_form(np.array([0.3, 0.3]), spec) < 0.0


class TestRobustMRAC:
    def test_zero_signals(self, gains):
        K = np.arange(8.0).reshape(2, 4)
        u, dK = robust_mrac_step(K, np.zeros(4), np.zeros(2), np.ones(4), np.eye(4), B,
                                 np.eye(2), gains)
        assert u == pytest.approx(np.zeros(2))
        assert dK == pytest.approx(-1.0 * 5 * K)

    def test_zero_gain_zero_error(self, gains):
        u, dK = robust_mrac_step(np.zeros((2, 4)), np.ones(4), np.ones(2), np.zeros(4),
                                 np.eye(4), B, np.diag([5.0, 10.0]), gains)
        assert u == pytest.approx([5.0, 10.0])
        assert dK == pytest.approx(np.zeros((2, 4)))
