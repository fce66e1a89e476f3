"""Two-layer barrier-Lyapunov adaptive controller and the robust MRAC baseline.

The input ``u`` is itself a state obeying

    u'' + u' + alpha u = Ku v,      v = Khat_x x + Kr r,

where ``alpha`` couples the input-magnitude and input-rate barriers. The
functions here take only what the controller may know: ``B``, ``P``,
``Kr``, the gains and the constraint specification. The true plant matrix
and the true ``Kx`` never enter, except in :func:`composite_lyapunov_phi`,
which is a simulator-side monitor.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import constants as C
from .errors import BarrierBreachError, InvalidInputError
from .kernels import project_ball
from .linalg import as_matrix, symmetric_eig_extremes

__all__ = [
    "ConstraintSpec",
    "AdaptiveGains",
    "ControllerState",
    "auxiliary_input",
    "alpha_coupling",
    "controller_accel",
    "khat_x_derivative",
    "ku_derivative",
    "blf_values",
    "blf_gradients",
    "composite_lyapunov_theta",
    "composite_lyapunov_phi",
    "vtheta_rate",
    "vtheta_rate_closed_form",
    "robust_mrac_step",
]


def _spd(M, name):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square")
    if symmetric_eig_extremes(M).lambda_min <= 0.0:
        raise InvalidInputError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """User bounds on ||x||, ||u||, ||u'|| plus the derived error bounds.

    ``ed_bar`` is filled in from the feasibility analysis; ``ed_bar_primed``
    is ``ed_bar * sqrt(lambda_min(P))``, the radius of the weighted e_d set.
    """

    x_bar: float
    u1_bar: float
    u2_bar: float
    M: np.ndarray
    x_bar_r: float
    ed_bar: float = None
    ed_bar_primed: float = None

    def __post_init__(self):
        for name in ("x_bar", "u1_bar", "u2_bar", "x_bar_r"):
            value = float(getattr(self, name))
            if not value > 0.0:
                raise InvalidInputError(f"constraints.{name} must be positive")
            object.__setattr__(self, name, value)
        if not self.x_bar > self.x_bar_r:
            raise InvalidInputError("constraints.x_bar must exceed constraints.x_bar_r")
        object.__setattr__(self, "M", _spd(self.M, "constraints.M"))
        if self.ed_bar is not None:
            object.__setattr__(self, "ed_bar", float(self.ed_bar))
        if self.ed_bar_primed is not None:
            object.__setattr__(self, "ed_bar_primed", float(self.ed_bar_primed))

    @property
    def lambda_min_M(self):
        return symmetric_eig_extremes(self.M).lambda_min

    @property
    def u1_bar_primed(self):
        return self.u1_bar * math.sqrt(self.lambda_min_M)

    @property
    def u2_bar_primed(self):
        return self.u2_bar * math.sqrt(self.lambda_min_M)

    @property
    def e_bar(self):
        return self.x_bar - self.x_bar_r

    def with_error_bound(self, ed_bar, P):
        """Copy with ``ed_bar`` set and its P-weighted radius derived."""
        lam = symmetric_eig_extremes(P).lambda_min
        return replace(self, ed_bar=float(ed_bar), ed_bar_primed=float(ed_bar) * math.sqrt(lam))

    def _need_ed(self):
        if self.ed_bar_primed is None:
            raise InvalidInputError("constraint spec has no e_d bound; run the feasibility check")
        return self.ed_bar_primed


@dataclass(frozen=True, eq=False)
class AdaptiveGains:
    Gamma_x: np.ndarray
    Gamma_u: np.ndarray
    sigma_x: float
    kx_bar: float
    kr_bar: float
    eps_p: float = C.PROJECTION_EPS

    def __post_init__(self):
        object.__setattr__(self, "Gamma_x", _spd(self.Gamma_x, "gains.Gamma_x"))
        object.__setattr__(self, "Gamma_u", _spd(self.Gamma_u, "gains.Gamma_u"))
        for name in ("sigma_x", "kx_bar", "kr_bar"):
            value = float(getattr(self, name))
            if not value > 0.0:
                raise InvalidInputError(f"gains.{name} must be positive")
            object.__setattr__(self, name, value)
        if not 0.0 < self.eps_p < 1.0:
            raise InvalidInputError("gains.eps_p must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ControllerState:
    u: np.ndarray
    u_dot: np.ndarray
    Khat_x: np.ndarray
    Ku: np.ndarray

    @classmethod
    def zeros(cls, n, m):
        return cls(np.zeros(m), np.zeros(m), np.zeros((m, n)), np.zeros((m, m)))


def _gap(q, bound2, name):
    den = bound2 - q
    if not den > C.GUARD_FACTOR * bound2:
        raise BarrierBreachError(name, den / bound2)
    return den


def _quad(v, W):
    v = np.asarray(v, dtype=float)
    return float(v @ W @ v)


def auxiliary_input(Khat_x, Kr, x, r):
    Khat_x = np.asarray(Khat_x, dtype=float)
    Kr = np.asarray(Kr, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if Khat_x.shape[1] != x.size or Kr.shape[1] != r.size or Khat_x.shape[0] != Kr.shape[0]:
        raise InvalidInputError(
            f"auxiliary_input: shapes Khat_x{Khat_x.shape}, x({x.size}), Kr{Kr.shape}, r({r.size})"
        )
    return Khat_x @ x + Kr @ r


def alpha_coupling(u, u_dot, spec):
    """``(U2'^2 - u'^T M u') / (U1'^2 - u^T M u)``; positive inside both sets."""
    u1p2 = spec.u1_bar_primed**2
    u2p2 = spec.u2_bar_primed**2
    den1 = _gap(_quad(u, spec.M), u1p2, "u")
    den2 = _gap(_quad(u_dot, spec.M), u2p2, "u_dot")
    return den2 / den1


def controller_accel(state, v, spec):
    alpha = alpha_coupling(state.u, state.u_dot, spec)
    return state.Ku @ np.asarray(v, dtype=float) - state.u_dot - alpha * state.u


def khat_x_derivative(Khat_x, ed, x, P, B, gains, spec):
    """Projected barrier-scaled gradient law for the state-feedback estimate."""
    edp2 = spec._need_ed() ** 2
    ed = np.asarray(ed, dtype=float)
    x = np.asarray(x, dtype=float)
    Khat_x = np.asarray(Khat_x, dtype=float)
    den = _gap(_quad(ed, P), edp2, "e_d")
    G = gains.Gamma_x
    raw = -(G @ np.outer(B.T @ P @ ed, x)) / den - gains.sigma_x * (G @ Khat_x)
    return project_ball(Khat_x, raw, gains.kx_bar, gains.eps_p)


def ku_derivative(u_dot, v, gains, spec):
    u2p2 = spec.u2_bar_primed**2
    u_dot = np.asarray(u_dot, dtype=float)
    den = _gap(_quad(u_dot, spec.M), u2p2, "u_dot")
    return -(gains.Gamma_u @ np.outer(spec.M @ u_dot, np.asarray(v, dtype=float))) / den


def _blf(q, bound2, name):
    _gap(q, bound2, name)
    return -0.5 * math.log1p(-q / bound2)


def blf_values(ed, u, u_dot, P, spec):
    """The three log-barrier functions (V1 on e_d, V2 on u, V3 on u')."""
    v1 = _blf(_quad(ed, P), spec._need_ed() ** 2, "e_d")
    v2 = _blf(_quad(u, spec.M), spec.u1_bar_primed**2, "u")
    v3 = _blf(_quad(u_dot, spec.M), spec.u2_bar_primed**2, "u_dot")
    return v1, v2, v3


def blf_gradients(ed, u, u_dot, P, spec):
    """Analytic gradients of (V1, V2, V3) with respect to (e_d, u, u')."""
    ed, u, u_dot = (np.asarray(a, dtype=float) for a in (ed, u, u_dot))
    g1 = P @ ed / _gap(_quad(ed, P), spec._need_ed() ** 2, "e_d")
    g2 = spec.M @ u / _gap(_quad(u, spec.M), spec.u1_bar_primed**2, "u")
    g3 = spec.M @ u_dot / _gap(_quad(u_dot, spec.M), spec.u2_bar_primed**2, "u_dot")
    return g1, g2, g3


def composite_lyapunov_theta(state, gains, spec):
    u1p2 = spec.u1_bar_primed**2
    u2p2 = spec.u2_bar_primed**2
    v2 = _blf(_quad(state.u, spec.M), u1p2, "u")
    v3 = _blf(_quad(state.u_dot, spec.M), u2p2, "u_dot")
    Ku = np.asarray(state.Ku, dtype=float)
    return v2 + v3 + 0.5 * float(np.trace(Ku.T @ np.linalg.solve(gains.Gamma_u, Ku)))


def composite_lyapunov_phi(ed, Ktilde_x, P, gains, spec):
    """Simulator-side monitor: needs ``Ktilde_x = Khat_x - Kx`` with the true Kx."""
    v1 = _blf(_quad(ed, P), spec._need_ed() ** 2, "e_d")
    Kt = np.asarray(Ktilde_x, dtype=float)
    return v1 + 0.5 * float(np.trace(Kt.T @ np.linalg.solve(gains.Gamma_x, Kt)))


def vtheta_rate(state, v, gains, spec):
    """Time derivative of V_theta assembled term by term along the closed loop."""
    g2 = spec.M @ state.u / _gap(_quad(state.u, spec.M), spec.u1_bar_primed**2, "u")
    g3 = spec.M @ state.u_dot / _gap(_quad(state.u_dot, spec.M), spec.u2_bar_primed**2, "u_dot")
    udd = controller_accel(state, v, spec)
    Kud = ku_derivative(state.u_dot, v, gains, spec)
    adapt = float(np.trace(state.Ku.T @ np.linalg.solve(gains.Gamma_u, Kud)))
    return float(g2 @ state.u_dot + g3 @ udd) + adapt


def vtheta_rate_closed_form(u_dot, spec):
    q = _quad(u_dot, spec.M)
    return -q / _gap(q, spec.u2_bar_primed**2, "u_dot")


def robust_mrac_step(Khat_x, x, r, e, P, B, Kr, gains):
    """Classical sigma-modification MRAC: no barriers, projection or input dynamics."""
    Khat_x = np.asarray(Khat_x, dtype=float)
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    u = Khat_x @ x + np.asarray(Kr, dtype=float) @ np.asarray(r, dtype=float)
    G = gains.Gamma_x
    dK = -(G @ np.outer(B.T @ P @ e, x)) - gains.sigma_x * (G @ Khat_x)
    return u, dK
