"""Gradient and Lyapunov-identity self-checks for the barrier functions."""

from dataclasses import dataclass, replace

import numpy as np

from . import constants as C
from .controller import (
    AdaptiveGains,
    ConstraintSpec,
    ControllerState,
    blf_gradients,
    blf_values,
    composite_lyapunov_theta,
    controller_accel,
    ku_derivative,
    vtheta_rate,
    vtheta_rate_closed_form,
)

TERMS = ("V1", "V2", "V3", "V_theta_rate", "V_theta_flow")


@dataclass
class GradcheckReport:
    max_rel_error: dict
    n_points: int
    seed: int
    tolerance: float = C.GRADCHECK_RTOL

    @property
    def failures(self):
        return [k for k, v in self.max_rel_error.items() if not v <= self.tolerance]

    @property
    def ok(self):
        return not self.failures

    def lines(self):
        out = []
        for name, err in self.max_rel_error.items():
            flag = "ok" if err <= self.tolerance else "FAIL"
            out.append(f"{name:<14s} max rel error {err:.3e}  [{flag}]")
        return out


def _rel(a, b):
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def _fd_gradient(f, x, h):
    # fourth-order central stencil
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return g


def _random_spd(rng, k):
    G = rng.normal(size=(k, k))
    return G @ G.T + k * 0.5 * np.eye(k)


def _inside(rng, W, radius, k):
    """Random point with x^T W x = frac * radius^2, frac uniform in (0, 0.9)."""
    d = rng.normal(size=k)
    d /= np.sqrt(d @ W @ d)
    return d * radius * np.sqrt(rng.uniform(0.0, 0.9))


def random_problem(rng, n=4, m=2):
    P = _random_spd(rng, n)
    spec = ConstraintSpec(
        x_bar=rng.uniform(4.0, 8.0), u1_bar=rng.uniform(0.5, 2.0), u2_bar=rng.uniform(0.2, 1.0),
        M=_random_spd(rng, m), x_bar_r=rng.uniform(0.5, 2.0),
    )
    spec = spec.with_error_bound(rng.uniform(0.3, 1.0), P)
    gains = AdaptiveGains(_random_spd(rng, m), _random_spd(rng, m), rng.uniform(0.1, 2.0),
                          rng.uniform(1.0, 10.0), rng.uniform(1.0, 10.0))
    return P, spec, gains


def random_state(rng, spec, n=4, m=2):
    u = _inside(rng, spec.M, spec.u1_bar_primed, m)
    ud = _inside(rng, spec.M, spec.u2_bar_primed, m)
    state = ControllerState(u, ud, rng.normal(size=(m, n)), rng.normal(size=(m, m)))
    return state, rng.normal(size=n), rng.normal(size=m)


def gradcheck(seed=0, n_points=100, inject=None):
    """Max relative errors over ``n_points`` random interior points.

    ``inject`` names a term whose analytic side gets its sign flipped, to
    confirm the check can fail.
    """
    if inject is not None and inject not in TERMS:
        raise ValueError(f"unknown term {inject!r}; choose from {TERMS}")
    rng = np.random.default_rng(seed)
    sign = {t: (-1.0 if t == inject else 1.0) for t in TERMS}
    worst = dict.fromkeys(TERMS, 0.0)
    n, m = 4, 2
    for _ in range(n_points):
        P, spec, gains = random_problem(rng, n, m)
        ed = _inside(rng, P, spec.ed_bar_primed, n)
        state, x, v = random_state(rng, spec, n, m)
        g1, g2, g3 = blf_gradients(ed, state.u, state.u_dot, P, spec)

        h1 = 1e-4 * spec.ed_bar_primed / np.sqrt(np.max(np.diag(P)))
        fd1 = _fd_gradient(lambda e: blf_values(e, state.u, state.u_dot, P, spec)[0], ed, h1)
        h2 = 1e-4 * spec.u1_bar
        fd2 = _fd_gradient(lambda w: blf_values(ed, w, state.u_dot, P, spec)[1], state.u, h2)
        h3 = 1e-4 * spec.u2_bar
        fd3 = _fd_gradient(lambda w: blf_values(ed, state.u, w, P, spec)[2], state.u_dot, h3)
        worst["V1"] = max(worst["V1"], _rel(fd1, sign["V1"] * g1))
        worst["V2"] = max(worst["V2"], _rel(fd2, sign["V2"] * g2))
        worst["V3"] = max(worst["V3"], _rel(fd3, sign["V3"] * g3))

        closed = vtheta_rate_closed_form(state.u_dot, spec)
        assembled = vtheta_rate(state, v, gains, spec)
        worst["V_theta_rate"] = max(worst["V_theta_rate"],
                                    _rel(sign["V_theta_rate"] * assembled, closed))

        # derivative of V_theta along the exact flow of (u, u', Ku) with v frozen
        udd = controller_accel(state, v, spec)
        Kud = ku_derivative(state.u_dot, v, gains, spec)

        def along(s):
            moved = replace(state, u=state.u + s * state.u_dot, u_dot=state.u_dot + s * udd,
                            Ku=state.Ku + s * Kud)
            return composite_lyapunov_theta(moved, gains, spec)

        hs = 1e-5
        flow = (-along(2 * hs) + 8 * along(hs) - 8 * along(-hs) + along(-2 * hs)) / (12 * hs)
        worst["V_theta_flow"] = max(worst["V_theta_flow"],
                                    _rel(flow, sign["V_theta_flow"] * closed))
    return GradcheckReport(worst, n_points, seed)
