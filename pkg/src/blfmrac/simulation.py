"""Closed-loop assembly, fixed-step RK4 integration and runtime monitors."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from . import kernels
from .errors import BarrierBreachError, InvalidInputError, ScenarioValidationError, StepFailureError
from .linalg import left_pseudo_inverse, spectral_norm, symmetric_eig_extremes
from .system import matched_gains

__all__ = [
    "CONTROLLERS",
    "AugmentedState",
    "ControllerConfig",
    "ClosedLoop",
    "Trajectory",
    "MonitorReport",
    "simulate",
    "evaluate_monitors",
]

CONTROLLERS = ("proposed", "robust-mrac")


@dataclass(frozen=True, eq=False)
class AugmentedState:
    x: np.ndarray
    xr: np.ndarray
    e1: np.ndarray
    u: np.ndarray
    u_dot: np.ndarray
    Khat_x: np.ndarray
    Ku: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, n, m, t=0.0):
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(m), np.zeros(m),
                   np.zeros((m, n)), np.zeros((m, m)), t)

    @classmethod
    def from_vector(cls, z, n, m, t=0.0):
        z = np.asarray(z, dtype=float)
        if z.size != kernels.state_size(n, m):
            raise InvalidInputError(f"state vector has {z.size} entries, expected "
                                    f"{kernels.state_size(n, m)}")
        i = np.cumsum([0, n, n, n, m, m, m * n, m * m])
        return cls(z[i[0]:i[1]].copy(), z[i[1]:i[2]].copy(), z[i[2]:i[3]].copy(),
                   z[i[3]:i[4]].copy(), z[i[4]:i[5]].copy(),
                   z[i[5]:i[6]].reshape(m, n).copy(), z[i[6]:i[7]].reshape(m, m).copy(),
                   float(t))

    @property
    def n(self):
        return np.size(self.x)

    @property
    def m(self):
        return np.size(self.u)

    def to_vector(self):
        return np.concatenate([np.ravel(a).astype(float) for a in
                               (self.x, self.xr, self.e1, self.u, self.u_dot,
                                self.Khat_x, self.Ku)])

    @property
    def e(self):
        return np.asarray(self.x) - np.asarray(self.xr)

    @property
    def e_d(self):
        return self.e - np.asarray(self.e1)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """What the controller is allowed to know. No plant matrix, no true Kx."""

    B: np.ndarray
    Br: np.ndarray
    P: np.ndarray
    gains: object
    spec: object
    kind: str = "proposed"
    Kr: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.kind not in CONTROLLERS:
            raise InvalidInputError(f"unknown controller {self.kind!r}; choose from {CONTROLLERS}")
        object.__setattr__(self, "Kr", left_pseudo_inverse(self.B) @ np.asarray(self.Br, float))
        if self.kind == "proposed" and self.spec.ed_bar_primed is None:
            raise InvalidInputError("proposed controller needs spec.ed_bar_primed")

    def scalars(self):
        s = np.zeros(kernels.N_SCALARS)
        s[kernels.S_U1P2] = self.spec.u1_bar_primed**2
        s[kernels.S_U2P2] = self.spec.u2_bar_primed**2
        s[kernels.S_EDP2] = (self.spec.ed_bar_primed or 0.0) ** 2
        s[kernels.S_SIGMA] = self.gains.sigma_x
        s[kernels.S_KBAR] = self.gains.kx_bar
        s[kernels.S_EPS_P] = self.gains.eps_p
        s[kernels.S_GUARD] = C.GUARD_FACTOR
        s[kernels.S_MODE] = (kernels.MODE_PROPOSED if self.kind == "proposed"
                             else kernels.MODE_ROBUST_MRAC)
        return s


class ClosedLoop:
    """Truth plant + reference model + signals + controller configuration."""

    def __init__(self, plant, ref, reference_signal, disturbance, config):
        if disturbance.dim != plant.n or reference_signal.dim != plant.m:
            raise InvalidInputError("signal dimensions do not match the plant")
        self.plant = plant
        self.ref = ref
        self.reference_signal = reference_signal
        self.disturbance = disturbance
        self.config = config
        self.n = plant.n
        self.m = plant.m
        self.true_gains = matched_gains(plant, ref)
        self.params = kernels.pack_params(
            plant.A, plant.B, ref.Ar, ref.Br, ref.P, config.spec.M, config.Kr,
            config.gains.Gamma_x, config.gains.Gamma_u, config.scalars(),
            reference_signal.bank.arrays(), disturbance.bank.arrays(),
        )

    @property
    def kind(self):
        return self.config.kind

    def _breach(self, status, t):
        name = kernels.BARRIER_NAMES[status]
        return BarrierBreachError(name, float("nan"), f"barrier breach on {name!r} at t={t:.6g}")

    def derivative(self, state):
        """Right-hand side as an AugmentedState of rates (``t`` field = 1)."""
        z = state.to_vector()
        out = np.empty_like(z)
        status = kernels.rhs(float(state.t), z, self.params, out)
        if status != kernels.OK:
            raise self._breach(status, state.t)
        return AugmentedState.from_vector(out, self.n, self.m, 1.0)

    def rk4_step(self, state, dt, dt_min=C.DT_MIN):
        if not dt > 0.0:
            raise InvalidInputError("dt must be positive")
        z = state.to_vector()
        k1 = np.empty_like(z)
        status = kernels.rhs(float(state.t), z, self.params, k1)
        if status != kernels.OK:
            raise self._breach(status, state.t)
        status, t_new, h, _ = kernels.advance(float(state.t), z, k1, float(dt), float(dt_min),
                                              self.params)
        if status != kernels.OK:
            raise StepFailureError(kernels.BARRIER_NAMES[status], t_new, h)
        return AugmentedState.from_vector(z, self.n, self.m, float(state.t) + dt)

    def admissibility_violations(self, state):
        """Names of the initial-condition sets that ``state`` is outside of."""
        bad = []
        spec = self.config.spec
        M = spec.M
        if self.kind == "proposed":
            if not state.u @ M @ state.u < spec.u1_bar_primed**2:
                bad.append("u(0) outside the input-magnitude set")
            if not state.u_dot @ M @ state.u_dot < spec.u2_bar_primed**2:
                bad.append("u_dot(0) outside the input-rate set")
            ed = state.e_d
            if not ed @ self.ref.P @ ed < spec.ed_bar_primed**2:
                bad.append("e_d(0) outside the difference-error set")
            if np.linalg.norm(state.Khat_x) > self.config.gains.kx_bar:
                bad.append("Khat_x(0) outside the projection ball")
        if np.any(np.asarray(state.e1) != 0.0):
            bad.append("e1(0) must be zero")
        return bad


@dataclass(eq=False)
class Trajectory:
    """Decimated samples plus derived scalar channels.

    For the robust-MRAC baseline, ``u`` and ``u_dot`` are the algebraic
    control and its exact time derivative, and the barrier-based channels
    (``V_theta``, ``V_phi``, ``alpha``) are NaN.
    """

    kind: str
    t: np.ndarray
    x: np.ndarray
    xr: np.ndarray
    e1: np.ndarray
    u: np.ndarray
    u_dot: np.ndarray
    Khat_x: np.ndarray
    Ku: np.ndarray
    final_state: AugmentedState = None
    halvings: int = 0
    derived: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    @property
    def e(self):
        return self.x - self.xr

    @property
    def e_d(self):
        return self.x - self.xr - self.e1

    def state_at(self, k):
        return AugmentedState(self.x[k], self.xr[k], self.e1[k], self.u[k], self.u_dot[k],
                              self.Khat_x[k], self.Ku[k], float(self.t[k]))

    def __getattr__(self, name):
        derived = self.__dict__.get("derived", {})
        if name in derived:
            return derived[name]
        raise AttributeError(name)


def _log_barrier(q, bound2):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(q < bound2, -0.5 * np.log1p(-q / bound2), np.inf)


def _derive(traj, loop):
    cfg = loop.config
    spec = cfg.spec
    M = spec.M
    P = loop.ref.P
    d = {}
    d["norm_x"] = np.linalg.norm(traj.x, axis=1)
    d["norm_u"] = np.linalg.norm(traj.u, axis=1)
    d["norm_udot"] = np.linalg.norm(traj.u_dot, axis=1)
    d["norm_e"] = np.linalg.norm(traj.e, axis=1)
    d["norm_ed"] = np.linalg.norm(traj.e_d, axis=1)
    d["norm_khat"] = np.linalg.norm(traj.Khat_x, axis=(1, 2))
    d["margin_x"] = spec.x_bar - d["norm_x"]
    d["margin_u"] = spec.u1_bar - d["norm_u"]
    d["margin_udot"] = spec.u2_bar - d["norm_udot"]
    ed_bar = spec.ed_bar if spec.ed_bar is not None else np.nan
    d["margin_ed"] = ed_bar - d["norm_ed"]
    N = len(traj)
    if cfg.kind == "proposed":
        u1p2 = spec.u1_bar_primed**2
        u2p2 = spec.u2_bar_primed**2
        edp2 = spec.ed_bar_primed**2
        qu = np.einsum("ki,ij,kj->k", traj.u, M, traj.u)
        qud = np.einsum("ki,ij,kj->k", traj.u_dot, M, traj.u_dot)
        qed = np.einsum("ki,ij,kj->k", traj.e_d, P, traj.e_d)
        Gu_inv = np.linalg.inv(cfg.gains.Gamma_u)
        Gx_inv = np.linalg.inv(cfg.gains.Gamma_x)
        Kt = traj.Khat_x - loop.true_gains.Kx
        d["V_theta"] = (_log_barrier(qu, u1p2) + _log_barrier(qud, u2p2)
                        + 0.5 * np.einsum("kji,jl,kli->k", traj.Ku, Gu_inv, traj.Ku))
        d["V_phi"] = _log_barrier(qed, edp2) + 0.5 * np.einsum("kji,jl,kli->k", Kt, Gx_inv, Kt)
        with np.errstate(divide="ignore", invalid="ignore"):
            d["alpha"] = (u2p2 - qud) / (u1p2 - qu)
        d["barrier_u"] = (u1p2 - qu) / u1p2
        d["barrier_udot"] = (u2p2 - qud) / u2p2
        d["barrier_ed"] = (edp2 - qed) / edp2
    else:
        for key in ("V_theta", "V_phi", "alpha", "barrier_u", "barrier_udot", "barrier_ed"):
            d[key] = np.full(N, np.nan)
    traj.derived = d


def _baseline_inputs(loop, t, x, xr, K):
    """Algebraic control and its exact derivative for the baseline controller."""
    cfg = loop.config
    plant = loop.plant
    N = t.size
    r = loop.reference_signal.bank.sample(t)
    dist = loop.disturbance.bank.sample(t)
    rdot = np.stack([loop.reference_signal.bank.rate(tk) for tk in t]) if N else r
    u = np.einsum("kij,kj->ki", K, x) + r @ cfg.Kr.T
    xdot = x @ plant.A.T + u @ plant.B.T + dist
    e = x - xr
    G = cfg.gains.Gamma_x
    BtP = plant.B.T @ loop.ref.P
    Kdot = (-np.einsum("ij,kj,kl->kil", G, e @ BtP.T, x)
            - cfg.gains.sigma_x * np.einsum("ij,kjl->kil", G, K))
    udot = np.einsum("kij,kj->ki", Kdot, x) + np.einsum("kij,kj->ki", K, xdot) + rdot @ cfg.Kr.T
    return u, udot


def _trajectory_from(loop, times, states, final_z, t_final, halvings):
    n, m = loop.n, loop.m
    i = np.cumsum([0, n, n, n, m, m, m * n, m * m])
    N = times.size
    x = states[:, i[0]:i[1]]
    xr = states[:, i[1]:i[2]]
    e1 = states[:, i[2]:i[3]]
    K = states[:, i[5]:i[6]].reshape(N, m, n)
    Ku = states[:, i[6]:i[7]].reshape(N, m, m)
    if loop.kind == "robust-mrac":
        u, udot = _baseline_inputs(loop, times, x, xr, K)
    else:
        u = states[:, i[3]:i[4]]
        udot = states[:, i[4]:i[5]]
    traj = Trajectory(loop.kind, times.copy(), x.copy(), xr.copy(), e1.copy(), u.copy(),
                      udot.copy(), K.copy(), Ku.copy(),
                      AugmentedState.from_vector(final_z, n, m, t_final), int(halvings))
    _derive(traj, loop)
    return traj


@dataclass
class MonitorReport:
    max_norm_x: float
    max_norm_u: float
    max_norm_udot: float
    max_norm_e: float
    max_norm_ed: float
    min_margin_x: float
    min_margin_u: float
    min_margin_udot: float
    min_margin_ed: float
    verdicts: dict
    first_violation: dict
    vtheta_max_increase: float = None
    vtheta_ok: bool = None
    vtheta_first_violation: int = None
    vphi_bound: float = None
    vphi_max: float = None
    vphi_ok: bool = None
    vphi_first_violation: int = None
    khat_max_norm: float = None
    khat_ok: bool = None
    udot_trend: float = None
    completed: bool = True
    failure: str = None

    @property
    def constraints_ok(self):
        return all(self.verdicts.values())

    @property
    def monitors_ok(self):
        return all(v is not False for v in (self.vtheta_ok, self.vphi_ok, self.khat_ok))

    @property
    def ok(self):
        return self.completed and self.constraints_ok and self.monitors_ok

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items()}
        out.update(constraints_ok=self.constraints_ok, monitors_ok=self.monitors_ok, ok=self.ok)
        return out


def _first(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def evaluate_monitors(traj, loop):
    """Constraint maxima/margins, V_theta non-increase, V_phi bound, projection bound."""
    if len(traj) == 0:
        raise InvalidInputError("empty trajectory")
    spec = loop.config.spec
    gains = loop.config.gains
    d = traj.derived
    verdicts = {}
    first = {}
    for key, norm, bound in (("x", "norm_x", spec.x_bar), ("u", "norm_u", spec.u1_bar),
                             ("u_dot", "norm_udot", spec.u2_bar),
                             ("e_d", "norm_ed", spec.ed_bar)):
        if bound is None:
            continue
        bad = ~(d[norm] < bound)
        verdicts[key] = not bad.any()
        first[key] = _first(bad)
    rep = MonitorReport(
        max_norm_x=float(d["norm_x"].max()),
        max_norm_u=float(d["norm_u"].max()),
        max_norm_udot=float(d["norm_udot"].max()),
        max_norm_e=float(d["norm_e"].max()),
        max_norm_ed=float(d["norm_ed"].max()),
        min_margin_x=float(d["margin_x"].min()),
        min_margin_u=float(d["margin_u"].min()),
        min_margin_udot=float(d["margin_udot"].min()),
        min_margin_ed=float(np.min(d["margin_ed"])),
        verdicts=verdicts,
        first_violation=first,
        khat_max_norm=float(d["norm_khat"].max()),
    )
    N = len(traj)
    if N >= 4:
        q = N // 4
        early = float(np.mean(d["norm_udot"][:q]))
        late = float(np.mean(d["norm_udot"][-q:]))
        rep.udot_trend = late / early if early > 0.0 else 0.0
    if loop.kind == "proposed":
        V = d["V_theta"]
        inc = np.diff(V)
        tol = C.VTHETA_STEP_RTOL * (1.0 + np.abs(V[:-1]))
        bad = ~(inc <= tol)
        rep.vtheta_max_increase = float(inc.max()) if inc.size else 0.0
        rep.vtheta_ok = not bad.any() and bool(np.all(np.isfinite(V)))
        j = _first(bad)
        rep.vtheta_first_violation = None if j is None else j + 1

        lam_q = symmetric_eig_extremes(loop.ref.Q).lambda_min
        rate = min(lam_q, gains.sigma_x)
        c = gains.sigma_x * spectral_norm(loop.true_gains.Kx) ** 2 / 2.0
        W = d["V_phi"]
        rep.vphi_bound = float(W[0] + c / rate)
        rep.vphi_max = float(np.max(W))
        bad = ~(W < rep.vphi_bound + C.VPHI_SLACK)
        rep.vphi_ok = not bad.any()
        rep.vphi_first_violation = _first(bad)

        rep.khat_ok = bool(np.all(d["norm_khat"] <= gains.kx_bar + C.KHAT_NORM_SLACK))
    return rep


def simulate(loop, initial=None, horizon=60.0, dt=C.DEFAULT_DT, decimation=C.DEFAULT_DECIMATION,
             dt_min=C.DT_MIN, raise_on_failure=True):
    """Integrate the closed loop and evaluate monitors.

    Returns ``(trajectory, report)``. A barrier breach that survives step
    halving raises StepFailureError unless ``raise_on_failure`` is False,
    in which case the truncated trajectory is returned with
    ``report.completed`` False.
    """
    if initial is None:
        initial = AugmentedState.zeros(loop.n, loop.m)
    if not (horizon > 0.0 and dt > 0.0):
        raise InvalidInputError("horizon and dt must be positive")
    if int(decimation) < 1:
        raise InvalidInputError("decimation must be >= 1")
    bad = loop.admissibility_violations(initial)
    if bad:
        raise ScenarioValidationError("inadmissible initial state: " + "; ".join(bad),
                                      fields=tuple(bad))
    n_steps = int(round(horizon / dt))
    if not math.isclose(n_steps * dt, horizon, rel_tol=1e-9):
        raise InvalidInputError("horizon must be an integer multiple of dt")
    z0 = initial.to_vector()
    t0 = float(initial.t)
    times, states, zf, status, t_fail, h_fail, halvings = kernels.integrate(
        z0, t0, float(dt), n_steps, int(decimation), float(dt_min), loop.params)
    failure = None
    if status != kernels.OK:
        err = StepFailureError(kernels.BARRIER_NAMES[status], t_fail, h_fail)
        if raise_on_failure:
            raise err
        failure = str(err)
    traj = _trajectory_from(loop, times, states, zf, t_fail, halvings)
    rep = evaluate_monitors(traj, loop)
    if failure:
        rep.completed = False
        rep.failure = failure
    return traj, rep
