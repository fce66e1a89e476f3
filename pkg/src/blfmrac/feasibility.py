"""Feasibility conditions for the constrained controller.

C1 bounds the feedback-gain norm by ``rho / ||B||``; C2 gives the smallest
admissible state bound once the input bound, reference bound and
disturbance are accounted for. The e_d bound handed to the controller and
the disturbance-margin condition follow from the same constants.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants as C
from .errors import DisturbanceMarginError, InfeasibleC1Error, InfeasibleC2Error, InvalidInputError
from .linalg import max_real_eigenpart, spectral_norm, symmetric_eig_extremes

__all__ = [
    "FeasibilityInputs",
    "FeasibilityReport",
    "FeasibilityMap",
    "default_rho",
    "check_c1",
    "derived_constants",
    "disturbance_floor",
    "minimal_state_bound",
    "ed_bar_selection",
    "feasibility_report",
    "region_sweep",
    "SWEEP_AXES",
]


def default_rho(Ar):
    return C.RHO_FRACTION * abs(max_real_eigenpart(Ar))


@dataclass(frozen=True, eq=False)
class FeasibilityInputs:
    rho: float
    kx_bar: float
    kr_bar: float
    r_bar: float
    x_bar_r: float
    norm_B: float
    d_bar: float
    P: np.ndarray
    Q: np.ndarray
    u1_bar: float
    x_bar: float
    lambda_max_P: float = field(init=False)
    lambda_min_Q: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lambda_max_P", symmetric_eig_extremes(self.P).lambda_max)
        object.__setattr__(self, "lambda_min_Q", symmetric_eig_extremes(self.Q).lambda_min)

    @classmethod
    def from_models(cls, plant, ref, reference_signal, gains, spec, rho=None):
        """Collect inputs; ``rho`` defaults to 95% of the stability margin of Ar."""
        limit = abs(max_real_eigenpart(ref.Ar))
        rho = C.RHO_FRACTION * limit if rho is None else float(rho)
        if not 0.0 < rho < limit:
            raise InvalidInputError(f"rho must lie in (0, {limit:.6g}), got {rho}")
        return cls(
            rho=rho,
            kx_bar=gains.kx_bar,
            kr_bar=gains.kr_bar,
            r_bar=reference_signal.r_bar,
            x_bar_r=spec.x_bar_r,
            norm_B=spectral_norm(plant.B),
            d_bar=plant.d_bar,
            P=ref.P,
            Q=ref.Q,
            u1_bar=spec.u1_bar,
            x_bar=spec.x_bar,
        )


def _core(rho, norm_B, kx_bar, kr_bar, r_bar, x_bar_r, d_bar, lam_P, lam_Q, u1_bar, x_bar):
    # Broadcasts over numpy arrays; the sweep relies on this.
    threshold = rho / norm_B
    gamma = 1.0 - norm_B * kx_bar / rho
    kappa = norm_B / rho * (kx_bar * x_bar_r + kr_bar * r_bar)
    floor = 2.0 * lam_P * d_bar / lam_Q
    numer = kappa + norm_B / rho * u1_bar + floor
    with np.errstate(divide="ignore", invalid="ignore"):
        x_min = np.where(gamma > 0.0, numer / np.where(gamma > 0.0, gamma, 1.0) + x_bar_r, np.inf)
    ed_bar = gamma * (x_bar - x_bar_r) - (kappa + norm_B / rho * u1_bar)
    return threshold, gamma, kappa, floor, x_min, ed_bar


def _unpack(inp):
    return (inp.rho, inp.norm_B, inp.kx_bar, inp.kr_bar, inp.r_bar, inp.x_bar_r, inp.d_bar,
            inp.lambda_max_P, inp.lambda_min_Q, inp.u1_bar, inp.x_bar)


def check_c1(inputs):
    """Returns (ok, threshold) with threshold = rho / ||B|| and strict comparison."""
    if not inputs.norm_B > 0.0:
        raise InvalidInputError("norm_B must be positive")
    threshold = inputs.rho / inputs.norm_B
    return bool(inputs.kx_bar < threshold), threshold


def derived_constants(inputs):
    """(gamma, kappa); gamma <= 0 means C1 fails."""
    _, gamma, kappa, *_ = _core(*_unpack(inputs))
    if not gamma > 0.0:
        raise InfeasibleC1Error(f"gamma = {gamma:.6g} <= 0: kx_bar violates C1")
    return float(gamma), float(kappa)


def disturbance_floor(inputs):
    return 2.0 * inputs.lambda_max_P * inputs.d_bar / inputs.lambda_min_Q


def minimal_state_bound(inputs):
    """Smallest admissible state bound, with ||u(t)|| replaced by its bound."""
    derived_constants(inputs)
    return float(_core(*_unpack(inputs))[4])


def ed_bar_selection(inputs):
    """The e_d bound ``gamma (x_bar - x_bar_r) - kappa - ||B|| u1_bar / rho``.

    Raises when it is not positive, or when it does not clear the
    disturbance floor ``2 lambda_max(P) d_bar / lambda_min(Q)``.
    """
    gamma, kappa = derived_constants(inputs)
    ed_bar = float(_core(*_unpack(inputs))[5])
    if not ed_bar > 0.0:
        raise InfeasibleC2Error(f"e_d bound {ed_bar:.6g} is not positive")
    floor = disturbance_floor(inputs)
    if not ed_bar > floor:
        raise DisturbanceMarginError(
            f"e_d bound {ed_bar:.6g} does not exceed disturbance floor {floor:.6g}"
        )
    return ed_bar


@dataclass(frozen=True)
class FeasibilityReport:
    rho: float
    c1_threshold: float
    gamma: float
    kappa: float
    ed_bar: float
    x_bar_min: float
    disturbance_floor: float
    c1_ok: bool
    c2_ok: bool
    eq33_ok: bool
    c1_margin: float
    c2_margin: float
    eq33_margin: float

    @property
    def ok(self):
        return self.c1_ok and self.c2_ok and self.eq33_ok

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self):
        flag = lambda b: "ok" if b else "FAIL"  # noqa: E731
        return "\n".join([
            f"rho            = {self.rho:.6g}",
            f"C1  kx_bar < {self.c1_threshold:.6g}   [{flag(self.c1_ok)}] margin {self.c1_margin:.6g}",
            f"gamma          = {self.gamma:.6g}",
            f"kappa          = {self.kappa:.6g}",
            f"C2  x_bar > {self.x_bar_min:.6g}    [{flag(self.c2_ok)}] margin {self.c2_margin:.6g}",
            f"e_d bound      = {self.ed_bar:.6g}",
            f"disturbance    : e_d bound > {self.disturbance_floor:.6g} "
            f"[{flag(self.eq33_ok)}] margin {self.eq33_margin:.6g}",
            f"feasible       = {self.ok}",
        ])


def feasibility_report(inputs):
    """Evaluate every condition without raising on infeasibility."""
    threshold, gamma, kappa, floor, x_min, ed_bar = (
        float(v) for v in _core(*_unpack(inputs))
    )
    c1_ok = inputs.kx_bar < threshold
    c2_ok = bool(gamma > 0.0 and inputs.x_bar > x_min)
    eq33_ok = bool(gamma > 0.0 and ed_bar > floor)
    return FeasibilityReport(
        rho=inputs.rho,
        c1_threshold=threshold,
        gamma=gamma,
        kappa=kappa,
        ed_bar=ed_bar,
        x_bar_min=x_min,
        disturbance_floor=floor,
        c1_ok=bool(c1_ok),
        c2_ok=c2_ok,
        eq33_ok=eq33_ok,
        c1_margin=threshold - inputs.kx_bar,
        c2_margin=inputs.x_bar - x_min,
        eq33_margin=ed_bar - floor,
    )


SWEEP_AXES = ("u1_bar", "x_bar", "d_bar", "kx_bar", "kr_bar", "r_bar", "x_bar_r", "rho")


@dataclass(frozen=True, eq=False)
class FeasibilityMap:
    """Boolean grid; ``cells[j, i]`` is feasibility at (axis0[i], axis1[j])."""

    axes: tuple
    values0: np.ndarray
    values1: np.ndarray
    cells: np.ndarray

    def to_text(self):
        head = f"{self.axes[1]}\\{self.axes[0]}," + ",".join(repr(float(v)) for v in self.values0)
        rows = [head]
        for j, y in enumerate(self.values1):
            rows.append(repr(float(y)) + "," + ",".join(str(int(c)) for c in self.cells[j]))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        head = lines[0].split(",")
        ax1, ax0 = head[0].split("\\")
        values0 = np.array([float(v) for v in head[1:]])
        values1 = []
        cells = []
        for ln in lines[1:]:
            parts = ln.split(",")
            values1.append(float(parts[0]))
            cells.append([bool(int(c)) for c in parts[1:]])
        return cls((ax0, ax1), values0, np.array(values1), np.array(cells, dtype=bool))


def region_sweep(inputs, values0, values1, axes=("u1_bar", "x_bar")):
    """Feasibility (C1 and C2 and the disturbance condition) over a 2-D grid."""
    if len(axes) != 2 or axes[0] == axes[1] or any(a not in SWEEP_AXES for a in axes):
        raise InvalidInputError(f"sweep axes must be two distinct names from {SWEEP_AXES}")
    values0 = np.asarray(values0, dtype=float).ravel()
    values1 = np.asarray(values1, dtype=float).ravel()
    if values0.size == 0 or values1.size == 0:
        raise InvalidInputError("sweep grid is empty")
    if np.any(values0 <= 0.0) or np.any(values1 <= 0.0):
        raise InvalidInputError("sweep grid values must be positive")
    g0, g1 = np.meshgrid(values0, values1)
    params = dict(zip(
        ("rho", "norm_B", "kx_bar", "kr_bar", "r_bar", "x_bar_r", "d_bar",
         "lam_P", "lam_Q", "u1_bar", "x_bar"),
        _unpack(inputs),
    ))
    params[axes[0]] = g0
    params[axes[1]] = g1
    threshold, gamma, _, floor, x_min, ed_bar = _core(**params)
    c1 = params["kx_bar"] < threshold
    c2 = (gamma > 0.0) & (params["x_bar"] > x_min)
    eq33 = (gamma > 0.0) & (ed_bar > floor)
    cells = np.broadcast_to(c1 & c2 & eq33, g0.shape).copy()
    return FeasibilityMap(tuple(axes), values0, values1, cells)

