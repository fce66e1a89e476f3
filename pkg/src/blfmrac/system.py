"""Plant, reference model, exogenous signals and matching gains."""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from . import constants as C
from . import kernels
from .errors import InvalidInputError
from .linalg import (
    as_matrix,
    left_pseudo_inverse,
    max_real_eigenpart,
    solve_lyapunov,
    spectral_norm,
    symmetric_eig_extremes,
)

__all__ = [
    "PlantModel",
    "ReferenceModel",
    "SinusoidBank",
    "ReferenceSignal",
    "DisturbanceSignal",
    "MatchedGains",
    "ReferenceBoundReport",
    "matched_gains",
    "plant_derivative",
    "reference_derivative",
    "verify_reference_bound",
    "peak_norm",
]


def _vector(v, dim, name):
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size != dim:
        raise InvalidInputError(f"{name}: expected length {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class PlantModel:
    """``x' = A x + B u + d`` with ``||d(t)|| < d_bar``.

    ``A`` is the truth used by the simulator; controller code never reads it.
    """

    A: np.ndarray
    B: np.ndarray
    d_bar: float = 0.0

    def __post_init__(self):
        A = as_matrix(self.A, "plant.A")
        B = as_matrix(self.B, "plant.B")
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"plant.A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise InvalidInputError(
                f"plant.B has {B.shape[0]} rows but plant.A is {A.shape[0]}x{A.shape[0]}"
            )
        if B.shape[1] > B.shape[0]:
            raise InvalidInputError("plant.B must have at least as many rows as columns")
        if symmetric_eig_extremes(B.T @ B).lambda_min <= C.RANK_TOL:
            raise InvalidInputError("plant.B is not full column rank")
        d_bar = float(self.d_bar)
        if not d_bar >= 0.0:
            raise InvalidInputError("plant.d_bar must be >= 0")
        if max_real_eigenpart(A) >= 0.0:
            warnings.warn("plant.A is not Hurwitz; the feasibility analysis assumes it is",
                          stacklevel=3)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "d_bar", d_bar)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    """``xr' = Ar xr + Br r``; ``P`` solves ``Ar^T P + P Ar + Q = 0``."""

    Ar: np.ndarray
    Br: np.ndarray
    Q: np.ndarray
    P: np.ndarray = field(init=False)

    def __post_init__(self):
        Ar = as_matrix(self.Ar, "reference.Ar")
        Br = as_matrix(self.Br, "reference.Br")
        Q = as_matrix(self.Q, "reference.Q")
        if Br.shape[0] != Ar.shape[0]:
            raise InvalidInputError("reference.Br rows must match reference.Ar")
        object.__setattr__(self, "Ar", Ar)
        object.__setattr__(self, "Br", Br)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", solve_lyapunov(Ar, Q))

    @property
    def n(self):
        return self.Ar.shape[0]


@dataclass(frozen=True, eq=False)
class SinusoidBank:
    """``s_i(t) = offset_i + sum_k amplitude[k, i] sin(omega[k, i] t + phase[k, i])``."""

    amplitude: np.ndarray
    omega: np.ndarray
    phase: np.ndarray
    offset: np.ndarray

    @classmethod
    def zeros(cls, dim):
        z = np.zeros((0, dim))
        return cls(z, z.copy(), z.copy(), np.zeros(dim))

    @property
    def dim(self):
        return self.offset.size

    def arrays(self):
        return (self.amplitude, self.omega, self.phase, self.offset)

    def __call__(self, t):
        return kernels.bank_eval(float(t), *self.arrays())

    def rate(self, t):
        return kernels.bank_rate(float(t), *self.arrays())

    def sample(self, ts):
        ts = np.asarray(ts, dtype=float)
        out = np.broadcast_to(self.offset, ts.shape + (self.dim,)).copy()
        for k in range(self.amplitude.shape[0]):
            out += self.amplitude[k] * np.sin(np.multiply.outer(ts, self.omega[k]) + self.phase[k])
        return out

    def scaled(self, factor):
        return SinusoidBank(self.amplitude * factor, self.omega, self.phase, self.offset * factor)

    def rss_bound(self):
        """Analytic sup-norm bound: RSS over channels of sum |amplitude| + |offset|."""
        per_channel = np.abs(self.offset) + np.abs(self.amplitude).sum(axis=0)
        return float(np.sqrt(np.sum(per_channel**2)))


def _common_period(omegas, max_den=1000):
    w = np.abs(omegas[omegas != 0.0])
    if w.size == 0:
        return None
    base = w.min()
    dens = []
    for wi in w:
        frac = Fraction(wi / base).limit_denominator(max_den)
        if abs(float(frac) - wi / base) > 1e-12 * wi / base:
            return None
        dens.append(frac.denominator)
    lcm = 1
    for d in dens:
        lcm = lcm * d // math.gcd(lcm, d)
    if lcm > max_den:
        return None
    return 2.0 * math.pi * lcm / base


def peak_norm(bank, grid=20000):
    """sup_t ||s(t)||; exact-period search when frequencies are commensurate.

    Falls back to the analytic RSS bound when no common period exists.
    """
    if bank.amplitude.size == 0 or not np.any(bank.amplitude):
        return float(np.linalg.norm(bank.offset))
    period = _common_period(bank.omega[bank.amplitude != 0.0])
    if period is None:
        return bank.rss_bound()
    ts = np.linspace(0.0, period, grid + 1)
    norms = np.linalg.norm(bank.sample(ts), axis=1)
    best = float(norms.max())
    h = period / grid
    for i in np.argsort(norms)[-8:]:
        res = minimize_scalar(
            lambda s: -np.linalg.norm(bank.sample(np.array([s]))[0]),
            bounds=(ts[i] - h, ts[i] + h),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


REFERENCE_KINDS = ("zero", "constant", "sinusoid-vector")
DISTURBANCE_KINDS = ("zero", "sinusoid-vector", "bounded-random-smooth")


@dataclass(frozen=True, eq=False)
class ReferenceSignal:
    """Command r(t). Sinusoid channels are ``amplitude * sin(omega t + phase)``."""

    kind: str
    dim: int
    amplitude: np.ndarray = None
    omega: np.ndarray = None
    phase: np.ndarray = None
    values: np.ndarray = None
    r_bar: float = None

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise InvalidInputError(f"unknown reference kind {self.kind!r}")
        m = int(self.dim)
        zero = np.zeros(m)
        amp = zero if self.amplitude is None else _vector(self.amplitude, m, "amplitude")
        om = zero if self.omega is None else _vector(self.omega, m, "omega")
        ph = zero if self.phase is None else _vector(self.phase, m, "phase")
        val = zero if self.values is None else _vector(self.values, m, "values")
        if self.kind == "sinusoid-vector":
            natural = float(np.sqrt(np.sum(amp**2)))
        elif self.kind == "constant":
            natural = float(np.linalg.norm(val))
        else:
            natural = 0.0
        r_bar = natural if self.r_bar is None else float(self.r_bar)
        if r_bar < natural * (1.0 - 1e-15):
            raise InvalidInputError(f"r_bar {r_bar} is below the analytic bound {natural}")
        for name, value in (("dim", m), ("amplitude", amp), ("omega", om), ("phase", ph),
                            ("values", val), ("r_bar", r_bar)):
            object.__setattr__(self, name, value)

    @property
    def bank(self):
        m = self.dim
        if self.kind == "sinusoid-vector":
            return SinusoidBank(self.amplitude[None, :], self.omega[None, :],
                                self.phase[None, :], np.zeros(m))
        if self.kind == "constant":
            return SinusoidBank(np.zeros((0, m)), np.zeros((0, m)), np.zeros((0, m)),
                                self.values.copy())
        return SinusoidBank.zeros(m)

    def __call__(self, t):
        return self.bank(t)


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """Bounded unmatched disturbance d(t).

    Nonzero kinds are rescaled so that ``sup ||d|| = level * bound``, with
    ``level < 1`` keeping the bound strict. ``sinusoid-vector`` uses the
    given channel sinusoids; ``bounded-random-smooth`` draws ``n_terms``
    sinusoids per channel from ``seed``.
    """

    kind: str
    dim: int
    bound: float = 0.0
    amplitude: np.ndarray = None
    omega: np.ndarray = None
    phase: np.ndarray = None
    level: float = 0.99
    n_terms: int = 3
    seed: int = 0
    _bank: SinusoidBank = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InvalidInputError(f"unknown disturbance kind {self.kind!r}")
        n = int(self.dim)
        object.__setattr__(self, "dim", n)
        bound = float(self.bound)
        if bound < 0.0:
            raise InvalidInputError("disturbance bound must be >= 0")
        if not 0.0 < self.level < 1.0:
            raise InvalidInputError("disturbance level must lie in (0, 1)")
        object.__setattr__(self, "bound", bound)
        zero = np.zeros(n)
        for name in ("amplitude", "omega", "phase"):
            val = getattr(self, name)
            object.__setattr__(self, name, zero if val is None else _vector(val, n, name))

        if self.kind == "zero" or bound == 0.0:
            bank = SinusoidBank.zeros(n)
        elif self.kind == "sinusoid-vector":
            raw = SinusoidBank(self.amplitude[None, :], self.omega[None, :],
                               self.phase[None, :], np.zeros(n))
            peak = peak_norm(raw)
            if peak == 0.0:
                raise InvalidInputError("sinusoid-vector disturbance has zero amplitude")
            bank = raw.scaled(self.level * bound / peak)
        else:
            rng = np.random.default_rng(self.seed)
            k = int(self.n_terms)
            amp = rng.uniform(0.2, 1.0, size=(k, n))
            om = rng.uniform(0.2, 5.0, size=(k, n))
            ph = rng.uniform(0.0, 2.0 * np.pi, size=(k, n))
            raw = SinusoidBank(amp, om, ph, np.zeros(n))
            bank = raw.scaled(self.level * bound / raw.rss_bound())
        object.__setattr__(self, "_bank", bank)

    @property
    def bank(self):
        return self._bank

    def __call__(self, t):
        return self._bank(t)


@dataclass(frozen=True)
class MatchedGains:
    Kx: np.ndarray
    Kr: np.ndarray
    residual_A: float
    residual_B: float

    @property
    def matched(self):
        return self.residual_A <= C.MATCHING_TOL and self.residual_B <= C.MATCHING_TOL


def matched_gains(plant, ref):
    """Least-squares matching gains ``Kx = B^+(Ar - A)``, ``Kr = B^+ Br``."""
    Bp = left_pseudo_inverse(plant.B)
    Kx = Bp @ (ref.Ar - plant.A)
    Kr = Bp @ ref.Br
    res_a = spectral_norm(plant.A + plant.B @ Kx - ref.Ar)
    res_b = spectral_norm(plant.B @ Kr - ref.Br)
    return MatchedGains(Kx, Kr, res_a, res_b)


def plant_derivative(plant, x, u, d):
    x = _vector(x, plant.n, "x")
    u = _vector(u, plant.m, "u")
    d = _vector(d, plant.n, "d")
    return plant.A @ x + plant.B @ u + d


def reference_derivative(ref, xr, r):
    xr = _vector(xr, ref.n, "xr")
    r = _vector(r, ref.Br.shape[1], "r")
    return ref.Ar @ xr + ref.Br @ r


@dataclass(frozen=True)
class ReferenceBoundReport:
    sup_norm: float
    x_bar_r: float
    horizon: float

    @property
    def ok(self):
        return self.sup_norm <= self.x_bar_r


def verify_reference_bound(ref, sig, horizon, x_bar_r, dt=1e-3):
    """Empirical sup of ||xr(t)|| from rest over [0, horizon]."""
    if not horizon > 0.0:
        raise InvalidInputError("horizon must be positive")
    n_steps = int(math.ceil(horizon / dt))
    sup = kernels.linear_sup_norm(
        np.ascontiguousarray(ref.Ar), np.ascontiguousarray(ref.Br),
        *[np.ascontiguousarray(a) for a in sig.bank.arrays()],
        np.zeros(ref.n), horizon / n_steps, n_steps,
    )
    return ReferenceBoundReport(float(sup), float(x_bar_r), float(horizon))
