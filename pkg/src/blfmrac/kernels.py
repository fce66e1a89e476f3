"""Hot loops: signal evaluation, closed-loop right-hand side, RK4 driver.

The augmented state is a flat vector laid out as::

    [x (n) | xr (n) | e1 (n) | u (m) | u_dot (m) | Khat_x (m*n, row-major) | Ku (m*m)]

Model data travel as the tuple built by :func:`pack_params`. Kernels report
barrier problems through integer status codes instead of raising, since
they may run under ``numba.njit``.
"""

import numpy as np

from ._accel import jit

OK = 0
BREACH_U = 1
BREACH_UDOT = 2
BREACH_ED = 3
BARRIER_NAMES = {BREACH_U: "u", BREACH_UDOT: "u_dot", BREACH_ED: "e_d"}

MODE_PROPOSED = 0
MODE_ROBUST_MRAC = 1

# positions inside the scalar parameter vector
S_U1P2 = 0
S_U2P2 = 1
S_EDP2 = 2
S_SIGMA = 3
S_KBAR = 4
S_EPS_P = 5
S_GUARD = 6
S_MODE = 7
N_SCALARS = 8


def state_size(n, m):
    return 3 * n + 2 * m + m * n + m * m


def pack_params(A, B, Ar, Br, P, M, Kr, Gamma_x, Gamma_u, scalars, ref_bank, dist_bank):
    """Assemble the kernel parameter tuple; every array is C-contiguous float64."""
    c = np.ascontiguousarray
    BtP = B.T @ P
    return (
        c(A, float), c(B, float), c(Ar, float), c(Br, float), c(P, float),
        c(M, float), c(Kr, float), c(Gamma_x, float), c(Gamma_u, float),
        c(BtP, float), c(scalars, float),
        c(ref_bank[0], float), c(ref_bank[1], float), c(ref_bank[2], float), c(ref_bank[3], float),
        c(dist_bank[0], float), c(dist_bank[1], float), c(dist_bank[2], float), c(dist_bank[3], float),
    )


@jit
def bank_eval(t, amp, omega, phase, offset):
    out = offset.copy()
    for k in range(amp.shape[0]):
        for i in range(amp.shape[1]):
            if amp[k, i] != 0.0:
                out[i] += amp[k, i] * np.sin(omega[k, i] * t + phase[k, i])
    return out


@jit
def bank_rate(t, amp, omega, phase, offset):
    out = np.zeros_like(offset)
    for k in range(amp.shape[0]):
        for i in range(amp.shape[1]):
            if amp[k, i] != 0.0:
                out[i] += amp[k, i] * omega[k, i] * np.cos(omega[k, i] * t + phase[k, i])
    return out


@jit
def project_ball(K, D, kbar, eps):
    """Smooth projection of the rate D onto the Frobenius ball ||K|| <= kbar.

    Inside the inner ball the rate passes through. In the boundary layer an
    outward rate has its radial component scaled by (1 - f), with f rising
    from 0 on the inner sphere to 1 on ||K|| = kbar.
    """
    k2 = np.sum(K * K)
    f = (k2 - (1.0 - eps) * kbar * kbar) / (eps * kbar * kbar)
    if f <= 0.0:
        return D
    s = np.sum(D * K)
    if s <= 0.0:
        return D
    return D - (f * s / k2) * K


@jit
def rhs(t, z, prm, out):
    A, B, Ar, Br, P, M, Kr, Gx, Gu, BtP, sc, ra, rw, rp, ro, da, dw, dp, do = prm
    n = A.shape[0]
    m = B.shape[1]
    i_xr = n
    i_e1 = 2 * n
    i_u = 3 * n
    i_ud = 3 * n + m
    i_k = 3 * n + 2 * m
    i_ku = i_k + m * n
    x = z[0:n]
    xr = z[i_xr:i_e1]
    K = z[i_k:i_ku].reshape((m, n))
    r = bank_eval(t, ra, rw, rp, ro)
    d = bank_eval(t, da, dw, dp, do)
    guard = sc[S_GUARD]
    out[i_xr:i_e1] = Ar @ xr + Br @ r
    if int(sc[S_MODE]) == MODE_ROBUST_MRAC:
        u_alg = K @ x + Kr @ r
        e = x - xr
        out[0:n] = A @ x + B @ u_alg + d
        out[i_e1:i_k] = 0.0
        kd = -(Gx @ np.outer(BtP @ e, x)) - sc[S_SIGMA] * (Gx @ K)
        out[i_k:i_ku] = kd.ravel()
        out[i_ku:] = 0.0
        return OK

    e1 = z[i_e1:i_u]
    u = z[i_u:i_ud]
    ud = z[i_ud:i_k]
    Ku = z[i_ku:].reshape((m, m))
    u1p2 = sc[S_U1P2]
    u2p2 = sc[S_U2P2]
    edp2 = sc[S_EDP2]

    ed = x - xr - e1
    q = ed @ (P @ ed)
    den_e = edp2 - q
    if not den_e > guard * edp2:
        return BREACH_ED
    den_1 = u1p2 - u @ (M @ u)
    if not den_1 > guard * u1p2:
        return BREACH_U
    Mud = M @ ud
    den_2 = u2p2 - ud @ Mud
    if not den_2 > guard * u2p2:
        return BREACH_UDOT

    v = K @ x + Kr @ r
    alpha = den_2 / den_1
    out[0:n] = A @ x + B @ u + d
    out[i_e1:i_u] = Ar @ e1 + B @ (u - v)
    out[i_u:i_ud] = ud
    out[i_ud:i_k] = Ku @ v - ud - alpha * u
    raw = -(Gx @ np.outer(BtP @ ed, x)) / den_e - sc[S_SIGMA] * (Gx @ K)
    out[i_k:i_ku] = project_ball(K, raw, sc[S_KBAR], sc[S_EPS_P]).ravel()
    out[i_ku:] = (-(Gu @ np.outer(Mud, v)) / den_2).ravel()
    return OK


@jit
def rk4_attempt(t, z, k1, h, prm, znew, knew):
    """One classical RK4 step from (t, z) with precomputed k1 = f(t, z).

    On success ``znew`` holds the update and ``knew`` = f(t + h, znew), so
    the end point is known to be admissible.
    """
    k2 = np.empty_like(z)
    k3 = np.empty_like(z)
    k4 = np.empty_like(z)
    st = rhs(t + 0.5 * h, z + 0.5 * h * k1, prm, k2)
    if st != OK:
        return st
    st = rhs(t + 0.5 * h, z + 0.5 * h * k2, prm, k3)
    if st != OK:
        return st
    st = rhs(t + h, z + h * k3, prm, k4)
    if st != OK:
        return st
    znew[:] = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rhs(t + h, znew, prm, knew)


@jit
def advance(t, z, k1, dt, dt_min, prm):
    """Advance (z, k1) in place across [t, t + dt], halving on barrier breach.

    Returns (status, time reached, smallest step tried, number of halvings).
    """
    target = t + dt
    tt = t
    h = dt
    halvings = 0
    znew = np.empty_like(z)
    knew = np.empty_like(z)
    while target - tt > 1e-12 * dt:
        hh = min(h, target - tt)
        st = rk4_attempt(tt, z, k1, hh, prm, znew, knew)
        if st == OK:
            z[:] = znew
            k1[:] = knew
            tt += hh
        else:
            h *= 0.5
            halvings += 1
            if h < dt_min:
                return st, tt, h, halvings
    return OK, target, h, halvings


@jit
def integrate(z0, t0, dt, n_steps, decimation, dt_min, prm):
    """Fixed-step RK4 over n_steps, storing every ``decimation``-th state.

    Returns (times, states, final_state, status, t_fail, h_fail, halvings).
    ``states`` is truncated to the samples reached before any failure.
    """
    nz = z0.size
    n_samples = n_steps // decimation + 1
    times = np.empty(n_samples)
    states = np.empty((n_samples, nz))
    z = z0.copy()
    k1 = np.empty(nz)
    times[0] = t0
    states[0, :] = z
    total_halvings = 0
    st = rhs(t0, z, prm, k1)
    if st != OK:
        return times[:1], states[:1], z, st, t0, dt, 0
    j = 1
    for step in range(n_steps):
        t = t0 + step * dt
        st, t_reached, h, halvings = advance(t, z, k1, dt, dt_min, prm)
        total_halvings += halvings
        if st != OK:
            return times[:j], states[:j], z, st, t_reached, h, total_halvings
        if (step + 1) % decimation == 0:
            times[j] = t0 + (step + 1) * dt
            states[j, :] = z
            j += 1
    return times[:j], states[:j], z, OK, t0 + n_steps * dt, dt, total_halvings


@jit
def linear_sup_norm(Ar, Br, ra, rw, rp, ro, x0, dt, n_steps):
    """RK4 on xr' = Ar xr + Br r(t); returns max ||xr|| over the grid."""
    x = x0.copy()
    best = np.sqrt(np.sum(x * x))
    for step in range(n_steps):
        t = step * dt
        r0 = bank_eval(t, ra, rw, rp, ro)
        rh = bank_eval(t + 0.5 * dt, ra, rw, rp, ro)
        r1 = bank_eval(t + dt, ra, rw, rp, ro)
        k1 = Ar @ x + Br @ r0
        k2 = Ar @ (x + 0.5 * dt * k1) + Br @ rh
        k3 = Ar @ (x + 0.5 * dt * k2) + Br @ rh
        k4 = Ar @ (x + dt * k3) + Br @ r1
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nx = np.sqrt(np.sum(x * x))
        if nx > best:
            best = nx
    return best
