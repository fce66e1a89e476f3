"""Small dense linear algebra: norms, eigenvalues, Lyapunov solves.

Everything here targets matrices of dimension at most 16. The eigenvalue
routines are written out (cyclic Jacobi for symmetric input, Householder
Hessenberg reduction followed by Francis double-shift QR otherwise) and
compiled through :mod:`blfmrac._accel` when numba is available.
"""

from dataclasses import dataclass

import numpy as np

from . import constants as C
from ._accel import jit
from .errors import InfeasibleModelError, InvalidInputError, NumericalFailureError

__all__ = [
    "EigExtremes",
    "as_matrix",
    "spectral_norm",
    "symmetric_eigvals",
    "symmetric_eig_extremes",
    "eigvals_general",
    "max_real_eigenpart",
    "solve_lyapunov",
    "lyapunov_residual",
    "left_pseudo_inverse",
    "lu_solve",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class EigExtremes:
    lambda_min: float
    lambda_max: float


def as_matrix(A, name="matrix"):
    """Coerce to a finite 2-D float64 array or raise InvalidInputError."""
    try:
        arr = np.array(A, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not a real matrix ({exc})") from None
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name}: expected 2-D array, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name}: empty matrix")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: non-finite entries")
    return arr


def _square(A, name):
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name}: expected square matrix, got shape {A.shape}")
    return A


# --------------------------------------------------------------------------
# kernels


@jit
def _jacobi_eigvals(S, tol, max_sweeps):
    n = S.shape[0]
    a = S.copy()
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    if scale == 0.0:
        return np.zeros(n), 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off <= tol * tol * scale:
            return np.diag(a).copy(), 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[p, r] = a[r, p]
                    a[r, q] = c * arq + s * arp
                    a[q, r] = a[r, q]
    return np.diag(a).copy(), 1


@jit
def _balance(a):
    # Parlett-Reinsch balancing by powers of two; similarity transform only.
    n = a.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f


@jit
def _hessenberg(a):
    # Householder reduction in place: a <- Q^T a Q, upper Hessenberg.
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1 :, k].copy()
        alpha = np.sqrt(np.sum(x * x))
        if alpha == 0.0:
            continue
        if x[0] > 0.0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = np.sum(v * v)
        if vnorm2 == 0.0:
            continue
        # left: rows k+1.. ; right: cols k+1..
        for j in range(n):
            s = 0.0
            for i in range(v.size):
                s += v[i] * a[k + 1 + i, j]
            s = 2.0 * s / vnorm2
            for i in range(v.size):
                a[k + 1 + i, j] -= s * v[i]
        for i in range(n):
            s = 0.0
            for j in range(v.size):
                s += a[i, k + 1 + j] * v[j]
            s = 2.0 * s / vnorm2
            for j in range(v.size):
                a[i, k + 1 + j] -= s * v[j]
        for i in range(k + 2, n):
            a[i, k] = 0.0


@jit
def _hqr(h, max_its):
    # Francis double-shift QR on an upper Hessenberg matrix.
    # Classic EISPACK/NR layout, 1-based indices on a padded copy.
    n = h.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = h
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    x = 0.0
    y = 0.0
    z = 0.0
    w = 0.0
    p = 0.0
    q = 0.0
    r = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) <= 2.220446049250313e-16 * s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = np.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + (z if p >= 0.0 else -z)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if its >= max_its:
                        return wr[1:], wi[1:], 1
                    if its > 0 and its % 10 == 0:
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u <= 2.220446049250313e-16 * v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = np.sqrt(p * p + q * q + r * r)
                        if p < 0.0:
                            s = -s
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if l >= nn - 1:
                break
    return wr[1:], wi[1:], 0


@jit
def _lu_factor(a):
    # Doolittle LU with partial pivoting, in place. Returns (perm, status).
    n = a.shape[0]
    perm = np.arange(n)
    amax = np.max(np.abs(a))
    for k in range(n):
        piv = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            if abs(a[i, k]) > best:
                best = abs(a[i, k])
                piv = i
        if best <= 1e-14 * amax or best == 0.0:
            return perm, 1
        if piv != k:
            tmp = a[k, :].copy()
            a[k, :] = a[piv, :]
            a[piv, :] = tmp
            ti = perm[k]
            perm[k] = perm[piv]
            perm[piv] = ti
        a[k + 1 :, k] /= a[k, k]
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return perm, 0


@jit
def _lu_solve_factored(lu, perm, b):
    n = lu.shape[0]
    x = b[perm].copy()
    for i in range(1, n):
        x[i] -= np.dot(lu[i, :i], x[:i])
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - np.dot(lu[i, i + 1 :], x[i + 1 :])) / lu[i, i]
    return x


@jit
def _lyapunov_operator(ar):
    # Row-major vec: row i*n+j of the operator applied to vec(P) gives
    # (Ar^T P + P Ar)[i, j].
    n = ar.shape[0]
    op = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            row = i * n + j
            for k in range(n):
                op[row, k * n + j] += ar[k, i]
                op[row, i * n + k] += ar[k, j]
    return op


# --------------------------------------------------------------------------
# public API


def lu_solve(A, b):
    """Solve ``A x = b`` by LU with partial pivoting (one refinement step)."""
    A = _square(A, "A")
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != A.shape[0]:
        raise InvalidInputError("lu_solve: dimension mismatch")
    lu = A.copy()
    perm, status = _lu_factor(lu)
    if status:
        raise NumericalFailureError("singular linear system")
    x = _lu_solve_factored(lu, perm, b)
    x = x + _lu_solve_factored(lu, perm, b - A @ x)
    return x


def symmetric_eigvals(S):
    """All eigenvalues of a symmetric matrix, ascending (cyclic Jacobi)."""
    S = _square(S, "S")
    if S.shape[0] > 1:
        asym = np.max(np.abs(S - S.T))
        if asym > C.SYMMETRY_TOL * max(1.0, np.max(np.abs(S))):
            raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    S = 0.5 * (S + S.T)
    w, status = _jacobi_eigvals(S, _EPS, C.JACOBI_MAX_SWEEPS)
    if status:
        raise NumericalFailureError("Jacobi iteration did not converge")
    return np.sort(w)


def symmetric_eig_extremes(S):
    w = symmetric_eigvals(S)
    return EigExtremes(float(w[0]), float(w[-1]))


def spectral_norm(A):
    """Largest singular value, from the Gram matrix's top eigenvalue."""
    A = as_matrix(A, "A")
    G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    w, status = _jacobi_eigvals(0.5 * (G + G.T), _EPS, C.JACOBI_MAX_SWEEPS)
    if status:
        raise NumericalFailureError("Jacobi iteration did not converge")
    return float(np.sqrt(max(np.max(w), 0.0)))


def eigvals_general(A):
    """Complex spectrum of a real square matrix (n <= 16)."""
    A = _square(A, "A")
    n = A.shape[0]
    if n > C.MAX_DIM:
        raise InvalidInputError(f"dimension {n} exceeds supported maximum {C.MAX_DIM}")
    if n == 1:
        return np.array([complex(A[0, 0])])
    h = A.copy()
    _balance(h)
    _hessenberg(h)
    wr, wi, status = _hqr(h, C.QR_MAX_ITER_PER_EIG)
    if status:
        raise NumericalFailureError("shifted QR iteration did not converge")
    return wr + 1j * wi


def max_real_eigenpart(A):
    return float(np.max(eigvals_general(A).real))


def lyapunov_residual(Ar, P, Q):
    Ar = np.asarray(Ar, dtype=float)
    return spectral_norm(Ar.T @ P + P @ Ar + Q)


def solve_lyapunov(Ar, Q):
    """Solve ``Ar^T P + P Ar + Q = 0`` for symmetric positive definite P.

    The n^2 x n^2 Kronecker system is solved with dense LU. ``Ar`` must be
    Hurwitz and ``Q`` symmetric positive definite.
    """
    Ar = _square(Ar, "Ar")
    Q = _square(Q, "Q")
    n = Ar.shape[0]
    if Q.shape != Ar.shape:
        raise InvalidInputError(f"Q shape {Q.shape} does not match Ar shape {Ar.shape}")
    lam = max_real_eigenpart(Ar)
    if lam >= 0.0:
        raise InfeasibleModelError(f"Ar is not Hurwitz (max real eigenpart {lam:.6g})")
    if symmetric_eig_extremes(Q).lambda_min <= 0.0:
        raise InvalidInputError("Q is not positive definite")
    op = _lyapunov_operator(Ar)
    p = lu_solve(op, -Q.reshape(n * n))
    P = p.reshape(n, n)
    P = 0.5 * (P + P.T)
    if symmetric_eig_extremes(P).lambda_min <= 0.0:
        raise NumericalFailureError("Lyapunov solution is not positive definite")
    return P


def left_pseudo_inverse(B):
    """``(B^T B)^{-1} B^T`` for full column rank B."""
    B = as_matrix(B, "B")
    G = B.T @ B
    ext = symmetric_eig_extremes(G)
    if ext.lambda_min <= C.RANK_TOL:
        raise InvalidInputError(
            f"B is not full column rank (lambda_min(B^T B) = {ext.lambda_min:.3e})"
        )
    m = G.shape[0]
    Binv = np.empty((m, B.shape[0]))
    for j in range(B.shape[0]):
        Binv[:, j] = lu_solve(G, B.T[:, j])
    return Binv
