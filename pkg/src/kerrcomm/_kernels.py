"""Hot numeric kernels: drift assembly, Lyapunov solves, grid evaluation.

The kernels are written in njit-compatible numpy and compiled with numba by
default.  Setting the environment variable ``KERRCOMM_BACKEND=numpy`` before
import skips compilation and runs the same functions as plain Python; the
sweep engine then additionally switches its per-point Lyapunov solve to the
SciPy Schur-based solver (the numpy lane's production path).

Parameter vectors handed to :func:`grid_eval` are normalized so that
omega_b = 1; column layout is given by ``P_*`` below.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("KERRCOMM_BACKEND", "").strip().lower()
if _env in ("", "numba"):
    try:
        from numba import njit as _njit
        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
elif _env in ("numpy", "python"):
    NUMBA_ENABLED = False
else:
    raise RuntimeError(
        f"KERRCOMM_BACKEND={_env!r} not understood (use 'numba' or 'numpy')")

if NUMBA_ENABLED:
    def jit(fn):
        return _njit(cache=True, nogil=True)(fn)
else:
    def jit(fn):
        return fn

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

# column layout of a normalized parameter vector (omega_b = 1)
P_DELTA_A = 0
P_DELTA_M = 1
P_DELTA_C = 2
P_DELTA_K = 3
P_G_AM = 4
P_G_M = 5
P_G_C = 6
P_KAPPA_A = 7
P_KAPPA_M = 8
P_KAPPA_C = 9
P_GAMMA_B = 10
P_N_A = 11
P_N_M = 12
P_N_B = 13
P_N_C = 14
N_PARAMS = 15


@jit
def drift_from_vec(p):
    """8x8 drift matrix from a normalized parameter vector."""
    da = p[P_DELTA_A]
    dm = p[P_DELTA_M]
    dc = p[P_DELTA_C]
    dk = p[P_DELTA_K]
    gam = p[P_G_AM]
    Gm = p[P_G_M]
    Gc = p[P_G_C]
    ka = p[P_KAPPA_A]
    km = p[P_KAPPA_M]
    kc = p[P_KAPPA_C]
    gb = p[P_GAMMA_B]
    U = dm + 3.0 * dk
    V = dm + dk
    A = np.zeros((8, 8))
    A[0, 0] = -ka
    A[0, 1] = da
    A[0, 3] = gam
    A[1, 0] = -da
    A[1, 1] = -ka
    A[1, 2] = -gam
    A[2, 1] = gam
    A[2, 2] = -km
    A[2, 3] = U
    A[2, 4] = Gm
    A[3, 0] = -gam
    A[3, 2] = -V
    A[3, 3] = -km
    A[4, 5] = 1.0
    A[5, 3] = -Gm
    A[5, 4] = -1.0
    A[5, 5] = -gb
    A[5, 7] = -Gc
    A[6, 4] = Gc
    A[6, 6] = -kc
    A[6, 7] = dc
    A[7, 6] = -dc
    A[7, 7] = -kc
    return A


@jit
def diffusion_from_vec(p):
    """Diagonal of the 8x8 diffusion matrix (normalized units)."""
    d = np.zeros(8)
    d[0] = p[P_KAPPA_A] * (2.0 * p[P_N_A] + 1.0)
    d[1] = d[0]
    d[2] = p[P_KAPPA_M] * (2.0 * p[P_N_M] + 1.0)
    d[3] = d[2]
    d[5] = p[P_GAMMA_B] * (2.0 * p[P_N_B] + 1.0)
    d[6] = p[P_KAPPA_C] * (2.0 * p[P_N_C] + 1.0)
    d[7] = d[6]
    return d


@jit
def stability_margin(A):
    """Negated largest real part of the spectrum of A."""
    Ac = A.astype(np.complex128)
    w = np.linalg.eigvals(Ac)
    mx = w[0].real
    for i in range(1, w.shape[0]):
        if w[i].real > mx:
            mx = w[i].real
    return -mx


@jit
def _eig_solve(w, S, M):
    """Solve A X + X A^T + M = 0 given the eigendecomposition A = S diag(w) S^-1."""
    n = w.shape[0]
    Mc = M.astype(np.complex128)
    G = np.linalg.solve(S, Mc)
    Gt = np.ascontiguousarray(G.T)
    W = np.ascontiguousarray(np.linalg.solve(S, Gt).T)
    for i in range(n):
        for j in range(n):
            W[i, j] = -W[i, j] / (w[i] + w[j])
    St = np.ascontiguousarray(S.T)
    X = np.real(S @ W @ St)
    return 0.5 * (X + X.T)


@jit
def lyap_spectral(A, D, refine=2):
    """Steady-state covariance from A V + V A^T + D = 0, eigenbasis reduction.

    A is reduced to diagonal form by its (generally complex) eigenbasis, the
    transformed equation is solved elementwise and transformed back; a couple
    of residual-correction passes remove the conditioning loss of a
    non-normal eigenbasis.  Requires A strictly stable.
    """
    Ac = A.astype(np.complex128)
    w, S = np.linalg.eig(Ac)
    V = _eig_solve(w, S, D)
    for _ in range(refine):
        R = A @ V + V @ A.T + D
        V = V + _eig_solve(w, S, R)
        V = 0.5 * (V + V.T)
    return V


@jit
def lyap_kron(A, D):
    """Brute-force oracle: vectorize A V + V A^T + D = 0 to an n^2 system.

    Row-major vec convention: (A (x) I + I (x) A) vec(V) = -vec(D).
    """
    n = A.shape[0]
    m = n * n
    M = np.zeros((m, m))
    for i in range(n):
        for j in range(n):
            r = n * i + j
            for k in range(n):
                M[r, n * k + j] += A[i, k]   # (A V)_ij
                M[r, n * i + k] += A[j, k]   # (V A^T)_ij
    b = np.empty(m)
    for i in range(n):
        for j in range(n):
            b[n * i + j] = -D[i, j]
    v = np.linalg.solve(M, b)
    V = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            V[i, j] = v[n * i + j]
    return 0.5 * (V + V.T)


@jit
def lyap_residual(A, V, D):
    """Max-abs residual of the Lyapunov equation."""
    R = A @ V + V @ A.T + D
    mx = 0.0
    for i in range(R.shape[0]):
        for j in range(R.shape[1]):
            a = abs(R[i, j])
            if a > mx:
                mx = a
    return mx


@jit
def logneg_closed(V4, zero_tol):
    """Log-negativity of a two-mode covariance matrix, closed determinant form.

    Returns -1.0 when the discriminant is negative beyond roundoff, which
    flags an unphysical input to the caller.
    """
    detA = V4[0, 0] * V4[1, 1] - V4[0, 1] * V4[1, 0]
    detB = V4[2, 2] * V4[3, 3] - V4[2, 3] * V4[3, 2]
    detC = V4[0, 2] * V4[1, 3] - V4[0, 3] * V4[1, 2]
    detV = np.linalg.det(np.ascontiguousarray(V4))
    sig = detA + detB - 2.0 * detC
    disc = sig * sig - 4.0 * detV
    tol = 1e-10 * max(sig * sig, abs(4.0 * detV)) + 1e-300
    if disc < -tol:
        return -1.0
    if disc < 0.0:
        disc = 0.0
    rad = 0.5 * (sig - np.sqrt(disc))
    if rad < -tol:
        return -1.0
    if rad <= 0.0:
        return 0.0
    eta = np.sqrt(rad)
    en = -np.log(2.0 * eta)
    if en < zero_tol:
        return 0.0
    return en


@jit
def grid_eval(params, pair_rows, eps_stab, zero_tol, refine,
              out_en, out_stable, out_margin, out_resid):
    """Evaluate stability, covariance and per-pair log-negativity on a grid.

    params: (N, N_PARAMS) normalized parameter vectors.
    pair_rows: (P, 2) int64, first quadrature row of each mode in the pair.
    Unstable points get NaN entanglement and a zero stable flag; everything
    is written into the preallocated out_* arrays (en is (N, P)).
    """
    n_pts = params.shape[0]
    n_pairs = pair_rows.shape[0]
    for t in range(n_pts):
        A = drift_from_vec(params[t])
        d = diffusion_from_vec(params[t])
        Ac = A.astype(np.complex128)
        w, S = np.linalg.eig(Ac)
        mx = w[0].real
        for i in range(1, 8):
            if w[i].real > mx:
                mx = w[i].real
        out_margin[t] = -mx
        if mx >= -eps_stab:
            out_stable[t] = 0
            out_resid[t] = np.nan
            for pp in range(n_pairs):
                out_en[t, pp] = np.nan
            continue
        out_stable[t] = 1
        D = np.zeros((8, 8))
        for i in range(8):
            D[i, i] = d[i]
        V = _eig_solve(w, S, D)
        for _ in range(refine):
            R = A @ V + V @ A.T + D
            V = V + _eig_solve(w, S, R)
            V = 0.5 * (V + V.T)
        out_resid[t] = lyap_residual(A, V, D)
        for pp in range(n_pairs):
            r0 = pair_rows[pp, 0]
            r1 = pair_rows[pp, 1]
            V4 = np.empty((4, 4))
            for i in range(2):
                for j in range(2):
                    V4[i, j] = V[r0 + i, r0 + j]
                    V4[i, 2 + j] = V[r0 + i, r1 + j]
                    V4[2 + i, j] = V[r1 + i, r0 + j]
                    V4[2 + i, 2 + j] = V[r1 + i, r1 + j]
            out_en[t, pp] = logneg_closed(V4, zero_tol)


def warmup():
    """Force compilation of all kernels (no-op on the numpy backend)."""
    p = np.zeros(N_PARAMS)
    p[P_DELTA_A] = -1.0
    p[P_DELTA_M] = -1.0
    p[P_DELTA_C] = 1.0
    p[P_KAPPA_A] = 0.02
    p[P_KAPPA_M] = 0.02
    p[P_KAPPA_C] = 0.05
    p[P_GAMMA_B] = 1e-5
    A = drift_from_vec(p)
    D = np.diag(diffusion_from_vec(p))
    stability_margin(A)
    V = lyap_spectral(A, D, 2)
    lyap_kron(A, D)
    lyap_residual(A, V, D)
    params = p.reshape(1, -1)
    pairs = np.array([[2, 4]], dtype=np.int64)
    en = np.zeros((1, 1))
    st = np.zeros(1, dtype=np.uint8)
    mg = np.zeros(1)
    rs = np.zeros(1)
    grid_eval(params, pairs, 1e-9, 1e-12, 2, en, st, mg, rs)
