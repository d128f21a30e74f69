"""Steady-state covariance matrix from the continuous Lyapunov equation.

Two independent solver families ship here on purpose:

* production: SciPy's Schur-based solver on the numpy backend, or the
  compiled eigenbasis-reduction kernel on the numba backend ("spectral");
* oracle: dense Kronecker vectorization of the 8x8 equation to a 64x64
  linear solve ("kron"), cheap at this size and kept as a permanent
  correctness anchor.  It is test/oracle-only by default but selectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .dynamics import MODE_ORDER, StabilityResult, is_stable

SYMMETRY_TOL = 1e-12
# symplectic eigenvalues of a physical state are >= 1/2 up to solver noise
PHYSICALITY_SLACK = 1e-9


class UnstableSystemError(ValueError):
    """Raised when a stationary covariance is requested for an unstable A."""


@dataclass
class CovarianceMatrix:
    V: np.ndarray
    mode_order: tuple = field(default=MODE_ORDER)

    def symplectic_eigenvalues(self):
        return symplectic_eigenvalues(self.V)

    def is_physical(self, slack: float = PHYSICALITY_SLACK) -> bool:
        return bool(self.symplectic_eigenvalues().min() >= 0.5 - slack)


def residual(A, V, D) -> float:
    """Max-abs norm of A V + V A^T + D."""
    A = np.asarray(A, float)
    V = np.asarray(V, float)
    D = np.asarray(D, float)
    if A.shape != V.shape or A.shape != D.shape:
        raise ValueError("A, V, D must share one square shape")
    return float(np.abs(A @ V + V @ A.T + D).max())


def residual_scale(A, V, D) -> float:
    """Natural scale for a relative residual: |A||V| + |D| in max-norm."""
    return float(np.abs(A).max() * np.abs(V).max() + np.abs(D).max())


def solve_lyapunov(A, D, method: str = "auto",
                   stability: StabilityResult | None = None) -> CovarianceMatrix:
    """Solve A V + V A^T + D = 0 for the stationary covariance.

    method is one of "auto", "schur", "spectral", "kron".  "auto" picks the
    production path of the active backend.  The input must be stable; pass a
    precomputed StabilityResult to skip the check.
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    if stability is None:
        stability = is_stable(A)
    if not stability.stable:
        raise UnstableSystemError(
            f"no stationary solution: stability margin {stability.margin:.3e}")
    if method == "auto":
        method = "spectral" if _kernels.NUMBA_ENABLED else "schur"
    if method == "schur":
        V = scipy.linalg.solve_continuous_lyapunov(A, -D)
        V = 0.5 * (V + V.T)
    elif method == "spectral":
        V = _kernels.lyap_spectral(A, D, 2)
    elif method == "kron":
        V = _kernels.lyap_kron(A, D)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(V)):
        raise np.linalg.LinAlgError(
            "Lyapunov solve produced non-finite entries (marginal stability?)")
    return CovarianceMatrix(V=V)


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum of an n-mode covariance matrix, ascending.

    Computed as the positive halves of the spectrum of i*Omega*V with
    Omega the block-diagonal symplectic form.
    """
    V = np.asarray(V, dtype=float)
    n2 = V.shape[0]
    if n2 % 2 or V.shape != (n2, n2):
        raise ValueError(f"covariance matrix must be 2n x 2n, got {V.shape}")
    omega = np.zeros((n2, n2))
    for k in range(n2 // 2):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    ev = np.abs(np.linalg.eigvals(1j * omega @ V))
    return np.sort(ev)[::2]  # each value appears twice (+/- pair)
