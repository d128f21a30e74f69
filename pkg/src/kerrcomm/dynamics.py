"""Linearized fluctuation dynamics: drift matrix, diffusion matrix, stability.

Quadrature ordering is (X_a, Y_a, X_m, Y_m, q, p, X_c, Y_c).  The magnon
block carries the Kerr asymmetry: the X_m row couples to Y_m with
U = delta_m_eff + 3*delta_k while the Y_m row couples back with
-V = -(delta_m_eff + delta_k), so U = V only without the Kerr shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import OperatingPoint

MODE_ORDER = ("X_a", "Y_a", "X_m", "Y_m", "q", "p", "X_c", "Y_c")

# Stability threshold is eps_factor * omega_b; an artifact choice, see README.
STABILITY_EPS_FACTOR = 1e-9


def build_drift(op: OperatingPoint) -> np.ndarray:
    """8x8 drift matrix in the units of the operating point (rad/s)."""
    U = op.delta_m_eff + 3.0 * op.delta_k
    V = op.delta_m_eff + op.delta_k
    ka, km, kc, gb = op.kappa_a, op.kappa_m, op.kappa_c, op.gamma_b
    gam, Gm, Gc, wb = op.g_am, op.G_m, op.G_c, op.omega_b
    da, dc = op.delta_a, op.delta_c_eff
    return np.array([
        [-ka,   da,    0.0,  gam,  0.0,  0.0,  0.0,  0.0],
        [-da,  -ka,   -gam,  0.0,  0.0,  0.0,  0.0,  0.0],
        [0.0,   gam,  -km,   U,    Gm,   0.0,  0.0,  0.0],
        [-gam,  0.0,  -V,   -km,   0.0,  0.0,  0.0,  0.0],
        [0.0,   0.0,   0.0,  0.0,  0.0,  wb,   0.0,  0.0],
        [0.0,   0.0,   0.0, -Gm,  -wb,  -gb,   0.0, -Gc],
        [0.0,   0.0,   0.0,  0.0,  Gc,   0.0, -kc,   dc],
        [0.0,   0.0,   0.0,  0.0,  0.0,  0.0, -dc,  -kc],
    ])


def build_diffusion(op: OperatingPoint) -> np.ndarray:
    """Diagonal diffusion matrix from the input-noise correlators.

    Each dissipative quadrature pair gets kappa*(2n+1); the q row carries no
    noise (the mechanical force drives p only).
    """
    da = op.kappa_a * (2.0 * op.n_a + 1.0)
    dm = op.kappa_m * (2.0 * op.n_m + 1.0)
    db = op.gamma_b * (2.0 * op.n_b + 1.0)
    dc = op.kappa_c * (2.0 * op.n_c + 1.0)
    return np.diag([da, da, dm, dm, 0.0, db, dc, dc])


@dataclass
class DriftDiffusion:
    A: np.ndarray
    D: np.ndarray
    mode_order: tuple = field(default=MODE_ORDER)


def drift_diffusion(op: OperatingPoint) -> DriftDiffusion:
    return DriftDiffusion(A=build_drift(op), D=build_diffusion(op))


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    margin: float  # -max Re(eig), in the units of the input matrix


def is_stable(A: np.ndarray, omega_b: float | None = None,
              eps_factor: float = STABILITY_EPS_FACTOR) -> StabilityResult:
    """Eigenvalue stability check of the drift matrix.

    Stable means every eigenvalue real part is below -eps_factor*omega_b.
    omega_b defaults to the A[4,5] entry, which holds it by construction.
    Raises np.linalg.LinAlgError if the eigenvalue iteration fails, which
    signals an ill-conditioned input.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("drift matrix has non-finite entries")
    if omega_b is None:
        omega_b = A[4, 5]
    ev = np.linalg.eigvals(A)
    margin = -float(ev.real.max())
    return StabilityResult(stable=margin > eps_factor * omega_b, margin=margin)
