"""Two-mode reductions, logarithmic negativity, bidirectional contrast ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# quadrature-row offset of each mode in the 8x8 covariance matrix
MODE_INDEX = {"a": 0, "m": 1, "b": 2, "c": 3}
_ALIASES = {
    "microwave_photon": "a", "magnon": "m", "phonon": "b", "optical_photon": "c",
}

# E_N below this is clamped to exactly zero; roundoff floor of the
# Lyapunov solve, keeps the contrast ratio stable near entanglement edges.
EN_ZERO_TOL = 1e-12


def _canon(label: str) -> str:
    lab = _ALIASES.get(label, label)
    if lab not in MODE_INDEX:
        raise ValueError(f"unknown mode label {label!r}; use one of a, m, b, c")
    return lab


@dataclass(frozen=True)
class ModePair:
    first: str
    second: str

    def __post_init__(self):
        object.__setattr__(self, "first", _canon(self.first))
        object.__setattr__(self, "second", _canon(self.second))
        if self.first == self.second:
            raise ValueError("mode pair needs two distinct modes")

    @property
    def label(self) -> str:
        return self.first + self.second

    def rows(self):
        """First quadrature row of each mode in the full matrix."""
        return 2 * MODE_INDEX[self.first], 2 * MODE_INDEX[self.second]


@dataclass
class ReducedCovariance:
    """4x4 two-mode covariance with its 2x2 block decomposition."""

    V4: np.ndarray

    @property
    def A(self):
        return self.V4[:2, :2]

    @property
    def B(self):
        return self.V4[2:, 2:]

    @property
    def C(self):
        return self.V4[:2, 2:]


def reduced_covariance(V, pair: ModePair) -> ReducedCovariance:
    """Select the two quadrature rows/columns of each mode of the pair."""
    V = np.asarray(getattr(V, "V", V), dtype=float)
    r0, r1 = pair.rows()
    idx = [r0, r0 + 1, r1, r1 + 1]
    return ReducedCovariance(V4=V[np.ix_(idx, idx)].copy())


def _eta_minus_closed(V4) -> float:
    detA = float(np.linalg.det(V4[:2, :2]))
    detB = float(np.linalg.det(V4[2:, 2:]))
    detC = float(np.linalg.det(V4[:2, 2:]))
    detV = float(np.linalg.det(V4))
    sig = detA + detB - 2.0 * detC
    disc = sig * sig - 4.0 * detV
    tol = 1e-10 * max(sig * sig, abs(4.0 * detV)) + 1e-300
    if disc < -tol:
        raise ValueError(
            f"unphysical two-mode covariance: Sigma^2 - 4 det V = {disc:.3e} < 0")
    disc = max(disc, 0.0)
    rad = 0.5 * (sig - math.sqrt(disc))
    if rad < -tol:
        raise ValueError(
            f"unphysical two-mode covariance: negative radicand {rad:.3e}")
    return math.sqrt(max(rad, 0.0))


def log_negativity(rc: ReducedCovariance) -> float:
    """E_N = max(0, -ln 2*eta_minus), natural log, clamped below EN_ZERO_TOL.

    eta_minus is the smaller symplectic eigenvalue of the partially
    transposed two-mode state, via the closed determinant form
    Sigma = det A + det B - 2 det C.
    """
    eta = _eta_minus_closed(np.asarray(rc.V4, dtype=float))
    if eta <= 0.0:
        raise ValueError("degenerate two-mode covariance (eta_minus = 0)")
    en = max(0.0, -math.log(2.0 * eta))
    return 0.0 if en < EN_ZERO_TOL else en


def symplectic_eigenvalues_pt(rc: ReducedCovariance):
    """(eta_plus, eta_minus) of the partial transpose, spectral path.

    Partial transposition flips the second mode's Y quadrature; the
    symplectic spectrum is then |eig(i Omega V~)|.  Serves as the
    independent oracle for the closed form used in log_negativity.
    """
    V4 = np.asarray(rc.V4, dtype=float)
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    Vt = P @ V4 @ P
    omega = np.zeros((4, 4))
    omega[0, 1] = omega[2, 3] = 1.0
    omega[1, 0] = omega[3, 2] = -1.0
    ev = np.sort(np.abs(np.linalg.eigvals(1j * omega @ Vt)))
    return float(ev[2]), float(ev[0])


def contrast_ratio(e_pos: float, e_neg: float) -> float:
    """Bidirectional contrast |E+ - E-| / (E+ + E-), NaN when both vanish.

    0 means no nonreciprocity, 1 ideal nonreciprocity.  Both-zero input is
    undefined rather than reciprocal; callers plot it as a gap.
    """
    if e_pos < 0.0 or e_neg < 0.0:
        raise ValueError("entanglement inputs must be >= 0")
    if e_pos == 0.0 and e_neg == 0.0:
        return math.nan
    return abs(e_pos - e_neg) / (e_pos + e_neg)
